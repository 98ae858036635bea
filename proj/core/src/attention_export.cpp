#include "uvqa/attention_export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "uvqa/errors.hpp"

namespace uvqa {

namespace {

std::string_view kind_name(EntityKind k) {
  switch (k) {
    case EntityKind::object: return "object";
    case EntityKind::ocr: return "ocr";
    case EntityKind::question: return "question";
  }
  return "unknown";
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Heatmap export_attention(const DecodedAnswer& answer, const QARecord& record, std::size_t layer, std::size_t head) {
  if (layer >= answer.attention.size()) {
    throw ValidationError("layer " + std::to_string(layer) + " out of range (model has " +
                          std::to_string(answer.attention.size()) + " layers)");
  }
  if (head >= answer.attention[layer].size()) {
    throw ValidationError("head " + std::to_string(head) + " out of range (model has " +
                          std::to_string(answer.attention[layer].size()) + " heads)");
  }
  if (answer.objects > record.objects.size() || answer.ocr > record.ocr.size())
    throw ValidationError("decoded answer does not belong to this record");
  const Tensor& attn = answer.attention[layer][head];
  const std::size_t first_decoder_row = answer.entities();
  if (attn.rows() <= first_decoder_row) throw ValidationError("attention has no decoder rows");

  Heatmap map;
  for (std::size_t e = 0; e < answer.entities(); ++e) {
    EntityMass m;
    m.mass = attn(first_decoder_row, e);
    if (e < answer.objects) {
      m.kind = EntityKind::object;
      m.index = e;
      m.bbox = record.objects[e].bbox;
    } else if (e < answer.objects + answer.ocr) {
      m.kind = EntityKind::ocr;
      m.index = e - answer.objects;
      m.bbox = record.ocr[m.index].bbox;
    } else {
      m.kind = EntityKind::question;
      m.index = e - answer.objects - answer.ocr;
    }
    map.entities.push_back(m);
  }

  constexpr std::size_t n = Heatmap::kSize;
  std::vector<double> grid(n * n, 0.0);
  for (const auto& m : map.entities) {
    if (!m.bbox) continue;
    for (std::size_t y = 0; y < n; ++y) {
      const double cy = (static_cast<double>(y) + 0.5) / static_cast<double>(n);
      if (cy < m.bbox->y1 || cy > m.bbox->y2) continue;
      for (std::size_t x = 0; x < n; ++x) {
        const double cx = (static_cast<double>(x) + 0.5) / static_cast<double>(n);
        if (cx < m.bbox->x1 || cx > m.bbox->x2) continue;
        grid[y * n + x] = std::max(grid[y * n + x], m.mass);
      }
    }
  }
  const double peak = *std::max_element(grid.begin(), grid.end());
  if (peak > 0.0) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      map.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * grid[i] / peak));
  }
  return map;
}

std::string to_pgm(const Heatmap& map) {
  std::ostringstream out;
  out << "P2\n" << Heatmap::kSize << ' ' << Heatmap::kSize << "\n255\n";
  for (std::size_t y = 0; y < Heatmap::kSize; ++y) {
    for (std::size_t x = 0; x < Heatmap::kSize; ++x) {
      if (x) out << ' ';
      out << static_cast<int>(map.at(x, y));
    }
    out << '\n';
  }
  return out.str();
}

std::string to_tsv(const Heatmap& map) {
  std::ostringstream out;
  out << "kind\tindex\tx1\ty1\tx2\ty2\tmass\n";
  for (const auto& m : map.entities) {
    out << kind_name(m.kind) << '\t' << m.index;
    if (m.bbox) {
      for (double v : m.bbox->as_array()) out << '\t' << number(v);
    } else {
      out << "\t\t\t\t";
    }
    out << '\t' << number(m.mass) << '\n';
  }
  return out.str();
}

}  // namespace uvqa
