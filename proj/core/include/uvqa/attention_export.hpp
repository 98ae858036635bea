#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uvqa/dataset.hpp"
#include "uvqa/embedder.hpp"
#include "uvqa/fusion.hpp"

namespace uvqa {

struct EntityMass {
  EntityKind kind = EntityKind::object;
  std::size_t index = 0;  // position within its kind
  std::optional<BBox> bbox;  // question words have none
  double mass = 0.0;
};

struct Heatmap {
  static constexpr std::size_t kSize = 64;
  std::vector<std::uint8_t> pixels = std::vector<std::uint8_t>(kSize * kSize, 0);
  std::vector<EntityMass> entities;

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * kSize + x]; }
};

/// Attention of the first decoder position over the entities, splatted into
/// each entity's box on a 64×64 grid (a cell belongs to a box when its centre
/// lies inside it; overlaps keep the maximum) and scaled so the largest cell
/// is 255. Throws ValidationError for an out-of-range layer or head.
Heatmap export_attention(const DecodedAnswer& answer, const QARecord& record, std::size_t layer, std::size_t head);

/// Plain "P2" PGM, one grid row per line.
std::string to_pgm(const Heatmap& map);

/// kind, index, x1, y1, x2, y2, mass per entity (empty box fields for words).
std::string to_tsv(const Heatmap& map);

}  // namespace uvqa
