#include "uvqa/embedder.hpp"

#include <algorithm>

#include "uvqa/errors.hpp"
#include "uvqa/rng.hpp"
#include "uvqa/text.hpp"

namespace uvqa {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Var norm_or_identity(Graph& g, Var x, const LayerNormParams& ln, const EmbedderOptions& opts) {
  if (opts.identity_norm) return x;
  return g.layer_norm(x, g.param(*ln.gain), g.param(*ln.bias));
}

Tensor box_matrix(std::size_t n, auto&& box_of) {
  Tensor boxes({n, 4});
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = encode_bbox(box_of(i));
    std::copy(b.begin(), b.end(), boxes.row(i).begin());
  }
  return boxes;
}

}  // namespace

std::vector<double> stand_in_word_vector(std::string_view token, std::size_t dim) {
  const std::uint64_t seed = fnv1a(to_lower(token));
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const std::uint64_t bits = Rng::mix(seed + (i + 1) * 0x9E3779B97F4A7C15ULL);
    v[i] = static_cast<double>(bits >> 11) * 0x1.0p-53 - 0.5;
  }
  return v;
}

std::array<double, 4> encode_bbox(const BBox& box) { return box.as_array(); }

std::optional<Var> embed_objects(Graph& g, std::span<const ObjectEntity> objects, const Model& model,
                                 EmbedderParams& params, const EmbedderOptions& opts) {
  const auto& cfg = model.config();
  const std::size_t n = std::min(objects.size(), cfg.max_objects);
  if (n == 0) return std::nullopt;
  Tensor features({n, cfg.object_dim});
  for (std::size_t j = 0; j < n; ++j) {
    if (objects[j].feature.size() != cfg.object_dim) {
      throw DimensionError("object " + std::to_string(j) + " feature has length " +
                           std::to_string(objects[j].feature.size()) + ", expected " + std::to_string(cfg.object_dim));
    }
    std::copy(objects[j].feature.begin(), objects[j].feature.end(), features.row(j).begin());
  }
  const Tensor boxes = box_matrix(n, [&](std::size_t j) { return objects[j].bbox; });

  const Var feat = norm_or_identity(g, g.matmul(g.constant(std::move(features)), g.param(*params.w_obj)),
                                    params.obj_feature_norm, opts);
  const Var box = norm_or_identity(g, g.matmul(g.constant(boxes), g.param(*params.w_box)), params.obj_box_norm, opts);
  return g.add_row(g.add(feat, box), g.param(*params.type_object));
}

std::optional<Var> embed_ocr(Graph& g, std::span<const OcrToken> tokens, const Model& model, EmbedderParams& params,
                             const EmbedderOptions& opts) {
  const auto& cfg = model.config();
  const std::size_t n = std::min(tokens.size(), cfg.max_ocr);
  if (n == 0) return std::nullopt;
  Tensor words({n, cfg.word_dim});
  Tensor appearance({n, cfg.appearance_dim});
  bool any_appearance = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = tokens[i];
    const std::vector<double> wv = t.word_vec ? *t.word_vec : stand_in_word_vector(t.text, cfg.word_dim);
    if (wv.size() != cfg.word_dim) {
      throw DimensionError("ocr token " + std::to_string(i) + " word_vec has length " + std::to_string(wv.size()) +
                           ", expected " + std::to_string(cfg.word_dim));
    }
    std::copy(wv.begin(), wv.end(), words.row(i).begin());
    if (t.appearance) {
      if (t.appearance->size() != cfg.appearance_dim) {
        throw DimensionError("ocr token " + std::to_string(i) + " appearance has length " +
                             std::to_string(t.appearance->size()) + ", expected " + std::to_string(cfg.appearance_dim));
      }
      std::copy(t.appearance->begin(), t.appearance->end(), appearance.row(i).begin());
      any_appearance = true;
    }
  }
  const Tensor boxes = box_matrix(n, [&](std::size_t i) { return tokens[i].bbox; });

  Var text = g.matmul(g.constant(std::move(words)), g.param(*params.w_ft));
  if (any_appearance) text = g.add(text, g.matmul(g.constant(std::move(appearance)), g.param(*params.w_ap)));
  const Var feat = norm_or_identity(g, text, params.ocr_feature_norm, opts);
  const Var box = norm_or_identity(g, g.matmul(g.constant(boxes), g.param(*params.w_box)), params.ocr_box_norm, opts);
  return g.add_row(g.add(feat, box), g.param(*params.type_ocr));
}

Var embed_question(Graph& g, std::string_view question, const Model& model, EmbedderParams& params,
                   const std::vector<std::vector<double>>* precomputed) {
  const auto& cfg = model.config();
  auto words = normalize_words(question);
  if (words.size() > cfg.max_question) words.resize(cfg.max_question);

  Var base;
  std::size_t n = 0;
  if (precomputed && !precomputed->empty()) {
    n = std::min(precomputed->size(), cfg.max_question);
    Tensor rows({n, cfg.d});
    for (std::size_t q = 0; q < n; ++q) {
      if ((*precomputed)[q].size() != cfg.d) {
        throw DimensionError("precomputed question vector " + std::to_string(q) + " has length " +
                             std::to_string((*precomputed)[q].size()) + ", expected d=" + std::to_string(cfg.d));
      }
      std::copy((*precomputed)[q].begin(), (*precomputed)[q].end(), rows.row(q).begin());
    }
    base = g.constant(std::move(rows));
  } else {
    std::vector<std::size_t> ids;
    for (const auto& w : words) ids.push_back(model.questions().index_of(w));
    if (ids.empty()) ids.push_back(WordVocabulary::kUnknown);
    n = ids.size();
    base = g.gather_rows(g.param(*params.word_table), std::move(ids));
  }
  std::vector<std::size_t> positions(n);
  for (std::size_t q = 0; q < n; ++q) positions[q] = q;
  const Var pos = g.gather_rows(g.param(*params.pos_table), std::move(positions));
  return g.add_row(g.add(base, pos), g.param(*params.type_question));
}

std::size_t EntitySequence::objects() const {
  return static_cast<std::size_t>(std::count(kinds.begin(), kinds.end(), EntityKind::object));
}

std::size_t EntitySequence::questions() const {
  return static_cast<std::size_t>(std::count(kinds.begin(), kinds.end(), EntityKind::question));
}

EntitySequence assemble(const std::optional<Tensor>& object_rows, const std::optional<Tensor>& ocr_rows,
                        const Tensor& question_rows) {
  const std::size_t d = question_rows.cols();
  for (const auto* t : {object_rows ? &*object_rows : nullptr, ocr_rows ? &*ocr_rows : nullptr}) {
    if (t && t->cols() != d) {
      throw DimensionError("assemble: entity width " + shape_string(t->shape()) + " differs from question rows " +
                           shape_string(question_rows.shape()));
    }
  }
  const std::size_t n_obj = object_rows ? object_rows->rows() : 0;
  const std::size_t n_ocr = ocr_rows ? ocr_rows->rows() : 0;
  const std::size_t n_q = question_rows.rows();

  EntitySequence seq;
  seq.matrix = Tensor({n_obj + n_ocr + n_q, d});
  auto out = seq.matrix.values().begin();
  for (const auto* t : {object_rows ? &*object_rows : nullptr, ocr_rows ? &*ocr_rows : nullptr, &question_rows}) {
    if (t) out = std::copy(t->values().begin(), t->values().end(), out);
  }
  seq.kinds.insert(seq.kinds.end(), n_obj, EntityKind::object);
  seq.kinds.insert(seq.kinds.end(), n_ocr, EntityKind::ocr);
  seq.kinds.insert(seq.kinds.end(), n_q, EntityKind::question);
  for (std::size_t i = 0; i < n_ocr; ++i) seq.ocr_row_index.push_back(n_obj + i);
  return seq;
}

EntityRows embed_record(Graph& g, const QARecord& record, Model& model, const EmbedderOptions& opts) {
  EmbedderParams& params = model.embedder();
  const auto objects = embed_objects(g, record.objects, model, params, opts);
  const auto ocr = embed_ocr(g, record.ocr, model, params, opts);
  const Var question = embed_question(g, record.question, model, params,
                                      record.question_vectors ? &*record.question_vectors : nullptr);
  EntityRows out;
  std::vector<Var> parts;
  if (objects) {
    out.objects = g.value(*objects).rows();
    parts.push_back(*objects);
  }
  if (ocr) {
    out.ocr = g.value(*ocr).rows();
    parts.push_back(*ocr);
  }
  out.questions = g.value(question).rows();
  parts.push_back(question);
  out.rows = parts.size() == 1 ? question : g.concat_rows(parts);
  return out;
}

EntitySequence embed_record_sequence(const QARecord& record, Model& model, const EmbedderOptions& opts) {
  Graph g(Graph::Mode::inference);
  EmbedderParams& params = model.embedder();
  const auto objects = embed_objects(g, record.objects, model, params, opts);
  const auto ocr = embed_ocr(g, record.ocr, model, params, opts);
  const Var question = embed_question(g, record.question, model, params,
                                      record.question_vectors ? &*record.question_vectors : nullptr);
  std::optional<Tensor> obj_rows, ocr_rows;
  if (objects) obj_rows = g.value(*objects);
  if (ocr) ocr_rows = g.value(*ocr);
  return assemble(obj_rows, ocr_rows, g.value(question));
}

}  // namespace uvqa
