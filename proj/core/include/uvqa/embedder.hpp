#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "uvqa/autograd.hpp"
#include "uvqa/dataset.hpp"
#include "uvqa/model.hpp"

namespace uvqa {

enum class EntityKind { object, ocr, question };

struct EmbedderOptions {
  /// Test hook: replace every embedding layer norm with the identity.
  bool identity_norm = false;
};

/// Deterministic stand-in for a pretrained word vector: the lowercased token
/// is hashed and expanded splitmix-style into `dim` values in [-0.5, 0.5].
std::vector<double> stand_in_word_vector(std::string_view token, std::size_t dim);

/// Boxes are already image-normalized at ingest; returned as (x1, y1, x2, y2).
std::array<double, 4> encode_bbox(const BBox& box);

/// row_j = LN(feature_j · W_obj) + LN(bbox_j · W_box) + type_object.
/// At most cfg.max_objects rows. nullopt for an empty list.
std::optional<Var> embed_objects(Graph& g, std::span<const ObjectEntity> objects, const Model& model,
                                 EmbedderParams& params, const EmbedderOptions& opts = {});

/// row_i = LN(word_vec_i · W_ft + appearance_i · W_ap) + LN(bbox_i · W_box) + type_ocr.
/// A missing appearance contributes nothing; a missing word_vec uses the
/// stand-in. At most cfg.max_ocr rows. nullopt for an empty list.
std::optional<Var> embed_ocr(Graph& g, std::span<const OcrToken> tokens, const Model& model, EmbedderParams& params,
                             const EmbedderOptions& opts = {});

/// row_q = word_table[w_q] + pos_table[q] + type_question over the first
/// cfg.max_question normalized words; an empty question yields one unknown
/// row. Precomputed d-wide vectors, when given, replace the table lookup.
Var embed_question(Graph& g, std::string_view question, const Model& model, EmbedderParams& params,
                   const std::vector<std::vector<double>>* precomputed = nullptr);

/// Concatenated entity rows, grouped objects, OCR tokens, question words.
struct EntitySequence {
  Tensor matrix;
  std::vector<EntityKind> kinds;
  std::vector<std::size_t> ocr_row_index;

  std::size_t objects() const;
  std::size_t ocr() const { return ocr_row_index.size(); }
  std::size_t questions() const;
};

EntitySequence assemble(const std::optional<Tensor>& object_rows, const std::optional<Tensor>& ocr_rows,
                        const Tensor& question_rows);

/// Graph-level entity rows for one record.
struct EntityRows {
  Var rows;
  std::size_t objects = 0;
  std::size_t ocr = 0;
  std::size_t questions = 0;

  std::size_t total() const { return objects + ocr + questions; }
};

EntityRows embed_record(Graph& g, const QARecord& record, Model& model, const EmbedderOptions& opts = {});

/// Inference convenience: embeds a record and returns the assembled sequence.
EntitySequence embed_record_sequence(const QARecord& record, Model& model, const EmbedderOptions& opts = {});

}  // namespace uvqa
