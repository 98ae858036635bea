#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uvqa/autograd.hpp"
#include "uvqa/dataset.hpp"
#include "uvqa/embedder.hpp"
#include "uvqa/model.hpp"

namespace uvqa {

/// Per-layer, per-head attention; each entry a row-stochastic matrix.
using AttentionStack = std::vector<std::vector<Tensor>>;

/// Output of the entity pass through the shared stack. Keys and values of
/// every layer are kept so decoder rows can attend to the entities without
/// recomputing them; entity rows never attend to decoder rows.
struct EncoderPass {
  Var states;
  std::size_t rows = 0;
  std::vector<std::vector<Var>> keys;    // [layer][head]
  std::vector<std::vector<Var>> values;  // [layer][head]
  std::vector<std::vector<Var>> attention;
};

struct DecoderPass {
  Var states;
  /// [layer][head], rows = decoder positions, columns = entities then
  /// decoder positions (causal).
  std::vector<std::vector<Var>> attention;
};

/// L pre-norm layers of unmasked multi-head self-attention plus a GELU
/// feed-forward block, residual around both. With zero layers the states are
/// the inputs.
EncoderPass encode(Graph& g, Model& model, Var entities);

/// Runs decoder rows through the same layers. Row t attends to every entity
/// and to decoder rows 0..t.
DecoderPass decode_rows(Graph& g, Model& model, const EncoderPass& enc, Var decoder_inputs);

/// states · W_vocab + b_vocab, one row of vocabulary scores per decoder row.
Var vocab_scores(Graph& g, Model& model, Var decoder_states);

/// Bilinear pointer: score(t, i) = (W_q z_t + b_q) · (W_k s_i + b_k) / sqrt(d).
Var pointer_scores(Graph& g, FusionParams& params, Var decoder_states, Var ocr_states);

struct DecoderFeed {
  enum class Kind { begin, vocab, ocr };
  Kind kind = Kind::begin;
  std::size_t index = 0;

  static DecoderFeed begin() { return {Kind::begin, 0}; }
  static DecoderFeed vocab(std::size_t i) { return {Kind::vocab, i}; }
  static DecoderFeed ocr(std::size_t i) { return {Kind::ocr, i}; }
  bool operator==(const DecoderFeed&) const = default;
};

/// Decoder input rows: the begin or vocabulary embedding, or the encoder
/// output of a copied OCR token, plus the step embedding.
Var decoder_inputs(Graph& g, Model& model, const EncoderPass& enc, const EntityRows& entities,
                   std::span<const DecoderFeed> feeds);

struct StepScores {
  std::vector<double> vocab;
  std::vector<double> ocr;
};

struct StepChoice {
  enum class Kind { vocab, ocr };
  Kind kind = Kind::vocab;
  std::size_t index = 0;
  double score = 0.0;
  std::string word;
};

struct DecodedAnswer {
  std::vector<StepChoice> steps;
  std::string text;
  /// [layer][head] over every position (entities then decoder rows) of the
  /// final decoding pass.
  AttentionStack attention;
  std::size_t objects = 0;
  std::size_t ocr = 0;
  std::size_t questions = 0;

  std::size_t entities() const { return objects + ocr + questions; }
};

/// Greedy argmax over concat(vocab scores, OCR scores) for at most
/// cfg.max_steps steps, stopping after the end token. Ties resolve to the
/// lowest index, vocabulary first.
DecodedAnswer decode_greedy(const QARecord& record, Model& model);

/// Scores for an explicit list of decoder feeds (teacher forcing).
std::vector<StepScores> teacher_forced_scores(const QARecord& record, Model& model,
                                              std::span<const DecoderFeed> feeds);

struct EncodedEntities {
  Tensor states;
  AttentionStack attention;
};

/// Inference-only entity pass over an already assembled sequence.
EncodedEntities encode_sequence(Model& model, const EntitySequence& entities);

}  // namespace uvqa
