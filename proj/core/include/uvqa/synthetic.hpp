#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "uvqa/dataset.hpp"

namespace uvqa {

/// Look-and-read scene generator.
///
/// Every scene holds 2-5 text tokens in distinct cells of a grid (the bbox
/// encodes the cell) and 1-4 objects whose features one-hot encode a shape
/// and a colour. One record is emitted per enabled question family:
///
///   T1 visual only   "how many <shape>s are there"  -> count word
///   T2 text only     "what does the sign say"       -> token flagged by appearance[0] = 1
///   T3 look-and-read "what is the <pos> token"      -> token at that position
///
/// <pos> is one of left, right, top, bottom (extreme column or row) or middle
/// (closest to the image centre); only positions with a unique answer are
/// asked, and scenes with no such position get no T3 question. For
/// train-split T3 records a coin with probability `beta` replaces the answer
/// with the distractor "stop", which never appears as a token.
/// The bias coin uses its own stream, so changing beta leaves scenes intact.
struct SynthConfig {
  std::size_t scenes = 600;
  std::size_t grid_cols = 3;
  std::size_t grid_rows = 3;
  double beta = 0.0;
  bool visual_questions = true;   // T1
  bool text_questions = true;     // T2
  bool look_and_read = true;      // T3
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::size_t object_dim = 32;
  std::size_t appearance_dim = 8;
  Source source = Source::synthetic;
  std::string id_prefix = "syn";

  void validate() const;
};

inline constexpr std::string_view kDistractorAnswer = "stop";

/// Words that scene tokens are drawn from. Does not contain the distractor.
const std::vector<std::string>& token_lexicon();
const std::vector<std::string>& shape_names();
const std::vector<std::string>& count_words();

/// Deterministic in (cfg, seed). Throws ValidationError for an invalid cfg.
UnionDataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

/// Balanced T3 probe: every lexicon word is the answer of exactly
/// `per_answer` records. All records are in the test split and unbiased.
std::vector<QARecord> generate_t3_probe(const SynthConfig& cfg, std::uint64_t seed, std::size_t per_answer);

/// Template id of a record: "T1"/"T2"/"T3" for the generator's question
/// families, otherwise the first normalized question word (or "none").
std::string question_template(const QARecord& record);

}  // namespace uvqa
