#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uvqa/autograd.hpp"
#include "uvqa/dataset.hpp"
#include "uvqa/fusion.hpp"
#include "uvqa/model.hpp"

namespace uvqa {

/// Most frequent normalized reference answer; ties go to the
/// lexicographically smallest.
std::string select_target_answer(const std::vector<std::string>& answers);

/// Supervision for one decoding step. Every valid realization of the target
/// word is positive: its vocabulary id and every OCR position whose lowercased
/// text equals it. A word found in neither marks the unknown token.
struct StepTarget {
  std::string word;
  std::vector<std::size_t> vocab_positive;
  std::vector<std::size_t> ocr_positive;
  /// What the next step consumes under teacher forcing.
  DecoderFeed feed_next;

  /// 0/1 row over concat(vocab, ocr).
  Tensor as_row(std::size_t vocab_size, std::size_t ocr_count) const;
};

/// Target words (truncated to max_steps - 1) followed by the end token.
std::vector<StepTarget> build_targets(const QARecord& record, const AnswerVocabulary& vocab, std::size_t max_steps,
                                      std::size_t ocr_count);

/// Teacher-forced loss of one record: multi-label binary cross-entropy summed
/// over concat(vocab, ocr) scores and averaged over steps.
Var record_loss(Graph& g, const QARecord& record, Model& model);

/// Adaptive-moment update with decoupled weight decay.
struct AdamWConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update from the accumulated Parameter::grad values.
  void step(std::span<Parameter* const> params);
  std::size_t steps_taken() const noexcept { return t_; }
  const AdamWConfig& config() const noexcept { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// One optimizer step on the mean record loss of the batch. Records are
/// processed in the given order, so the update is deterministic. Returns the
/// mean loss before the update.
double train_step(std::span<const QARecord* const> batch, Model& model, AdamW& optimizer);

/// Loss without touching gradients.
double evaluate_loss(const QARecord& record, Model& model);

struct TrainOptions {
  std::size_t iterations = 24000;
  std::size_t batch_size = 64;
  AdamWConfig optimizer;
  std::uint64_t seed = 0;
  std::size_t log_every = 0;  // 0 disables progress callbacks
};

struct TrainProgress {
  std::size_t iteration = 0;
  double loss = 0.0;
};

/// Epoch-shuffled minibatch loop (shuffle seeded from opts.seed). The
/// callback runs every log_every iterations and after the last one.
void train(Model& model, const std::vector<QARecord>& records, const TrainOptions& opts,
           const std::function<void(const TrainProgress&)>& on_progress = {});

}  // namespace uvqa
