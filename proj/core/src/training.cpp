#include "uvqa/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "uvqa/embedder.hpp"
#include "uvqa/errors.hpp"
#include "uvqa/rng.hpp"
#include "uvqa/text.hpp"

namespace uvqa {

std::string select_target_answer(const std::vector<std::string>& answers) {
  std::map<std::string, std::size_t> counts;
  for (const auto& a : answers) ++counts[normalize_answer(a)];
  std::string best;
  std::size_t best_count = 0;
  for (const auto& [a, c] : counts) {
    if (c > best_count) {
      best = a;
      best_count = c;
    }
  }
  return best;
}

Tensor StepTarget::as_row(std::size_t vocab_size, std::size_t ocr_count) const {
  Tensor row({1, vocab_size + ocr_count});
  for (auto i : vocab_positive) row[i] = 1.0;
  for (auto i : ocr_positive) row[vocab_size + i] = 1.0;
  return row;
}

std::vector<StepTarget> build_targets(const QARecord& record, const AnswerVocabulary& vocab, std::size_t max_steps,
                                      std::size_t ocr_count) {
  if (max_steps == 0) throw ValidationError("build_targets: max_steps must be positive");
  auto words = split_whitespace(select_target_answer(record.answers));
  if (words.size() > max_steps - 1) words.resize(max_steps - 1);

  const std::size_t n_ocr = std::min(ocr_count, record.ocr.size());
  std::vector<std::string> ocr_lower;
  for (std::size_t i = 0; i < n_ocr; ++i) ocr_lower.push_back(to_lower(record.ocr[i].text));

  std::vector<StepTarget> targets;
  for (const auto& w : words) {
    StepTarget t;
    t.word = w;
    if (auto id = vocab.lookup(w)) t.vocab_positive.push_back(*id);
    for (std::size_t i = 0; i < n_ocr; ++i)
      if (ocr_lower[i] == w) t.ocr_positive.push_back(i);
    if (t.vocab_positive.empty() && t.ocr_positive.empty()) t.vocab_positive.push_back(AnswerVocabulary::kUnknown);
    t.feed_next = t.ocr_positive.empty() ? DecoderFeed::vocab(t.vocab_positive.front())
                                         : DecoderFeed::ocr(t.ocr_positive.front());
    targets.push_back(std::move(t));
  }
  StepTarget end;
  end.word = vocab.token(AnswerVocabulary::kEnd);
  end.vocab_positive.push_back(AnswerVocabulary::kEnd);
  targets.push_back(std::move(end));
  return targets;
}

Var record_loss(Graph& g, const QARecord& record, Model& model) {
  const auto& cfg = model.config();
  const EntityRows entities = embed_record(g, record, model);
  const EncoderPass enc = encode(g, model, entities.rows);
  const auto targets = build_targets(record, model.answers(), cfg.max_steps, entities.ocr);

  std::vector<DecoderFeed> feeds{DecoderFeed::begin()};
  for (std::size_t t = 0; t + 1 < targets.size(); ++t) feeds.push_back(targets[t].feed_next);

  const DecoderPass pass = decode_rows(g, model, enc, decoder_inputs(g, model, enc, entities, feeds));
  Var scores = vocab_scores(g, model, pass.states);
  if (entities.ocr > 0) {
    const Var ocr_states = g.slice_rows(enc.states, entities.objects, entities.ocr);
    const std::array<Var, 2> parts{scores, pointer_scores(g, model.fusion(), pass.states, ocr_states)};
    scores = g.concat_cols(parts);
  }
  const std::size_t width = cfg.vocab_size + entities.ocr;
  Tensor labels({targets.size(), width});
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Tensor row = targets[t].as_row(cfg.vocab_size, entities.ocr);
    std::copy(row.values().begin(), row.values().end(), labels.row(t).begin());
  }
  return g.scale(g.bce_with_logits(scores, std::move(labels)), 1.0 / static_cast<double>(targets.size()));
}

void AdamW::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw ValidationError("AdamW: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gr = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gr;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gr * gr;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.epsilon) + cfg_.weight_decay * p.value[i]);
    }
  }
}

double train_step(std::span<const QARecord* const> batch, Model& model, AdamW& optimizer) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");
  model.store().zero_grad();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const QARecord* rec : batch) {
    Graph g;
    const Var loss = g.scale(record_loss(g, *rec, model), inv_n);
    total += g.value(loss)[0];
    g.backward(loss);
  }
  auto params = model.store().all();
  optimizer.step(params);
  return total;
}

double evaluate_loss(const QARecord& record, Model& model) {
  Graph g(Graph::Mode::inference);
  return g.value(record_loss(g, record, model))[0];
}

void train(Model& model, const std::vector<QARecord>& records, const TrainOptions& opts,
           const std::function<void(const TrainProgress&)>& on_progress) {
  if (records.empty()) throw ValidationError("train: no training records");
  if (opts.batch_size == 0) throw ValidationError("train: batch size must be positive");
  AdamW optimizer(opts.optimizer);
  Rng rng(opts.seed ^ 0x7EA1ULL);
  std::vector<std::size_t> order(records.size());
  std::size_t cursor = order.size();
  std::vector<const QARecord*> batch;
  for (std::size_t it = 1; it <= opts.iterations; ++it) {
    batch.clear();
    while (batch.size() < opts.batch_size) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      batch.push_back(&records[order[cursor++]]);
    }
    const double loss = train_step(batch, model, optimizer);
    if (on_progress && ((opts.log_every && it % opts.log_every == 0) || it == opts.iterations)) {
      on_progress({it, loss});
    }
  }
}

}  // namespace uvqa
