#include "uvqa/fusion.hpp"

#include <array>
#include <cmath>
#include <optional>

#include "uvqa/errors.hpp"
#include "uvqa/text.hpp"

namespace uvqa {

namespace {

Var norm(Graph& g, Var x, const LayerNormParams& ln) { return g.layer_norm(x, g.param(*ln.gain), g.param(*ln.bias)); }

Var linear(Graph& g, Var x, Parameter* w, Parameter* b) { return g.add_row(g.matmul(x, g.param(*w)), g.param(*b)); }

Var feed_forward(Graph& g, const TransformerLayerParams& lp, Var x) {
  const Var hidden = g.gelu(linear(g, norm(g, x, lp.ffn_norm), lp.w_ff1, lp.b_ff1));
  return g.add(x, linear(g, hidden, lp.w_ff2, lp.b_ff2));
}

struct HeadProjections {
  Var q, k, v;
};

HeadProjections head_projections(Graph& g, const TransformerLayerParams& lp, Var qkv, std::size_t h, std::size_t d,
                                 std::size_t dh) {
  return {g.add_row(g.slice_cols(qkv, h * dh, dh), g.slice_cols(g.param(*lp.b_q), h * dh, dh)),
          g.slice_cols(qkv, d + h * dh, dh),
          g.add_row(g.slice_cols(qkv, 2 * d + h * dh, dh), g.slice_cols(g.param(*lp.b_v), h * dh, dh))};
}

std::shared_ptr<const Mask> causal_decoder_mask(std::size_t decoder_rows, std::size_t entity_rows) {
  const std::size_t cols = entity_rows + decoder_rows;
  auto mask = std::make_shared<Mask>(decoder_rows * cols, 0);
  for (std::size_t t = 0; t < decoder_rows; ++t)
    for (std::size_t j = 0; j < entity_rows + t + 1; ++j) (*mask)[t * cols + j] = 1;
  return mask;
}

}  // namespace

EncoderPass encode(Graph& g, Model& model, Var entities) {
  const auto& cfg = model.config();
  const std::size_t d = cfg.d, heads = cfg.heads, dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  if (g.value(entities).cols() != d) {
    throw DimensionError("encode: entity rows " + shape_string(g.value(entities).shape()) + " but d=" + std::to_string(d));
  }
  const std::size_t cap = cfg.max_objects + cfg.max_ocr + cfg.max_question;
  if (g.value(entities).rows() > cap) {
    throw ValidationError("encode: " + std::to_string(g.value(entities).rows()) + " entity rows exceed the cap of " +
                          std::to_string(cap));
  }

  EncoderPass pass;
  pass.rows = g.value(entities).rows();
  Var x = entities;
  for (const auto& lp : model.fusion().layers) {
    const Var qkv = g.matmul(norm(g, x, lp.attn_norm), g.param(*lp.w_qkv));
    std::vector<Var> heads_out, keys, values, attn;
    for (std::size_t h = 0; h < heads; ++h) {
      const auto [q, k, v] = head_projections(g, lp, qkv, h, d, dh);
      const Var p = g.softmax_rows(g.scale(g.matmul_nt(q, k), inv_sqrt));
      heads_out.push_back(g.matmul(p, v));
      keys.push_back(k);
      values.push_back(v);
      attn.push_back(p);
    }
    const Var mixed = heads == 1 ? heads_out[0] : g.concat_cols(heads_out);
    x = feed_forward(g, lp, g.add(x, linear(g, mixed, lp.w_out, lp.b_out)));
    pass.keys.push_back(std::move(keys));
    pass.values.push_back(std::move(values));
    pass.attention.push_back(std::move(attn));
  }
  pass.states = x;
  return pass;
}

DecoderPass decode_rows(Graph& g, Model& model, const EncoderPass& enc, Var decoder_inputs) {
  const auto& cfg = model.config();
  const std::size_t d = cfg.d, heads = cfg.heads, dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t steps = g.value(decoder_inputs).rows();
  if (g.value(decoder_inputs).cols() != d) {
    throw DimensionError("decode_rows: decoder rows " + shape_string(g.value(decoder_inputs).shape()) +
                         " but d=" + std::to_string(d));
  }
  if (steps > cfg.max_steps) throw ValidationError("decode_rows: more decoder rows than max_steps");
  const auto mask = causal_decoder_mask(steps, enc.rows);

  DecoderPass pass;
  Var y = decoder_inputs;
  for (std::size_t l = 0; l < model.fusion().layers.size(); ++l) {
    const auto& lp = model.fusion().layers[l];
    const Var qkv = g.matmul(norm(g, y, lp.attn_norm), g.param(*lp.w_qkv));
    std::vector<Var> heads_out, attn;
    for (std::size_t h = 0; h < heads; ++h) {
      const auto [q, k, v] = head_projections(g, lp, qkv, h, d, dh);
      const std::array<Var, 2> logit_parts{g.matmul_nt(q, enc.keys[l][h]), g.matmul_nt(q, k)};
      const Var p = g.softmax_rows(g.scale(g.concat_cols(logit_parts), inv_sqrt), mask);
      const std::array<Var, 2> value_parts{enc.values[l][h], v};
      heads_out.push_back(g.matmul(p, g.concat_rows(value_parts)));
      attn.push_back(p);
    }
    const Var mixed = heads == 1 ? heads_out[0] : g.concat_cols(heads_out);
    y = feed_forward(g, lp, g.add(y, linear(g, mixed, lp.w_out, lp.b_out)));
    pass.attention.push_back(std::move(attn));
  }
  pass.states = y;
  return pass;
}

Var vocab_scores(Graph& g, Model& model, Var decoder_states) {
  auto& f = model.fusion();
  return linear(g, decoder_states, f.w_vocab, f.b_vocab);
}

Var pointer_scores(Graph& g, FusionParams& params, Var decoder_states, Var ocr_states) {
  const std::size_t d = g.value(decoder_states).cols();
  if (g.value(ocr_states).cols() != d) {
    throw DimensionError("pointer_scores: decoder " + shape_string(g.value(decoder_states).shape()) + " vs ocr " +
                         shape_string(g.value(ocr_states).shape()));
  }
  const Var query = linear(g, decoder_states, params.w_ptr_query, params.b_ptr_query);
  const Var key = linear(g, ocr_states, params.w_ptr_key, params.b_ptr_key);
  return g.scale(g.matmul_nt(query, key), 1.0 / std::sqrt(static_cast<double>(d)));
}

Var decoder_inputs(Graph& g, Model& model, const EncoderPass& enc, const EntityRows& entities,
                   std::span<const DecoderFeed> feeds) {
  if (feeds.empty()) throw ValidationError("decoder_inputs: at least one feed required");
  auto& f = model.fusion();
  const Var answer_table = g.param(*f.answer_embed);
  std::vector<Var> rows;
  rows.reserve(feeds.size());
  for (const auto& feed : feeds) {
    switch (feed.kind) {
      case DecoderFeed::Kind::begin:
        rows.push_back(g.gather_rows(answer_table, {AnswerVocabulary::kBegin}));
        break;
      case DecoderFeed::Kind::vocab:
        rows.push_back(g.gather_rows(answer_table, {feed.index}));
        break;
      case DecoderFeed::Kind::ocr:
        if (feed.index >= entities.ocr) throw ValidationError("decoder_inputs: OCR feed index out of range");
        rows.push_back(g.slice_rows(enc.states, entities.objects + feed.index, 1));
        break;
    }
  }
  std::vector<std::size_t> steps(feeds.size());
  for (std::size_t t = 0; t < steps.size(); ++t) steps[t] = t;
  const Var base = rows.size() == 1 ? rows[0] : g.concat_rows(rows);
  return g.add(base, g.gather_rows(g.param(*f.step_table), std::move(steps)));
}

namespace {

struct StepOutputs {
  Var vocab;
  std::optional<Var> ocr;
  DecoderPass pass;
};

StepOutputs run_steps(Graph& g, Model& model, const EncoderPass& enc, const EntityRows& entities,
                      std::span<const DecoderFeed> feeds) {
  StepOutputs out;
  out.pass = decode_rows(g, model, enc, decoder_inputs(g, model, enc, entities, feeds));
  out.vocab = vocab_scores(g, model, out.pass.states);
  if (entities.ocr > 0) {
    out.ocr = pointer_scores(g, model.fusion(), out.pass.states, g.slice_rows(enc.states, entities.objects, entities.ocr));
  }
  return out;
}

StepScores scores_at(const Graph& g, const StepOutputs& o, std::size_t t) {
  StepScores s;
  const auto v = g.value(o.vocab).row(t);
  s.vocab.assign(v.begin(), v.end());
  if (o.ocr) {
    const auto p = g.value(*o.ocr).row(t);
    s.ocr.assign(p.begin(), p.end());
  }
  return s;
}

}  // namespace

DecodedAnswer decode_greedy(const QARecord& record, Model& model) {
  const auto& cfg = model.config();
  Graph g(Graph::Mode::inference);
  const EntityRows entities = embed_record(g, record, model);
  const EncoderPass enc = encode(g, model, entities.rows);

  DecodedAnswer answer;
  answer.objects = entities.objects;
  answer.ocr = entities.ocr;
  answer.questions = entities.questions;

  std::vector<DecoderFeed> feeds{DecoderFeed::begin()};
  std::vector<std::string> words;
  DecoderPass last_pass;
  for (std::size_t t = 0; t < cfg.max_steps; ++t) {
    const StepOutputs out = run_steps(g, model, enc, entities, feeds);
    last_pass = out.pass;
    const StepScores s = scores_at(g, out, t);

    StepChoice choice;
    choice.score = s.vocab[0];
    for (std::size_t i = 1; i < s.vocab.size(); ++i)
      if (s.vocab[i] > choice.score) choice = {StepChoice::Kind::vocab, i, s.vocab[i], {}};
    for (std::size_t i = 0; i < s.ocr.size(); ++i)
      if (s.ocr[i] > choice.score) choice = {StepChoice::Kind::ocr, i, s.ocr[i], {}};

    if (choice.kind == StepChoice::Kind::ocr) {
      choice.word = record.ocr[choice.index].text;
    } else {
      choice.word = model.answers().token(choice.index);
    }
    answer.steps.push_back(choice);
    if (choice.kind == StepChoice::Kind::vocab && choice.index == AnswerVocabulary::kEnd) break;
    words.push_back(choice.word);
    if (t + 1 < cfg.max_steps) {
      feeds.push_back(choice.kind == StepChoice::Kind::ocr ? DecoderFeed::ocr(choice.index)
                                                            : DecoderFeed::vocab(choice.index));
    }
  }
  answer.text = join(words);

  // Full attention over every position: entity rows never see decoder rows.
  const std::size_t n_ent = enc.rows;
  const std::size_t n_dec = g.value(last_pass.states).rows();
  const std::size_t total = n_ent + n_dec;
  for (std::size_t l = 0; l < enc.attention.size(); ++l) {
    std::vector<Tensor> per_head;
    for (std::size_t h = 0; h < enc.attention[l].size(); ++h) {
      Tensor full({total, total});
      const Tensor& ea = g.value(enc.attention[l][h]);
      for (std::size_t i = 0; i < n_ent; ++i)
        for (std::size_t j = 0; j < n_ent; ++j) full(i, j) = ea(i, j);
      const Tensor& da = g.value(last_pass.attention[l][h]);
      for (std::size_t i = 0; i < n_dec; ++i)
        for (std::size_t j = 0; j < total; ++j) full(n_ent + i, j) = da(i, j);
      per_head.push_back(std::move(full));
    }
    answer.attention.push_back(std::move(per_head));
  }
  return answer;
}

std::vector<StepScores> teacher_forced_scores(const QARecord& record, Model& model,
                                              std::span<const DecoderFeed> feeds) {
  Graph g(Graph::Mode::inference);
  const EntityRows entities = embed_record(g, record, model);
  const EncoderPass enc = encode(g, model, entities.rows);
  const StepOutputs out = run_steps(g, model, enc, entities, feeds);
  std::vector<StepScores> scores;
  for (std::size_t t = 0; t < feeds.size(); ++t) scores.push_back(scores_at(g, out, t));
  return scores;
}

EncodedEntities encode_sequence(Model& model, const EntitySequence& entities) {
  Graph g(Graph::Mode::inference);
  const EncoderPass pass = encode(g, model, g.constant(entities.matrix));
  EncodedEntities out;
  out.states = g.value(pass.states);
  for (const auto& layer : pass.attention) {
    std::vector<Tensor> heads;
    for (Var v : layer) heads.push_back(g.value(v));
    out.attention.push_back(std::move(heads));
  }
  return out;
}

}  // namespace uvqa
