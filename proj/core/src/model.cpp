#include "uvqa/model.hpp"

#include "uvqa/errors.hpp"
#include "uvqa/rng.hpp"

namespace uvqa {

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("model config: " + m); };
  if (d < 2) fail("d must be at least 2");
  if (heads == 0 || d % heads != 0) fail("d (" + std::to_string(d) + ") must be divisible by heads (" + std::to_string(heads) + ")");
  if (max_steps == 0) fail("max_steps must be at least 1");
  if (ffn == 0) fail("ffn must be positive");
  if (max_question == 0) fail("max_question must be positive");
  if (object_dim == 0 || word_dim == 0 || appearance_dim == 0) fail("feature dims must be positive");
  if (vocab_size < 3) fail("answer vocabulary must include the three specials");
  if (question_vocab_size < 1) fail("question vocabulary must include the unknown row");
}

Parameter& ParameterStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ValidationError("duplicate parameter " + name);
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter " + name);
  return *params_[it->second];
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter " + name);
  return *params_[it->second];
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::coordinate_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

namespace {

constexpr double kInitScale = 0.05;

class Builder {
 public:
  Builder(ParameterStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Parameter* weight(const std::string& name, std::size_t rows, std::size_t cols) {
    return &store_.add(name, Tensor::uniform({rows, cols}, rng_, -kInitScale, kInitScale));
  }
  Parameter* vec(const std::string& name, std::size_t n) {
    return &store_.add(name, Tensor::uniform({n}, rng_, -kInitScale, kInitScale));
  }
  Parameter* zeros(const std::string& name, std::size_t n) { return &store_.add(name, Tensor({n}, 0.0)); }
  LayerNormParams norm(const std::string& name, std::size_t n) {
    return {&store_.add(name + ".gain", Tensor({n}, 1.0)), &store_.add(name + ".bias", Tensor({n}, 0.0))};
  }

 private:
  ParameterStore& store_;
  Rng rng_;
};

}  // namespace

Model::Model(ModelConfig config, AnswerVocabulary answers, WordVocabulary questions, std::uint64_t seed)
    : config_(config), answers_(std::move(answers)), questions_(std::move(questions)) {
  config_.vocab_size = answers_.size();
  config_.question_vocab_size = questions_.size();
  config_.validate();
  const std::size_t d = config_.d;
  Builder b(store_, seed);

  auto& e = embedder_;
  e.w_obj = b.weight("embed.w_obj", config_.object_dim, d);
  e.w_box = b.weight("embed.w_box", 4, d);
  e.w_ft = b.weight("embed.w_ft", config_.word_dim, d);
  e.w_ap = b.weight("embed.w_ap", config_.appearance_dim, d);
  e.word_table = b.weight("embed.word_table", config_.question_vocab_size, d);
  e.pos_table = b.weight("embed.pos_table", config_.max_question, d);
  e.obj_feature_norm = b.norm("embed.obj_feature_norm", d);
  e.obj_box_norm = b.norm("embed.obj_box_norm", d);
  e.ocr_feature_norm = b.norm("embed.ocr_feature_norm", d);
  e.ocr_box_norm = b.norm("embed.ocr_box_norm", d);
  e.type_object = b.vec("embed.type_object", d);
  e.type_ocr = b.vec("embed.type_ocr", d);
  e.type_question = b.vec("embed.type_question", d);

  auto& f = fusion_;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    TransformerLayerParams lp;
    lp.attn_norm = b.norm(p + "attn_norm", d);
    lp.w_qkv = b.weight(p + "w_qkv", d, 3 * d);
    lp.b_q = b.zeros(p + "b_q", d);
    lp.b_v = b.zeros(p + "b_v", d);
    lp.w_out = b.weight(p + "w_out", d, d);
    lp.b_out = b.zeros(p + "b_out", d);
    lp.ffn_norm = b.norm(p + "ffn_norm", d);
    lp.w_ff1 = b.weight(p + "w_ff1", d, config_.ffn);
    lp.b_ff1 = b.zeros(p + "b_ff1", config_.ffn);
    lp.w_ff2 = b.weight(p + "w_ff2", config_.ffn, d);
    lp.b_ff2 = b.zeros(p + "b_ff2", d);
    f.layers.push_back(lp);
  }
  f.answer_embed = b.weight("decoder.answer_embed", config_.vocab_size, d);
  f.step_table = b.weight("decoder.step_table", config_.max_steps, d);
  f.w_vocab = b.weight("head.w_vocab", d, config_.vocab_size);
  f.b_vocab = b.zeros("head.b_vocab", config_.vocab_size);
  f.w_ptr_query = b.weight("head.w_ptr_query", d, d);
  f.b_ptr_query = b.zeros("head.b_ptr_query", d);
  f.w_ptr_key = b.weight("head.w_ptr_key", d, d);
  f.b_ptr_key = b.zeros("head.b_ptr_key", d);
}

void Model::set_layers_for_testing(std::size_t layers) {
  if (layers > fusion_.layers.size()) throw ValidationError("cannot add layers to an existing model");
  config_.layers = layers;
  fusion_.layers.resize(layers);
}

}  // namespace uvqa
