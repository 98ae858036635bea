#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "uvqa/tensor.hpp"
#include "uvqa/vocabulary.hpp"

namespace uvqa {

struct ModelConfig {
  std::size_t d = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn = 256;
  std::size_t max_steps = 12;
  std::size_t max_ocr = 50;
  std::size_t max_objects = 100;
  std::size_t max_question = 20;
  std::size_t object_dim = 32;
  std::size_t word_dim = 32;
  std::size_t appearance_dim = 8;
  // Filled from the vocabularies when a model is created.
  std::size_t vocab_size = 0;
  std::size_t question_vocab_size = 0;

  /// Throws ValidationError (d % heads, T >= 1, d >= 2, ...).
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Owns every learnable array; iteration order is creation order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t coordinate_count() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

struct LayerNormParams {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;
};

struct EmbedderParams {
  Parameter* w_obj = nullptr;    // object_dim × d
  Parameter* w_box = nullptr;    // 4 × d, shared by objects and OCR tokens
  Parameter* w_ft = nullptr;     // word_dim × d
  Parameter* w_ap = nullptr;     // appearance_dim × d
  Parameter* word_table = nullptr;  // question_vocab_size × d
  Parameter* pos_table = nullptr;   // max_question × d
  LayerNormParams obj_feature_norm, obj_box_norm, ocr_feature_norm, ocr_box_norm;
  Parameter* type_object = nullptr;
  Parameter* type_ocr = nullptr;
  Parameter* type_question = nullptr;
};

struct TransformerLayerParams {
  LayerNormParams attn_norm;
  Parameter* w_qkv = nullptr;  // d × 3d
  // Query and value biases only: a key bias shifts every logit of a softmax
  // row equally, so it would be a parameter with identically zero gradient.
  Parameter* b_q = nullptr;
  Parameter* b_v = nullptr;
  Parameter* w_out = nullptr;  // d × d
  Parameter* b_out = nullptr;
  LayerNormParams ffn_norm;
  Parameter* w_ff1 = nullptr;  // d × ffn
  Parameter* b_ff1 = nullptr;
  Parameter* w_ff2 = nullptr;  // ffn × d
  Parameter* b_ff2 = nullptr;
};

struct FusionParams {
  std::vector<TransformerLayerParams> layers;
  Parameter* answer_embed = nullptr;  // vocab_size × d, decoder inputs for vocabulary tokens
  Parameter* step_table = nullptr;    // max_steps × d, decoder positions
  Parameter* w_vocab = nullptr;       // d × vocab_size
  Parameter* b_vocab = nullptr;
  Parameter* w_ptr_query = nullptr;   // d × d
  Parameter* b_ptr_query = nullptr;
  Parameter* w_ptr_key = nullptr;     // d × d
  Parameter* b_ptr_key = nullptr;
};

/// Embedder, shared encoder/decoder stack and output heads, plus the two
/// vocabularies that fix their sizes. Move-only: the typed views point into
/// the store.
class Model {
 public:
  /// Weights uniform in [-0.05, 0.05]; layer-norm gains 1; biases 0.
  Model(ModelConfig config, AnswerVocabulary answers, WordVocabulary questions, std::uint64_t seed);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  const AnswerVocabulary& answers() const noexcept { return answers_; }
  const WordVocabulary& questions() const noexcept { return questions_; }
  ParameterStore& store() noexcept { return store_; }
  const ParameterStore& store() const noexcept { return store_; }
  EmbedderParams& embedder() noexcept { return embedder_; }
  FusionParams& fusion() noexcept { return fusion_; }

  /// Mutable model configuration for test hooks (e.g. layers = 0). Changing
  /// sizes that parameters depend on is not supported.
  void set_layers_for_testing(std::size_t layers);

 private:
  ModelConfig config_;
  AnswerVocabulary answers_;
  WordVocabulary questions_;
  ParameterStore store_;
  EmbedderParams embedder_;
  FusionParams fusion_;
};

}  // namespace uvqa
