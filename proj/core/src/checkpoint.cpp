#include "uvqa/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "uvqa/errors.hpp"

namespace uvqa {

namespace {

class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_ += s;
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw ValidationError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

constexpr std::size_t ModelConfig::*kConfigFields[] = {
    &ModelConfig::d,          &ModelConfig::layers,         &ModelConfig::heads,      &ModelConfig::ffn,
    &ModelConfig::max_steps,  &ModelConfig::max_ocr,        &ModelConfig::max_objects, &ModelConfig::max_question,
    &ModelConfig::object_dim, &ModelConfig::word_dim,       &ModelConfig::appearance_dim,
    &ModelConfig::vocab_size, &ModelConfig::question_vocab_size};

}  // namespace

std::string serialize_checkpoint(const Model& model) {
  Writer w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u64(kCheckpointVersion);
  for (auto field : kConfigFields) w.u64(model.config().*field);
  const auto answer_words = model.answers().words();
  w.u64(answer_words.size());
  for (const auto& s : answer_words) w.str(s);
  const auto question_words = model.questions().words();
  w.u64(question_words.size());
  for (const auto& s : question_words) w.str(s);
  const auto params = model.store().all();
  w.u64(params.size());
  for (const Parameter* p : params) {
    w.str(p->name);
    w.u64(p->value.rank());
    for (auto dim : p->value.shape()) w.u64(dim);
    for (double x : p->value.values()) w.f64(x);
  }
  return w.take();
}

Model deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic))
    throw ValidationError("not a checkpoint (bad magic)");
  if (const auto v = r.u64(); v != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint schema version " + std::to_string(v));
  ModelConfig cfg;
  for (auto field : kConfigFields) cfg.*field = r.u64();
  std::vector<std::string> answer_words(r.u64());
  for (auto& s : answer_words) s = r.str();
  std::vector<std::string> question_words(r.u64());
  for (auto& s : question_words) s = r.str();

  Model model(cfg, AnswerVocabulary(answer_words), WordVocabulary(question_words), 0);
  if (model.config() != cfg) throw ValidationError("checkpoint vocabulary sizes disagree with its config");

  const auto count = r.u64();
  if (count != model.store().size()) {
    throw ValidationError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                          std::to_string(model.store().size()));
  }
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = r.str();
    Parameter& p = model.store().at(name);
    std::vector<std::size_t> shape(r.u64());
    for (auto& dim : shape) dim = r.u64();
    if (shape != p.value.shape()) {
      throw ValidationError("checkpoint tensor " + name + " has shape " + shape_string(shape) + ", expected " +
                            shape_string(p.value.shape()));
    }
    for (auto& x : p.value.values()) x = r.f64();
  }
  if (!r.done()) throw ValidationError("trailing bytes after checkpoint tensors");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error while writing " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace uvqa
