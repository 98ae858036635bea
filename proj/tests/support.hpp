#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <initializer_list>
#include <string>
#include <vector>

#include "uvqa/dataset.hpp"
#include "uvqa/model.hpp"
#include "uvqa/rng.hpp"
#include "uvqa/vocabulary.hpp"

namespace uvqa::test {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(UVQA_FIXTURE_DIR) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("uvqa-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::vector<std::string> ten(const std::string& a) { return std::vector<std::string>(10, a); }

inline OcrToken token(const std::string& text, BBox box, std::optional<std::vector<double>> appearance = {}) {
  OcrToken t;
  t.text = text;
  t.bbox = box;
  t.appearance = std::move(appearance);
  return t;
}

inline QARecord record(const std::string& id, Source source, const std::string& question,
                       std::vector<std::string> answers, std::vector<OcrToken> ocr = {},
                       std::vector<ObjectEntity> objects = {}) {
  QARecord r;
  r.id = id;
  r.source = source;
  r.image_id = "img-" + id;
  r.image_size = {640, 480};
  r.question = question;
  r.answers = std::move(answers);
  r.ocr = std::move(ocr);
  r.objects = std::move(objects);
  r.split = Split::train;
  return r;
}

/// Record with `n_obj` objects and OCR tokens named by `words`, features drawn
/// from rng, matching the tiny model dims below.
inline QARecord random_record(Rng& rng, const std::string& id, std::size_t n_obj, std::vector<std::string> words,
                              const std::string& question, const std::string& answer, std::size_t object_dim = 4,
                              std::size_t appearance_dim = 3) {
  std::vector<OcrToken> ocr;
  for (const auto& w : words) {
    const double x = rng.uniform(0.0, 0.5), y = rng.uniform(0.0, 0.5);
    std::vector<double> ap(appearance_dim);
    for (auto& v : ap) v = rng.uniform(-1.0, 1.0);
    ocr.push_back(token(w, {x, y, x + rng.uniform(0.05, 0.5), y + rng.uniform(0.05, 0.5)}, std::move(ap)));
  }
  std::vector<ObjectEntity> objects;
  for (std::size_t j = 0; j < n_obj; ++j) {
    ObjectEntity o;
    for (std::size_t k = 0; k < object_dim; ++k) o.feature.push_back(rng.uniform(-1.0, 1.0));
    const double x = rng.uniform(0.0, 0.5), y = rng.uniform(0.0, 0.5);
    o.bbox = {x, y, x + rng.uniform(0.05, 0.5), y + rng.uniform(0.05, 0.5)};
    objects.push_back(std::move(o));
  }
  return record(id, Source::synthetic, question, ten(answer), std::move(ocr), std::move(objects));
}

inline ModelConfig tiny_config(std::size_t d = 8, std::size_t layers = 1, std::size_t heads = 2) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.layers = layers;
  cfg.heads = heads;
  cfg.ffn = 2 * d;
  cfg.max_steps = 4;
  cfg.object_dim = 4;
  cfg.word_dim = 5;
  cfg.appearance_dim = 3;
  return cfg;
}

inline Model tiny_model(std::uint64_t seed, ModelConfig cfg = tiny_config(),
                        std::vector<std::string> answers = {"stop", "go", "left", "exit"},
                        std::vector<std::string> questions = {"what", "is", "the", "sign"}) {
  return Model(cfg, AnswerVocabulary(answers), WordVocabulary(questions), seed);
}

}  // namespace uvqa::test
