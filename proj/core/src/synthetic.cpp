#include "uvqa/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>

#include "uvqa/errors.hpp"
#include "uvqa/rng.hpp"
#include "uvqa/text.hpp"

namespace uvqa {

namespace {

constexpr std::size_t kShapes = 4;
constexpr std::size_t kColours = 4;
constexpr ImageSize kImageSize{640, 480};

const std::array<std::string, 5> kPositions = {"left", "right", "top", "bottom", "middle"};

struct Cell {
  std::size_t col = 0;
  std::size_t row = 0;
};

struct Scene {
  std::vector<Cell> cells;
  std::vector<OcrToken> tokens;
  std::vector<ObjectEntity> objects;
  std::vector<std::size_t> shapes;
  std::size_t sign = 0;
};

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::string pad_index(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

Scene make_scene(const SynthConfig& cfg, Rng& rng) {
  Scene s;
  std::vector<Cell> all;
  for (std::size_t r = 0; r < cfg.grid_rows; ++r)
    for (std::size_t c = 0; c < cfg.grid_cols; ++c) all.push_back({c, r});
  shuffle(all, rng);
  const std::size_t n_tokens = std::min<std::size_t>(2 + rng.below(4), all.size());

  std::vector<std::string> words = token_lexicon();
  shuffle(words, rng);
  s.sign = rng.below(n_tokens);
  const double cw = 1.0 / static_cast<double>(cfg.grid_cols);
  const double ch = 1.0 / static_cast<double>(cfg.grid_rows);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    const Cell cell = all[i];
    s.cells.push_back(cell);
    OcrToken tok;
    tok.text = words[i];
    const double c = static_cast<double>(cell.col), r = static_cast<double>(cell.row);
    tok.bbox = {(c + 0.1) * cw, (r + 0.3) * ch, (c + 0.9) * cw, (r + 0.7) * ch};
    std::vector<double> appearance(cfg.appearance_dim);
    for (std::size_t k = 1; k < appearance.size(); ++k) appearance[k] = rng.uniform(-0.1, 0.1);
    appearance[0] = i == s.sign ? 1.0 : 0.0;
    tok.appearance = std::move(appearance);
    s.tokens.push_back(std::move(tok));
  }

  const std::size_t n_objects = 1 + rng.below(4);
  for (std::size_t j = 0; j < n_objects; ++j) {
    const std::size_t shape = rng.below(kShapes);
    const std::size_t colour = rng.below(kColours);
    ObjectEntity obj;
    obj.feature.resize(cfg.object_dim);
    for (auto& x : obj.feature) x = rng.uniform(-0.05, 0.05);
    obj.feature[shape] = 1.0;
    obj.feature[kShapes + colour] = 1.0;
    const double w = rng.uniform(0.05, 0.25), h = rng.uniform(0.05, 0.25);
    const double x1 = rng.uniform(0.0, 1.0 - w), y1 = rng.uniform(0.0, 1.0 - h);
    obj.bbox = {x1, y1, x1 + w, y1 + h};
    s.objects.push_back(std::move(obj));
    s.shapes.push_back(shape);
  }
  return s;
}

/// Token index answering "what is the <pos> token", if unique.
std::optional<std::size_t> token_at(const Scene& s, std::string_view pos, const SynthConfig& cfg) {
  auto key = [&](std::size_t i) -> double {
    const Cell c = s.cells[i];
    if (pos == "left") return static_cast<double>(c.col);
    if (pos == "right") return -static_cast<double>(c.col);
    if (pos == "top") return static_cast<double>(c.row);
    if (pos == "bottom") return -static_cast<double>(c.row);
    const double dx = static_cast<double>(2 * c.col + 1) - static_cast<double>(cfg.grid_cols);
    const double dy = static_cast<double>(2 * c.row + 1) - static_cast<double>(cfg.grid_rows);
    return dx * dx + dy * dy;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.cells.size(); ++i)
    if (key(i) < key(best)) best = i;
  for (std::size_t i = 0; i < s.cells.size(); ++i)
    if (i != best && key(i) == key(best)) return std::nullopt;
  return best;
}

std::vector<std::string> answerable_positions(const Scene& s, const SynthConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& p : kPositions)
    if (token_at(s, p, cfg)) out.push_back(p);
  return out;
}

QARecord base_record(const SynthConfig& cfg, const Scene& s, std::size_t scene_index, Split split) {
  QARecord r;
  r.source = cfg.source;
  r.image_id = cfg.id_prefix + "-img-" + pad_index(scene_index);
  r.image_size = kImageSize;
  r.ocr = s.tokens;
  r.objects = s.objects;
  r.split = split;
  return r;
}

void set_answer(QARecord& r, const std::string& answer) { r.answers.assign(kAnswersPerRecord, answer); }

}  // namespace

void SynthConfig::validate() const {
  if (scenes == 0) throw ValidationError("synthetic: scenes must be positive");
  if (grid_cols < 2 || grid_rows < 2) {
    throw ValidationError("synthetic: grid must be at least 2x2, got " + std::to_string(grid_cols) + "x" +
                          std::to_string(grid_rows));
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("synthetic: beta must lie in [0, 1]");
  if (!(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0))
    throw ValidationError("synthetic: split fractions must be nonnegative and sum below 1");
  if (!visual_questions && !text_questions && !look_and_read)
    throw ValidationError("synthetic: at least one question family must be enabled");
  if (object_dim < kShapes + kColours)
    throw ValidationError("synthetic: object_dim must be at least " + std::to_string(kShapes + kColours));
  if (appearance_dim < 1) throw ValidationError("synthetic: appearance_dim must be positive");
  if (id_prefix.empty()) throw ValidationError("synthetic: id_prefix must be nonempty");
}

const std::vector<std::string>& token_lexicon() {
  static const std::vector<std::string> words = {"open", "exit",  "cafe", "bank", "taxi", "hotel", "sale", "bus",
                                                 "park", "shop",  "bar",  "pizza", "west", "east",  "north", "gate",
                                                 "road", "club",  "mall", "zoo",  "inn",  "tea",   "gym",  "art"};
  return words;
}

const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names = {"circle", "square", "triangle", "star"};
  return names;
}

const std::vector<std::string>& count_words() {
  static const std::vector<std::string> words = {"one", "two", "three", "four"};
  return words;
}

UnionDataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng master(seed);
  std::vector<QARecord> records;
  for (std::size_t i = 0; i < cfg.scenes; ++i) {
    Rng rng = master.fork(i);
    Rng bias = master.fork(0xB1A5ULL + i);
    const Scene s = make_scene(cfg, rng);
    const double u = rng.uniform();
    const Split split = u < cfg.test_fraction                      ? Split::test
                        : u < cfg.test_fraction + cfg.val_fraction ? Split::val
                                                                   : Split::train;
    const std::string stem = cfg.id_prefix + "-" + pad_index(i);

    if (cfg.visual_questions) {
      QARecord r = base_record(cfg, s, i, split);
      const std::size_t shape = s.shapes[rng.below(s.shapes.size())];
      const auto count = static_cast<std::size_t>(std::count(s.shapes.begin(), s.shapes.end(), shape));
      r.id = stem + "-t1";
      r.question = "how many " + shape_names()[shape] + "s are there";
      set_answer(r, count_words()[count - 1]);
      records.push_back(std::move(r));
    }
    if (cfg.text_questions) {
      QARecord r = base_record(cfg, s, i, split);
      r.id = stem + "-t2";
      r.question = "what does the sign say";
      set_answer(r, s.tokens[s.sign].text);
      records.push_back(std::move(r));
    }
    const auto positions = answerable_positions(s, cfg);
    if (cfg.look_and_read && !positions.empty()) {
      QARecord r = base_record(cfg, s, i, split);
      const std::string& pos = positions[rng.below(positions.size())];
      r.id = stem + "-t3";
      r.question = "what is the " + pos + " token";
      std::string answer = s.tokens[*token_at(s, pos, cfg)].text;
      const bool biased = bias.uniform() < cfg.beta;
      if (split == Split::train && biased) answer = std::string(kDistractorAnswer);
      set_answer(r, answer);
      records.push_back(std::move(r));
    }
  }
  return make_dataset(std::move(records));
}

std::vector<QARecord> generate_t3_probe(const SynthConfig& cfg, std::uint64_t seed, std::size_t per_answer) {
  cfg.validate();
  if (per_answer == 0) throw ValidationError("probe: per_answer must be positive");
  const auto& lexicon = token_lexicon();
  Rng master(seed);
  std::vector<QARecord> records;
  const std::size_t total = per_answer * lexicon.size();
  for (std::size_t k = 0; k < total; ++k) {
    Rng rng = master.fork(k);
    Scene s = make_scene(cfg, rng);
    auto positions = answerable_positions(s, cfg);
    while (positions.empty()) {
      s = make_scene(cfg, rng);
      positions = answerable_positions(s, cfg);
    }
    const std::string& pos = positions[rng.below(positions.size())];
    const std::size_t target = *token_at(s, pos, cfg);
    const std::string& word = lexicon[k % lexicon.size()];
    for (auto& tok : s.tokens)
      if (tok.text == word) tok.text = s.tokens[target].text;
    s.tokens[target].text = word;

    QARecord r = base_record(cfg, s, k, Split::test);
    r.id = cfg.id_prefix + "-probe-" + pad_index(k) + "-t3";
    r.image_id = cfg.id_prefix + "-probe-img-" + pad_index(k);
    r.question = "what is the " + pos + " token";
    set_answer(r, word);
    records.push_back(std::move(r));
  }
  return records;
}

std::string question_template(const QARecord& record) {
  const auto words = normalize_words(record.question);
  if (words.size() >= 2 && words[0] == "how" && words[1] == "many") return "T1";
  if (words == std::vector<std::string>{"what", "does", "the", "sign", "say"}) return "T2";
  if (words.size() == 5 && words[0] == "what" && words[1] == "is" && words[2] == "the" && words[4] == "token" &&
      std::find(kPositions.begin(), kPositions.end(), words[3]) != kPositions.end())
    return "T3";
  return words.empty() ? "none" : words[0];
}

}  // namespace uvqa
