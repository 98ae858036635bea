#include "uvqa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "uvqa/errors.hpp"
#include "uvqa/text.hpp"

namespace uvqa {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Source s) {
  switch (s) {
    case Source::textvqa: return "textvqa";
    case Source::stvqa: return "stvqa";
    case Source::vqa: return "vqa";
    case Source::synthetic: return "synthetic";
  }
  return "unknown";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

std::optional<Source> parse_source(std::string_view s) {
  for (auto v : {Source::textvqa, Source::stvqa, Source::vqa, Source::synthetic})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  for (auto v : {Split::train, Split::val, Split::test})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

bool BBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && 0.0 <= x1 &&
         x1 <= x2 && x2 <= 1.0 && 0.0 <= y1 && y1 <= y2 && y2 <= 1.0;
}

namespace {

class FieldReader {
 public:
  FieldReader(const json& obj, std::string context, std::size_t line) : obj_(obj), ctx_(std::move(context)), line_(line) {}

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ParseError("field '" + ctx_ + field + "': " + what, line_);
  }

  const json& require(const std::string& field) const {
    auto it = obj_.find(field);
    if (it == obj_.end()) fail(field, "missing");
    return *it;
  }

  std::string string(const std::string& field) const {
    const json& v = require(field);
    if (!v.is_string()) fail(field, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const json& v, const std::string& field) const {
    if (!v.is_array()) fail(field, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) fail(field, "expected an array of numbers");
      const double d = x.get<double>();
      if (!std::isfinite(d)) fail(field, "non-finite value");
      out.push_back(d);
    }
    return out;
  }

  BBox bbox(const std::string& field) const {
    const auto v = numbers(require(field), field);
    if (v.size() != 4) fail(field, "expected 4 numbers (x1, y1, x2, y2)");
    BBox b{v[0], v[1], v[2], v[3]};
    if (b.x2 < b.x1 || b.y2 < b.y1) fail(field, "corner order violated (need x1 <= x2 and y1 <= y2)");
    if (!b.valid()) fail(field, "coordinates must be normalized to [0, 1]");
    return b;
  }

  std::optional<std::vector<double>> optional_numbers(const std::string& field) const {
    auto it = obj_.find(field);
    if (it == obj_.end() || it->is_null()) return std::nullopt;
    return numbers(*it, field);
  }

  void check_keys(std::initializer_list<std::string_view> allowed, ParseMode mode) const {
    if (mode != ParseMode::strict) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) fail(it.key(), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string ctx_;
  std::size_t line_;
};

}  // namespace

QARecord parse_record(std::string_view line, std::size_t line_number, ParseMode mode, const IngestCaps& caps) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line_number);
  }
  if (!doc.is_object()) throw ParseError("record must be a JSON object", line_number);

  FieldReader r(doc, "", line_number);
  r.check_keys({"id", "source", "image_id", "image_size", "question", "answers", "ocr", "objects", "split"}, mode);

  QARecord rec;
  rec.id = r.string("id");
  if (rec.id.empty()) r.fail("id", "must be nonempty");

  const auto source = parse_source(r.string("source"));
  if (!source) r.fail("source", "expected one of textvqa, stvqa, vqa, synthetic");
  rec.source = *source;
  rec.image_id = r.string("image_id");

  const json& size = r.require("image_size");
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() || !size[1].is_number_integer())
    r.fail("image_size", "expected [width, height] integers");
  rec.image_size = {size[0].get<int>(), size[1].get<int>()};
  if (rec.image_size.width <= 0 || rec.image_size.height <= 0) r.fail("image_size", "must be positive");

  rec.question = r.string("question");
  if (trim(rec.question).empty()) r.fail("question", "must be nonempty");

  const json& answers = r.require("answers");
  if (!answers.is_array()) r.fail("answers", "expected an array of strings");
  for (const auto& a : answers) {
    if (!a.is_string()) r.fail("answers", "expected an array of strings");
    rec.answers.push_back(a.get<std::string>());
  }
  if (rec.answers.empty()) r.fail("answers", "at least one answer required");
  if (rec.answers.size() > kAnswersPerRecord) r.fail("answers", "at most 10 answers allowed");
  for (std::size_t i = 0; rec.answers.size() < kAnswersPerRecord; ++i) rec.answers.push_back(rec.answers[i]);

  const json& ocr = r.require("ocr");
  if (!ocr.is_array()) r.fail("ocr", "expected an array");
  for (std::size_t i = 0; i < ocr.size() && rec.ocr.size() < caps.max_ocr; ++i) {
    if (!ocr[i].is_object()) r.fail("ocr", "entries must be objects");
    FieldReader t(ocr[i], "ocr[" + std::to_string(i) + "].", line_number);
    t.check_keys({"text", "bbox", "word_vec", "appearance"}, mode);
    OcrToken tok;
    tok.text = t.string("text");
    if (tok.text.empty()) t.fail("text", "must be nonempty");
    tok.bbox = t.bbox("bbox");
    tok.word_vec = t.optional_numbers("word_vec");
    tok.appearance = t.optional_numbers("appearance");
    rec.ocr.push_back(std::move(tok));
  }

  const json& objects = r.require("objects");
  if (!objects.is_array()) r.fail("objects", "expected an array");
  for (std::size_t i = 0; i < objects.size() && rec.objects.size() < caps.max_objects; ++i) {
    if (!objects[i].is_object()) r.fail("objects", "entries must be objects");
    FieldReader o(objects[i], "objects[" + std::to_string(i) + "].", line_number);
    o.check_keys({"feature", "bbox"}, mode);
    ObjectEntity obj;
    obj.feature = o.numbers(o.require("feature"), "feature");
    obj.bbox = o.bbox("bbox");
    rec.objects.push_back(std::move(obj));
  }

  const auto split = parse_split(r.string("split"));
  if (!split) r.fail("split", "expected one of train, val, test");
  rec.split = *split;
  return rec;
}

std::string to_json_line(const QARecord& rec) {
  ordered_json j;
  j["id"] = rec.id;
  j["source"] = std::string(to_string(rec.source));
  j["image_id"] = rec.image_id;
  j["image_size"] = {rec.image_size.width, rec.image_size.height};
  j["question"] = rec.question;
  j["answers"] = rec.answers;
  ordered_json ocr = ordered_json::array();
  for (const auto& t : rec.ocr) {
    ordered_json o;
    o["text"] = t.text;
    o["bbox"] = t.bbox.as_array();
    if (t.word_vec) o["word_vec"] = *t.word_vec;
    if (t.appearance) o["appearance"] = *t.appearance;
    ocr.push_back(std::move(o));
  }
  j["ocr"] = std::move(ocr);
  ordered_json objects = ordered_json::array();
  for (const auto& obj : rec.objects) {
    ordered_json o;
    o["feature"] = obj.feature;
    o["bbox"] = obj.bbox.as_array();
    objects.push_back(std::move(o));
  }
  j["objects"] = std::move(objects);
  j["split"] = std::string(to_string(rec.split));
  return j.dump();
}

LoadResult load_records(const std::filesystem::path& path, ParseMode mode, const IngestCaps& caps) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read record file " + path.string());
  LoadResult result;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    try {
      result.records.push_back(parse_record(line, line_number, mode, caps));
    } catch (const ParseError& e) {
      if (mode == ParseMode::strict) throw;
      result.skipped.push_back({line_number, e.what()});
    }
  }
  if (in.bad()) throw IoError("error while reading " + path.string());
  return result;
}

void save_records(const std::filesystem::path& path, const std::vector<QARecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write record file " + path.string());
  for (const auto& r : records) out << to_json_line(r) << '\n';
  if (!out) throw IoError("error while writing " + path.string());
}

std::vector<QARecord> filter_has_text(std::vector<QARecord> records) {
  std::erase_if(records, [](const QARecord& r) {
    return std::none_of(r.ocr.begin(), r.ocr.end(), [](const OcrToken& t) { return !trim(t.text).empty(); });
  });
  return records;
}

std::map<Source, std::size_t> count_by_source(const std::vector<QARecord>& records) {
  std::map<Source, std::size_t> counts;
  for (const auto& r : records) ++counts[r.source];
  return counts;
}

UnionDataset make_dataset(std::vector<QARecord> records) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records)
    if (!seen.insert(r.id).second) throw ValidationError("duplicate record id " + r.id);
  UnionDataset ds;
  ds.counts_by_source = count_by_source(records);
  ds.records = std::move(records);
  return ds;
}

UnionBuild build_union(const std::vector<QARecord>& text_based, const std::vector<QARecord>& visual) {
  UnionBuild out;
  const auto visual_with_text = filter_has_text(visual);
  out.dropped_without_text = visual.size() - visual_with_text.size();

  std::unordered_set<std::string> seen;
  std::vector<QARecord> merged;
  merged.reserve(text_based.size() + visual_with_text.size());
  auto take = [&](const QARecord& r) {
    if (seen.insert(r.id).second) {
      merged.push_back(r);
    } else {
      out.duplicate_ids.push_back(r.id);
    }
  };
  for (const auto& r : text_based) take(r);
  for (const auto& r : visual_with_text) take(r);
  out.dataset = make_dataset(std::move(merged));
  return out;
}

std::vector<QARecord> select_split(const std::vector<QARecord>& records, Split split) {
  std::vector<QARecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [split](const QARecord& r) { return r.split == split; });
  return out;
}

std::map<std::string, RecordFeatures> load_feature_side_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read feature file " + path.string());
  std::map<std::string, RecordFeatures> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_number);
    }
    if (!doc.is_object()) throw ParseError("feature line must be a JSON object", line_number);
    FieldReader r(doc, "", line_number);
    r.check_keys({"id", "ocr", "question_vectors"}, ParseMode::strict);
    RecordFeatures f;
    if (auto it = doc.find("ocr"); it != doc.end()) {
      if (!it->is_array()) r.fail("ocr", "expected an array");
      for (std::size_t i = 0; i < it->size(); ++i) {
        FieldReader t((*it)[i], "ocr[" + std::to_string(i) + "].", line_number);
        t.check_keys({"index", "word_vec", "appearance"}, ParseMode::strict);
        const json& idx = t.require("index");
        if (!idx.is_number_unsigned() && !(idx.is_number_integer() && idx.get<long long>() >= 0))
          t.fail("index", "expected a nonnegative integer");
        const auto index = idx.get<std::size_t>();
        if (auto wv = t.optional_numbers("word_vec")) f.ocr_word_vecs[index] = std::move(*wv);
        if (auto ap = t.optional_numbers("appearance")) f.ocr_appearance[index] = std::move(*ap);
      }
    }
    if (auto it = doc.find("question_vectors"); it != doc.end()) {
      if (!it->is_array()) r.fail("question_vectors", "expected an array of arrays");
      std::vector<std::vector<double>> rows;
      for (const auto& row : *it) rows.push_back(r.numbers(row, "question_vectors"));
      f.question_vectors = std::move(rows);
    }
    out[r.string("id")] = std::move(f);
  }
  return out;
}

std::size_t apply_features(std::vector<QARecord>& records, const std::map<std::string, RecordFeatures>& features) {
  std::size_t applied = 0;
  for (auto& rec : records) {
    auto it = features.find(rec.id);
    if (it == features.end()) continue;
    const RecordFeatures& f = it->second;
    for (const auto& [i, v] : f.ocr_word_vecs)
      if (i < rec.ocr.size()) rec.ocr[i].word_vec = v;
    for (const auto& [i, v] : f.ocr_appearance)
      if (i < rec.ocr.size()) rec.ocr[i].appearance = v;
    if (f.question_vectors) rec.question_vectors = f.question_vectors;
    ++applied;
  }
  return applied;
}

}  // namespace uvqa
