#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uvqa {

enum class Source { textvqa, stvqa, vqa, synthetic };
enum class Split { train, val, test };

std::string_view to_string(Source s);
std::string_view to_string(Split s);
std::optional<Source> parse_source(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

/// Image-normalized box: 0 <= x1 <= x2 <= 1 and 0 <= y1 <= y2 <= 1.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  bool valid() const;
  std::array<double, 4> as_array() const { return {x1, y1, x2, y2}; }
  bool operator==(const BBox&) const = default;
};

struct OcrToken {
  std::string text;
  BBox bbox;
  std::optional<std::vector<double>> word_vec;
  std::optional<std::vector<double>> appearance;

  bool operator==(const OcrToken&) const = default;
};

struct ObjectEntity {
  std::vector<double> feature;
  BBox bbox;

  bool operator==(const ObjectEntity&) const = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;

  bool operator==(const ImageSize&) const = default;
};

inline constexpr std::size_t kAnswersPerRecord = 10;

struct QARecord {
  std::string id;
  Source source = Source::synthetic;
  std::string image_id;
  ImageSize image_size;
  std::string question;
  std::vector<std::string> answers;
  std::vector<OcrToken> ocr;
  std::vector<ObjectEntity> objects;
  Split split = Split::train;
  // Precomputed per-word question vectors from a feature side file. Never
  // part of the canonical record line.
  std::optional<std::vector<std::vector<double>>> question_vectors;

  bool operator==(const QARecord&) const = default;
};

struct UnionDataset {
  std::vector<QARecord> records;
  std::map<Source, std::size_t> counts_by_source;
};

/// Per-record caps applied at ingest, keeping the list-order prefix.
struct IngestCaps {
  std::size_t max_ocr = 50;
  std::size_t max_objects = 100;
};

enum class ParseMode { strict, lenient };

struct LineIssue {
  std::size_t line = 0;
  std::string message;
};

struct LoadResult {
  std::vector<QARecord> records;
  std::vector<LineIssue> skipped;
};

/// Parses one canonical record line. Throws ParseError naming the field.
/// Strict mode rejects unknown keys; lenient mode ignores them.
QARecord parse_record(std::string_view line, std::size_t line_number, ParseMode mode = ParseMode::strict,
                      const IngestCaps& caps = {});

/// Canonical single-line JSON; parse_record(to_json_line(r)) == r.
std::string to_json_line(const QARecord& record);

/// Reads one record per line. Blank lines are ignored. Strict mode throws on
/// the first malformed line; lenient mode skips it and reports it.
LoadResult load_records(const std::filesystem::path& path, ParseMode mode = ParseMode::strict,
                        const IngestCaps& caps = {});

void save_records(const std::filesystem::path& path, const std::vector<QARecord>& records);

/// Keeps records with at least one OCR token whose trimmed text is nonempty.
std::vector<QARecord> filter_has_text(std::vector<QARecord> records);

std::map<Source, std::size_t> count_by_source(const std::vector<QARecord>& records);

/// Wraps records into a dataset, recomputing counts. Throws ValidationError on
/// duplicate ids.
UnionDataset make_dataset(std::vector<QARecord> records);

struct UnionBuild {
  UnionDataset dataset;
  std::vector<std::string> duplicate_ids;
  std::size_t dropped_without_text = 0;
};

/// W = Y ∪ Z. The visual side is filtered to records that contain text, then
/// appended after the text-based side; on an id collision the first
/// occurrence wins and the id is reported.
UnionBuild build_union(const std::vector<QARecord>& text_based, const std::vector<QARecord>& visual);

std::vector<QARecord> select_split(const std::vector<QARecord>& records, Split split);

/// Feature side file: one JSON object per line with "id" plus optional
/// "ocr" (list of {"index", "word_vec"?, "appearance"?}) and
/// "question_vectors" (list of float lists).
struct RecordFeatures {
  std::map<std::size_t, std::vector<double>> ocr_word_vecs;
  std::map<std::size_t, std::vector<double>> ocr_appearance;
  std::optional<std::vector<std::vector<double>>> question_vectors;
};

std::map<std::string, RecordFeatures> load_feature_side_file(const std::filesystem::path& path);

/// Copies side-file features into matching records. Returns the number of
/// records that received features.
std::size_t apply_features(std::vector<QARecord>& records, const std::map<std::string, RecordFeatures>& features);

}  // namespace uvqa
