#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "uvqa/attention_export.hpp"
#include "uvqa/checkpoint.hpp"
#include "uvqa/dataset.hpp"
#include "uvqa/errors.hpp"
#include "uvqa/evaluator.hpp"
#include "uvqa/fusion.hpp"
#include "uvqa/model.hpp"
#include "uvqa/stats.hpp"
#include "uvqa/synthetic.hpp"
#include "uvqa/training.hpp"
#include "uvqa/vocabulary.hpp"

namespace fs = std::filesystem;

namespace uvqa::cli {

namespace {

struct Common {
  std::uint64_t seed = 0;
  bool strict = true;
  bool lenient = false;

  ParseMode mode() const { return lenient ? ParseMode::lenient : ParseMode::strict; }
};

struct SynthFlags {
  std::string out = "synth";
  std::size_t scenes = 600;
  std::string grid = "3x3";
  double beta = 0.0;
  std::string templates = "T1,T2,T3";
  std::string source = "synthetic";
  std::string prefix = "syn";
  std::size_t probe_per_answer = 0;
};

struct UnionFlags {
  std::vector<std::string> text;
  std::vector<std::string> vqa;
  std::string out = "union.jsonl";
};

struct StatsFlags {
  std::vector<std::string> data;
  std::size_t top_k = 100;
  std::string out;
};

struct TrainFlags {
  std::string data;
  std::string val;
  std::string out = "model.ckpt";
  std::size_t iters = 24000;
  std::size_t batch = 64;
  double lr = 1e-4;
  double weight_decay = 0.01;
  std::size_t d = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn = 0;
  std::size_t steps = 12;
  std::size_t vocab_size = 1000;
  std::size_t log_every = 100;
  std::size_t val_limit = 200;
};

struct EvalFlags {
  std::string checkpoint;
  std::string data;
  std::string predictions;
  bool leave_one_out = false;
  bool machine = false;
};

struct AttnFlags {
  std::string checkpoint;
  std::string data;
  std::string record;
  std::size_t layer = 0;
  std::size_t head = 0;
  std::string out = "attention";
};

struct ProbeFlags {
  std::string checkpoint;
  std::string data;
  std::string template_id = "T3";
};

void print_config(std::ostream& out, const std::string& command,
                  const std::vector<std::pair<std::string, std::string>>& entries) {
  out << "# config command=" << command << '\n';
  for (const auto& [k, v] : entries) out << "# config " << k << '=' << v << '\n';
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_paths(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& p : v) s += (s.empty() ? "" : ",") + p;
  return s.empty() ? "-" : s;
}

std::vector<QARecord> load(const std::string& path, const Common& c, std::ostream& out) {
  LoadResult r = load_records(path, c.mode());
  for (const auto& issue : r.skipped) out << "# skipped " << path << ':' << issue.line << ' ' << issue.message << '\n';
  return std::move(r.records);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const auto cols = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const auto rows = std::stoul(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) throw std::invalid_argument(s);
    return {cols, rows};
  } catch (const std::logic_error&) {
    throw ValidationError("--grid must look like COLSxROWS, got '" + s + "'");
  }
}

int cmd_synth(const SynthFlags& f, const Common& c, std::ostream& out) {
  SynthConfig cfg;
  cfg.scenes = f.scenes;
  std::tie(cfg.grid_cols, cfg.grid_rows) = parse_grid(f.grid);
  cfg.beta = f.beta;
  cfg.visual_questions = f.templates.find("T1") != std::string::npos;
  cfg.text_questions = f.templates.find("T2") != std::string::npos;
  cfg.look_and_read = f.templates.find("T3") != std::string::npos;
  const auto source = parse_source(f.source);
  if (!source) throw ValidationError("unknown --source '" + f.source + "'");
  cfg.source = *source;
  cfg.id_prefix = f.prefix;
  print_config(out, "synth",
               {{"seed", std::to_string(c.seed)}, {"out", f.out}, {"scenes", std::to_string(cfg.scenes)},
                {"grid", std::to_string(cfg.grid_cols) + "x" + std::to_string(cfg.grid_rows)},
                {"beta", num(cfg.beta)}, {"templates", f.templates}, {"source", f.source}, {"prefix", f.prefix},
                {"probe_per_answer", std::to_string(f.probe_per_answer)}});
  cfg.validate();
  const UnionDataset ds = generate_synthetic(cfg, c.seed);
  fs::create_directories(f.out);
  for (Split s : {Split::train, Split::val, Split::test}) {
    const auto part = select_split(ds.records, s);
    const fs::path path = fs::path(f.out) / (std::string(to_string(s)) + ".jsonl");
    save_records(path, part);
    out << "wrote\t" << path.string() << '\t' << part.size() << '\n';
  }
  if (f.probe_per_answer > 0) {
    const auto probe = generate_t3_probe(cfg, c.seed, f.probe_per_answer);
    const fs::path path = fs::path(f.out) / "probe.jsonl";
    save_records(path, probe);
    out << "wrote\t" << path.string() << '\t' << probe.size() << '\n';
  }
  return 0;
}

int cmd_union(const UnionFlags& f, const Common& c, std::ostream& out) {
  print_config(out, "union", {{"text", join_paths(f.text)}, {"vqa", join_paths(f.vqa)}, {"out", f.out},
                              {"mode", c.lenient ? "lenient" : "strict"}});
  std::vector<QARecord> text, visual;
  for (const auto& p : f.text) {
    auto r = load(p, c, out);
    text.insert(text.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  for (const auto& p : f.vqa) {
    auto r = load(p, c, out);
    visual.insert(visual.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  const UnionBuild u = build_union(text, visual);
  save_records(f.out, u.dataset.records);
  out << "records\t" << u.dataset.records.size() << '\n';
  for (const auto& [s, n] : u.dataset.counts_by_source) out << "source\t" << to_string(s) << '\t' << n << '\n';
  out << "dropped_without_text\t" << u.dropped_without_text << '\n';
  out << "duplicates\t" << u.duplicate_ids.size() << '\n';
  for (const auto& id : u.duplicate_ids) out << "duplicate\t" << id << '\n';
  return 0;
}

int cmd_stats(const StatsFlags& f, const Common& c, std::ostream& out) {
  print_config(out, "stats", {{"data", join_paths(f.data)}, {"top_k", std::to_string(f.top_k)},
                              {"out", f.out.empty() ? "-" : f.out}});
  std::vector<QARecord> all;
  for (const auto& p : f.data) {
    auto r = load(p, c, out);
    all.insert(all.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  const std::string text = render_stats(compute_stats(make_dataset(std::move(all)), f.top_k));
  if (f.out.empty()) {
    out << text;
  } else {
    write_text(f.out, text);
    out << "wrote\t" << f.out << '\n';
  }
  return 0;
}

ModelConfig infer_config(const std::vector<QARecord>& records, const TrainFlags& f) {
  ModelConfig cfg;
  cfg.d = f.d;
  cfg.layers = f.layers;
  cfg.heads = f.heads;
  cfg.ffn = f.ffn ? f.ffn : 4 * f.d;
  cfg.max_steps = f.steps;
  bool have_obj = false, have_word = false, have_ap = false;
  for (const auto& r : records) {
    if (!have_obj && !r.objects.empty()) {
      cfg.object_dim = r.objects.front().feature.size();
      have_obj = true;
    }
    for (const auto& t : r.ocr) {
      if (!have_word && t.word_vec) {
        cfg.word_dim = t.word_vec->size();
        have_word = true;
      }
      if (!have_ap && t.appearance) {
        cfg.appearance_dim = t.appearance->size();
        have_ap = true;
      }
    }
    if (have_obj && have_word && have_ap) break;
  }
  return cfg;
}

int cmd_train(const TrainFlags& f, const Common& c, std::ostream& out) {
  print_config(out, "train",
               {{"seed", std::to_string(c.seed)}, {"data", f.data}, {"val", f.val.empty() ? "-" : f.val},
                {"out", f.out}, {"iters", std::to_string(f.iters)}, {"batch", std::to_string(f.batch)},
                {"lr", num(f.lr)}, {"weight_decay", num(f.weight_decay)}, {"d", std::to_string(f.d)},
                {"layers", std::to_string(f.layers)}, {"heads", std::to_string(f.heads)},
                {"ffn", std::to_string(f.ffn ? f.ffn : 4 * f.d)}, {"steps", std::to_string(f.steps)},
                {"vocab_size", std::to_string(f.vocab_size)}, {"log_every", std::to_string(f.log_every)},
                {"mode", c.lenient ? "lenient" : "strict"}});
  const auto records = load(f.data, c, out);
  if (records.empty()) throw ValidationError("no training records in " + f.data);
  std::vector<QARecord> val;
  if (!f.val.empty()) {
    val = load(f.val, c, out);
    if (val.size() > f.val_limit) val.resize(f.val_limit);
  }

  Model model(infer_config(records, f), AnswerVocabulary::build(records, f.vocab_size),
              WordVocabulary::build(records, 100000), c.seed);
  const auto& cfg = model.config();
  out << "# model vocab_size=" << cfg.vocab_size << " question_vocab_size=" << cfg.question_vocab_size
      << " object_dim=" << cfg.object_dim << " word_dim=" << cfg.word_dim << " appearance_dim=" << cfg.appearance_dim
      << " parameters=" << model.store().coordinate_count() << '\n';

  TrainOptions opts;
  opts.iterations = f.iters;
  opts.batch_size = f.batch;
  opts.optimizer.learning_rate = f.lr;
  opts.optimizer.weight_decay = f.weight_decay;
  opts.seed = c.seed;
  opts.log_every = f.log_every;
  out << "iteration\tloss\tval_accuracy\n";
  train(model, records, opts, [&](const TrainProgress& p) {
    out << p.iteration << '\t' << num(p.loss) << '\t';
    if (val.empty()) {
      out << "NA";
    } else {
      out << num(evaluate(model, val).overall);
    }
    out << '\n' << std::flush;
  });
  save_checkpoint(f.out, model);
  out << "wrote\t" << f.out << '\n';
  return 0;
}

std::vector<std::string> read_predictions(const std::string& path, const std::vector<QARecord>& records) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions file " + path);
  std::map<std::string, std::string> by_id;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected <id>\\t<answer>", n);
    by_id[line.substr(0, tab)] = line.substr(tab + 1);
  }
  std::vector<std::string> preds;
  for (const auto& r : records) {
    const auto it = by_id.find(r.id);
    if (it == by_id.end()) throw ValidationError("no prediction for record " + r.id);
    preds.push_back(it->second);
  }
  return preds;
}

int cmd_eval(const EvalFlags& f, const Common& c, std::ostream& out) {
  print_config(out, "eval", {{"checkpoint", f.checkpoint.empty() ? "-" : f.checkpoint}, {"data", f.data},
                             {"predictions", f.predictions.empty() ? "-" : f.predictions},
                             {"metric", f.leave_one_out ? "leave_one_out" : "min_over_three"}});
  if (f.checkpoint.empty() == f.predictions.empty())
    throw ValidationError("eval needs exactly one of --checkpoint or --predictions");
  const auto records = load(f.data, c, out);
  const auto variant = f.leave_one_out ? AccuracyVariant::leave_one_out : AccuracyVariant::min_over_three;
  AccuracyReport rep;
  if (!f.predictions.empty()) {
    rep = score_predictions(records, read_predictions(f.predictions, records), variant);
  } else {
    Model model = load_checkpoint(f.checkpoint);
    rep = evaluate(model, records, variant);
  }
  out << (f.machine ? render_report_machine(rep) : render_report(rep));
  return 0;
}

int cmd_attn(const AttnFlags& f, const Common& c, std::ostream& out) {
  print_config(out, "attn", {{"checkpoint", f.checkpoint}, {"data", f.data}, {"record", f.record.empty() ? "-" : f.record},
                             {"layer", std::to_string(f.layer)}, {"head", std::to_string(f.head)}, {"out", f.out}});
  Model model = load_checkpoint(f.checkpoint);
  if (f.layer >= model.config().layers || f.head >= model.config().heads) {
    throw ValidationError("layer " + std::to_string(f.layer) + " / head " + std::to_string(f.head) +
                          " outside model with " + std::to_string(model.config().layers) + " layers and " +
                          std::to_string(model.config().heads) + " heads");
  }
  const auto records = load(f.data, c, out);
  if (records.empty()) throw ValidationError("no records in " + f.data);
  const QARecord* rec = &records.front();
  if (!f.record.empty()) {
    rec = nullptr;
    for (const auto& r : records)
      if (r.id == f.record) rec = &r;
    if (!rec) throw ValidationError("record '" + f.record + "' not found in " + f.data);
  }
  const DecodedAnswer ans = decode_greedy(*rec, model);
  const Heatmap map = export_attention(ans, *rec, f.layer, f.head);
  write_text(f.out + ".pgm", to_pgm(map));
  write_text(f.out + ".tsv", to_tsv(map));
  out << "record\t" << rec->id << '\n' << "answer\t" << ans.text << '\n';
  out << "wrote\t" << f.out << ".pgm\n" << "wrote\t" << f.out << ".tsv\n";
  return 0;
}

int cmd_probe(const ProbeFlags& f, const Common& c, std::ostream& out) {
  print_config(out, "probe", {{"checkpoint", f.checkpoint}, {"data", f.data}, {"template", f.template_id}});
  Model model = load_checkpoint(f.checkpoint);
  const auto probe = load(f.data, c, out);
  out << render_probe(probe_bias(model, f.template_id, probe));
  return 0;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Seed for all randomness");
  auto* strict = sub->add_flag("--strict", c.strict, "Fail on the first malformed record line (default)");
  sub->add_flag("--lenient", c.lenient, "Skip malformed record lines and report them")->excludes(strict);
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Union-dataset text VQA: data tools, training and evaluation", "uvqa"};
  app.require_subcommand(1);
  Common common;
  SynthFlags synth;
  UnionFlags uni;
  StatsFlags stats;
  TrainFlags tr;
  EvalFlags ev;
  AttnFlags at;
  ProbeFlags pr;

  auto* s = app.add_subcommand("synth", "Generate a synthetic look-and-read dataset");
  add_common(s, common);
  s->add_option("--out", synth.out, "Output directory");
  s->add_option("--scenes", synth.scenes, "Number of scenes");
  s->add_option("--grid", synth.grid, "Grid size COLSxROWS");
  s->add_option("--beta", synth.beta, "Fraction of train T3 answers replaced by 'stop'");
  s->add_option("--templates", synth.templates, "Question families to emit, e.g. T2,T3");
  s->add_option("--source", synth.source, "Source tag for generated records");
  s->add_option("--prefix", synth.prefix, "Record id prefix");
  s->add_option("--probe", synth.probe_per_answer, "Also write a balanced T3 probe with N records per answer");

  auto* u = app.add_subcommand("union", "Merge text-based and visual records");
  add_common(u, common);
  u->add_option("--text", uni.text, "Text-based record files")->required();
  u->add_option("--vqa", uni.vqa, "Visual record files (filtered to records with OCR text)");
  u->add_option("--out", uni.out, "Output record file");

  auto* st = app.add_subcommand("stats", "Dataset statistics");
  add_common(st, common);
  st->add_option("--data", stats.data, "Record files")->required();
  st->add_option("--top-k", stats.top_k, "Rows per frequency table");
  st->add_option("--out", stats.out, "Write report here instead of stdout");

  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(t, common);
  t->add_option("--data", tr.data, "Training records")->required();
  t->add_option("--val", tr.val, "Validation records for the progress log");
  t->add_option("--val-limit", tr.val_limit, "Validation records scored per log line");
  t->add_option("--out", tr.out, "Checkpoint path");
  t->add_option("--iters", tr.iters, "Optimizer steps");
  t->add_option("--batch", tr.batch, "Records per step");
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--weight-decay", tr.weight_decay, "Decoupled weight decay");
  t->add_option("--d", tr.d, "Hidden width");
  t->add_option("--layers", tr.layers, "Transformer layers");
  t->add_option("--heads", tr.heads, "Attention heads");
  t->add_option("--ffn", tr.ffn, "Feed-forward width (default 4d)");
  t->add_option("--steps", tr.steps, "Maximum decoding steps");
  t->add_option("--vocab-size", tr.vocab_size, "Answer vocabulary size including specials");
  t->add_option("--log-every", tr.log_every, "Progress line every K iterations (0: last only)");

  auto* e = app.add_subcommand("eval", "Accuracy report");
  add_common(e, common);
  e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  e->add_option("--data", ev.data, "Records to score")->required();
  e->add_option("--predictions", ev.predictions, "Score a TSV of <id>\\t<answer> instead of a model");
  e->add_flag("--leave-one-out", ev.leave_one_out, "Average over the ten 9-answer subsets");
  e->add_flag("--machine", ev.machine, "Line-oriented output");

  auto* a = app.add_subcommand("attn", "Export an attention heatmap");
  add_common(a, common);
  a->add_option("--checkpoint", at.checkpoint, "Model checkpoint")->required();
  a->add_option("--data", at.data, "Record file")->required();
  a->add_option("--record", at.record, "Record id (default: first record)");
  a->add_option("--layer", at.layer, "Layer index");
  a->add_option("--head", at.head, "Head index");
  a->add_option("--out", at.out, "Output prefix for .pgm and .tsv");

  auto* p = app.add_subcommand("probe", "Language-prior bias probe");
  add_common(p, common);
  p->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")->required();
  p->add_option("--data", pr.data, "Balanced probe records")->required();
  p->add_option("--template", pr.template_id, "Question template to probe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::Success&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& ex) {
    std::string msg = ex.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error[usage]: " << msg << '\n';
    return 2;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, common, out);
    if (u->parsed()) return cmd_union(uni, common, out);
    if (st->parsed()) return cmd_stats(stats, common, out);
    if (t->parsed()) return cmd_train(tr, common, out);
    if (e->parsed()) return cmd_eval(ev, common, out);
    if (a->parsed()) return cmd_attn(at, common, out);
    if (p->parsed()) return cmd_probe(pr, common, out);
  } catch (const Error& ex) {
    err << "error[" << ex.kind() << "]: " << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    err << "error[internal]: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> storage{"uvqa"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace uvqa::cli
