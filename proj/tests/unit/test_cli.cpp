#include <doctest.h>

#include <sstream>

#include "../support.hpp"
#include "cli.hpp"
#include "uvqa/checkpoint.hpp"
#include "uvqa/synthetic.hpp"

using namespace uvqa;
using namespace uvqa::test;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

bool has(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is reproducible and prints its resolved config") {
  TempDir dir("synth");
  const Run a = run({"synth", "--seed", "7", "--scenes", "30", "--out", (dir / "a").string()});
  const Run b = run({"synth", "--seed", "7", "--scenes", "30", "--out", (dir / "b").string()});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(has(a.out, "# config seed=7"));
  CHECK(has(a.out, "# config beta=0"));
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl"}) CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
}

TEST_CASE("synth propagates beta into train T3 answers") {
  TempDir dir("beta");
  REQUIRE(run({"synth", "--seed", "1", "--scenes", "40", "--beta", "1", "--out", dir.path().string()}).code == 0);
  std::size_t t3 = 0;
  for (const auto& r : load_records(dir / "train.jsonl").records) {
    if (question_template(r) != "T3") continue;
    ++t3;
    CHECK(r.answers[0] == "stop");
  }
  CHECK(t3 > 0);
}

TEST_CASE("synth rejects a bad grid with a single error line") {
  for (const char* grid : {"1x3", "abc", "3x"}) {
    const Run r = run({"synth", "--grid", grid});
    CHECK(r.code != 0);
    CHECK(r.err.rfind("error[validation]: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
}

TEST_CASE("unknown flags and missing subcommands are usage errors") {
  const Run r = run({"synth", "--bogus", "1"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error[usage]: ", 0) == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"synth", "--strict", "--lenient"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("union echoes per-source counts, drops textless visual records and reports duplicates") {
  TempDir dir("union");
  std::vector<QARecord> text{record("t1", Source::textvqa, "q", ten("a"), {token("a", {0, 0, 1, 1})}),
                             record("s1", Source::stvqa, "q", ten("b"), {token("b", {0, 0, 1, 1})})};
  std::vector<QARecord> visual{record("v1", Source::vqa, "q", ten("c"), {token("c", {0, 0, 1, 1})}),
                               record("v2", Source::vqa, "q", ten("d")),
                               record("t1", Source::vqa, "q", ten("e"), {token("e", {0, 0, 1, 1})})};
  save_records(dir / "textvqa.jsonl", {text[0]});
  save_records(dir / "stvqa.jsonl", {text[1]});
  save_records(dir / "vqa.jsonl", visual);
  const Run r = run({"union", "--text", (dir / "textvqa.jsonl").string(), (dir / "stvqa.jsonl").string(), "--vqa",
                     (dir / "vqa.jsonl").string(), "--out", (dir / "w.jsonl").string()});
  REQUIRE(r.code == 0);
  CHECK(has(r.out, "records\t3\n"));
  CHECK(has(r.out, "source\ttextvqa\t1\n"));
  CHECK(has(r.out, "source\tstvqa\t1\n"));
  CHECK(has(r.out, "source\tvqa\t1\n"));
  CHECK(has(r.out, "dropped_without_text\t1\n"));
  CHECK(has(r.out, "duplicate\tt1\n"));
  CHECK(load_records(dir / "w.jsonl").records.size() == 3);
}

TEST_CASE("stats prints the source table") {
  TempDir dir("stats");
  std::vector<QARecord> rs;
  for (int i = 0; i < 2; ++i) rs.push_back(record("t" + std::to_string(i), Source::textvqa, "What what WHAT?", ten("x")));
  rs.push_back(record("v", Source::vqa, "q", ten("x")));
  save_records(dir / "d.jsonl", rs);
  const Run r = run({"stats", "--data", (dir / "d.jsonl").string(), "--top-k", "5"});
  REQUIRE(r.code == 0);
  CHECK(has(r.out, "textvqa\t2\t66.7%"));
  CHECK(has(r.out, "vqa\t1\t33.3%"));
  CHECK(has(r.out, "what\t6\n"));
}

TEST_CASE("lenient mode reports skipped lines; strict mode fails with the line number") {
  const Run strict = run({"stats", "--data", fixture("mixed.jsonl").string()});
  CHECK(strict.code == 1);
  CHECK(strict.err.rfind("error[parse]: line 2", 0) == 0);
  const Run lenient = run({"stats", "--lenient", "--data", fixture("mixed.jsonl").string()});
  CHECK(lenient.code == 0);
  CHECK(has(lenient.out, "# skipped"));
  CHECK(has(lenient.out, "records\t3"));
}

TEST_CASE("eval on rigged-perfect predictions prints 100.00") {
  TempDir dir("eval");
  const auto records = load_records(fixture("three_valid.jsonl")).records;
  std::string preds;
  for (const auto& r : records) preds += r.id + "\t" + r.answers[0] + "\n";
  write_file(dir / "p.tsv", preds);
  const Run r = run({"eval", "--data", fixture("three_valid.jsonl").string(), "--predictions", (dir / "p.tsv").string()});
  REQUIRE(r.code == 0);
  CHECK(has(r.out, "overall\t3\t100.00"));
  const Run m = run({"eval", "--machine", "--data", fixture("three_valid.jsonl").string(), "--predictions",
                     (dir / "p.tsv").string()});
  CHECK(has(m.out, "cell=overall n=3 accuracy=1\n"));
  CHECK(run({"eval", "--data", fixture("three_valid.jsonl").string()}).code == 1);
}

TEST_CASE("train twice with one seed gives identical checkpoint bytes; eval, attn and probe run on it") {
  TempDir dir("train");
  REQUIRE(run({"synth", "--seed", "2", "--scenes", "20", "--probe", "1", "--out", dir.path().string()}).code == 0);
  const std::vector<std::string> common{"train", "--seed", "5", "--data", (dir / "train.jsonl").string(), "--iters", "3",
                                        "--batch", "2", "--d", "8", "--layers", "1", "--heads", "2", "--log-every", "1"};
  auto with_out = [&](const std::string& name) {
    auto args = common;
    args.push_back("--out");
    args.push_back((dir / name).string());
    return args;
  };
  const Run a = run(with_out("a.ckpt"));
  const Run b = run(with_out("b.ckpt"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(has(a.out, "iteration\tloss\tval_accuracy\n1\t"));
  CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));

  const Run e = run({"eval", "--checkpoint", (dir / "a.ckpt").string(), "--data", (dir / "test.jsonl").string()});
  CHECK(e.code == 0);
  CHECK(has(e.out, "overall\t"));

  const Run at = run({"attn", "--checkpoint", (dir / "a.ckpt").string(), "--data", (dir / "test.jsonl").string(),
                      "--layer", "0", "--head", "1", "--out", (dir / "heat").string()});
  CHECK(at.code == 0);
  CHECK(read_file(dir / "heat.pgm").rfind("P2\n64 64\n255\n", 0) == 0);
  CHECK(has(read_file(dir / "heat.tsv"), "kind\tindex"));

  const Run bad = run({"attn", "--checkpoint", (dir / "a.ckpt").string(), "--data", (dir / "test.jsonl").string(),
                       "--layer", "1", "--out", (dir / "heat").string()});
  CHECK(bad.code != 0);
  CHECK(bad.err.rfind("error[validation]: ", 0) == 0);

  const Run p = run({"probe", "--checkpoint", (dir / "a.ckpt").string(), "--data", (dir / "probe.jsonl").string()});
  CHECK(p.code == 0);
  CHECK(has(p.out, "majority_rate\t"));
  const Run up = run({"probe", "--checkpoint", (dir / "a.ckpt").string(), "--data", (dir / "train.jsonl").string()});
  CHECK(up.code != 0);
}

TEST_CASE("missing files are I/O errors") {
  const Run r = run({"stats", "--data", "/nonexistent/x.jsonl"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error[io]: ", 0) == 0);
}

}  // TEST_SUITE
