#include <doctest.h>

#include <algorithm>
#include <functional>

#include "slubench/errors.hpp"
#include "slubench/metrics.hpp"
#include "slubench/rng.hpp"

using namespace slubench;
using namespace slubench::metrics;

namespace {

// Minimum cost over every edit script, by exhaustive recursion.
std::size_t brute_distance(const Tokens& a, const Tokens& b, std::size_t i = 0, std::size_t j = 0) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  std::size_t best = std::min(brute_distance(a, b, i + 1, j), brute_distance(a, b, i, j + 1)) + 1;
  return std::min(best, brute_distance(a, b, i + 1, j + 1) + (a[i] == b[j] ? 0 : 1));
}

Tokens random_tokens(Rng& rng, std::size_t max_len, std::size_t min_len = 0) {
  Tokens t(min_len + rng.index(max_len - min_len + 1));
  for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng.index(3)));
  return t;
}

}  // namespace

TEST_CASE("align worked examples") {
  auto same = align({"a", "b"}, {"a", "b"});
  CHECK(same.errors() == 0);
  CHECK(same.hits == 2);

  auto del = align(tokenize("turn the lights on"), tokenize("turn lights on"));
  CHECK(del.deletions == 1);
  CHECK(del.substitutions == 0);
  CHECK(del.insertions == 0);

  auto ins = align(tokenize("play music"), tokenize("please play the music"));
  CHECK(ins.insertions == 2);
  CHECK(ins.substitutions + ins.deletions == 0);
  CHECK_THROWS_AS(align({}, {"x"}), ContractError);
}

TEST_CASE("wer values and asymmetry") {
  CHECK(wer("turn ON the lights", "turn on  the lights") == 0.0);
  CHECK(wer("turn the lights on", "turn lights on") == doctest::Approx(0.25));
  CHECK(wer("play music", "please play the music") == doctest::Approx(1.0));
  CHECK(wer("please play the music", "play music") == doctest::Approx(0.5));
  CHECK(wer("a", "b c d") == doctest::Approx(3.0));
}

TEST_CASE("align agrees with exhaustive edit-script search") {
  Rng rng(8, "align");
  for (int trial = 0; trial < 2000; ++trial) {
    Tokens r = random_tokens(rng, 6, 1), h = random_tokens(rng, 6);
    auto a = align(r, h);
    CHECK(a.errors() == brute_distance(r, h));
    CHECK(a.hits + a.substitutions + a.deletions == r.size());
    CHECK(a.hits + a.substitutions + a.insertions == h.size());
    CHECK(edit_distance(r, h) == a.errors());
    CHECK((wer(r, h) == 0.0) == (r == h));
    auto ops = align_ops(r, h);
    std::size_t cost = 0;
    for (const auto& op : ops) cost += op.kind != EditKind::hit;
    CHECK(cost == a.errors());
  }
}

TEST_CASE("edit distance triangle inequality") {
  Rng rng(9, "triangle");
  for (int trial = 0; trial < 1000; ++trial) {
    Tokens r = random_tokens(rng, 7), h = random_tokens(rng, 7), m = random_tokens(rng, 7);
    CHECK(edit_distance(r, h) <= edit_distance(r, m) + edit_distance(m, h));
  }
}

TEST_CASE("backtrace prefers substitution over a deletion-insertion pair") {
  auto a = align({"a", "b"}, {"a", "c"});
  CHECK(a.substitutions == 1);
  CHECK(a.deletions == 0);
}

TEST_CASE("intent accuracy") {
  CHECK(intent_accuracy({"a", "b"}, {"a", "b"}) == 1.0);
  CHECK(intent_accuracy({"a", "b", "c", "d"}, {"a", "b", "c", "x"}) == 0.75);
  CHECK(intent_accuracy({"a", "b"}, {"x", "y"}) == 0.0);
  CHECK_THROWS_AS(intent_accuracy({"a"}, {"a", "b"}), ContractError);
  CHECK_THROWS_AS(intent_accuracy({}, {}), ContractError);
}

TEST_CASE("f1 scores") {
  auto perfect = f1_scores({"a", "b", "a"}, {"a", "b", "a"});
  CHECK(perfect.micro == 1.0);
  CHECK(perfect.macro == 1.0);

  auto f = f1_scores({"a", "a", "b"}, {"a", "b", "b"});
  CHECK(f.per_class.at("a").f1 == doctest::Approx(2.0 / 3.0));
  CHECK(f.per_class.at("b").f1 == doctest::Approx(2.0 / 3.0));
  CHECK(f.macro == doctest::Approx(2.0 / 3.0));

  auto extra = f1_scores({"a", "a"}, {"a", "z"});
  CHECK(extra.per_class.count("z") == 1);
  CHECK(extra.per_class.at("z").f1 == 0.0);
  CHECK(extra.macro == doctest::Approx(extra.per_class.at("a").f1));
  CHECK_THROWS_AS(f1_scores({"a"}, {}), ContractError);
}

TEST_CASE("micro F1 equals accuracy on single-label data") {
  Rng rng(10, "f1");
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng.index(30);
    std::vector<std::string> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = std::string(1, static_cast<char>('a' + rng.index(5)));
      pred[i] = std::string(1, static_cast<char>('a' + rng.index(6)));
    }
    CHECK(f1_scores(gold, pred).micro == doctest::Approx(intent_accuracy(gold, pred)).epsilon(1e-12));
  }
}

TEST_CASE("relative improvement") {
  CHECK(format_half_up(relative_improvement(0.69, 0.72), 2) == "4.35");
  CHECK(format_half_up(relative_improvement(0.73, 0.86), 2) == "17.81");
  CHECK(relative_improvement(0.5, 0.5) == 0.0);
  CHECK_THROWS_AS(relative_improvement(0.0, 0.5), ContractError);
}

TEST_CASE("render_report") {
  EvalReport report;
  EvalRow row = score_row({"a", "b"}, {"a", "a"});
  row.experiment = "EXP1";
  row.input = "manual -> manual";
  row.variant = "filtered";
  row.split = "test";
  row.accuracy = 0.8649;
  report.rows.push_back(row);
  auto md = render_report(report, ReportFormat::markdown);
  CHECK(md == render_report(report, ReportFormat::markdown));
  CHECK(md.find("0.86") != std::string::npos);
  CHECK(md.find("0.8649") == std::string::npos);
  auto csv = render_report(report, ReportFormat::csv);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.find("0.86") != std::string::npos);
  CHECK(parse_report_format("csv") == ReportFormat::csv);
  CHECK_THROWS_AS(parse_report_format("xml"), ContractError);

  EvalRow failed;
  failed.experiment = "EXP10";
  failed.failed = true;
  failed.error = "boom";
  report.rows.push_back(failed);
  auto with_failure = render_report(report, ReportFormat::markdown);
  CHECK(with_failure.find("FAILED") != std::string::npos);
  CHECK(with_failure.find("EXP1 ") < with_failure.find("EXP10"));
  CHECK(natural_less("EXP2", "EXP10"));
  CHECK_FALSE(natural_less("EXP10", "EXP2"));
}
