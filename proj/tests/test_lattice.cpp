#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "slubench/errors.hpp"
#include "slubench/lattice.hpp"
#include "slubench/metrics.hpp"
#include "support.hpp"

using namespace slubench;
using namespace slubench::lattice;
using slubench::testing::enumerate_paths;
using slubench::testing::log_sum_exp;
using slubench::testing::random_lattice;

namespace {

// the -> {cat ln 3 | hat ln 1} -> sat
Lattice diamond() {
  return make_lattice({{0.0}, {0.3}, {0.6}, {0.9}}, {{0, 1, "the", 0.0, 0.0},
                                                     {1, 2, "cat", std::log(3.0), 0.0},
                                                     {1, 2, "hat", std::log(1.0), 0.0},
                                                     {2, 3, "sat", 0.0, 0.0}});
}

Lattice chain(const Tokens& words, double w = 0.0) {
  std::vector<Node> nodes(words.size() + 1);
  std::vector<Arc> arcs;
  for (std::size_t i = 0; i < words.size(); ++i) {
    nodes[i + 1].time = 0.3 * static_cast<double>(i + 1);
    arcs.push_back({i, i + 1, words[i], w, 0.0});
  }
  return make_lattice(std::move(nodes), std::move(arcs));
}

std::size_t count_arc_lines(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += line.rfind("A ", 0) == 0;
  return n;
}

const Tokens kWords{"a", "b", "c"};

}  // namespace

TEST_CASE("parse a single-arc lattice") {
  auto l = parse_lattice("# two nodes\nLAT 2 1\nN 0 0\nN 1 0.5\nA 0 1 hello -0.1 -0.2\n");
  REQUIRE(l.arcs.size() == 1);
  CHECK(l.arcs[0].word == "hello");
  CHECK(l.arcs[0].lm_score == -0.2);
  CHECK(best_path(l).words == Tokens{"hello"});
  CHECK(count_arc_lines(serialize_lattice(l)) == 1);
}

TEST_CASE("parse errors and structural errors") {
  SUBCASE("syntax error has a line number") {
    try {
      parse_lattice("LAT 2 1\nN 0 0\nN 1 zero\nA 0 1 x 0 0\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("unknown node") { CHECK_THROWS_AS(parse_lattice("LAT 2 1\nN 0 0\nN 1 1\nA 0 5 x 0 0\n"), ParseError); }
  SUBCASE("cycle") {
    CHECK_THROWS_AS(make_lattice({{0}, {0.1}, {0.1}, {0.3}},
                                 {{0, 1, "a", 0, 0}, {1, 2, "b", 0, 0}, {2, 1, "c", 0, 0}, {2, 3, "d", 0, 0}}),
                    ContractError);
  }
  SUBCASE("unreachable node is named") {
    try {
      make_lattice({{0}, {0.1}, {0.2}}, {{0, 2, "a", 0, 0}});
      FAIL("expected ContractError");
    } catch (const ContractError& e) {
      CHECK(std::string(e.what()).find('1') != std::string::npos);
    }
  }
  SUBCASE("dash word") { CHECK_THROWS_AS(parse_lattice("LAT 2 1\nN 0 0\nN 1 1\nA 0 1 - 0 0\n"), ParseError); }
  SUBCASE("time going backwards") { CHECK_THROWS_AS(make_lattice({{1.0}, {0.5}}, {{0, 1, "a", 0, 0}}), ContractError); }
  SUBCASE("count mismatch") { CHECK_THROWS_AS(parse_lattice("LAT 2 2\nN 0 0\nN 1 1\nA 0 1 x 0 0\n"), ParseError); }
}

TEST_CASE("serialization is canonical and round-trips") {
  auto d = diamond();
  auto text = serialize_lattice(d);
  CHECK(count_arc_lines(text) == 4);
  auto shuffled = d;
  std::reverse(shuffled.arcs.begin(), shuffled.arcs.end());
  CHECK(serialize_lattice(shuffled) == text);
  CHECK(serialize_lattice(parse_lattice(text)) == text);
  CHECK(text.find("A 1 2 cat") < text.find("A 1 2 hat"));

  Rng rng(5, "roundtrip");
  for (int i = 0; i < 50; ++i) {
    auto l = random_lattice(rng, 8, kWords);
    auto t = serialize_lattice(l);
    CHECK(serialize_lattice(parse_lattice(t)) == t);
  }
}

TEST_CASE("forward_backward on hand-checked lattices") {
  auto single = chain({"turn", "it", "on"}, -0.7);
  for (double p : forward_backward(single).posterior) CHECK(p == doctest::Approx(1.0).epsilon(1e-12));

  auto post = forward_backward(diamond()).posterior;
  CHECK(post[0] == doctest::Approx(1.0));
  CHECK(post[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(post[2] == doctest::Approx(0.25).epsilon(1e-12));

  auto long_chain = chain(Tokens(50, "w"), -100.0);
  auto fb = forward_backward(long_chain);
  CHECK(std::isfinite(fb.log_z));
  CHECK(fb.log_z == doctest::Approx(-5000.0));
  for (double p : fb.posterior) CHECK(p == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("forward_backward matches path enumeration and every cut sums to one") {
  Rng rng(1, "fb-oracle");
  for (int trial = 0; trial < 200; ++trial) {
    auto l = random_lattice(rng, 10, kWords);
    double lm_scale = trial % 2 ? 1.0 : 0.5;
    auto fb = forward_backward(l, lm_scale);
    auto paths = enumerate_paths(l, lm_scale);
    std::vector<double> weights;
    for (const auto& p : paths) weights.push_back(p.weight);
    double log_z = log_sum_exp(weights);
    CHECK(fb.log_z == doctest::Approx(log_z).epsilon(1e-12));
    std::vector<double> expect(l.arcs.size(), 0.0);
    for (const auto& p : paths)
      for (std::size_t a : p.arcs) expect[a] += std::exp(p.weight - log_z);
    for (std::size_t a = 0; a < l.arcs.size(); ++a) CHECK(std::abs(fb.posterior[a] - expect[a]) <= 1e-9);

    auto order = topological_order(l);
    std::vector<std::size_t> rank(l.nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
    for (std::size_t cut = 1; cut < order.size(); ++cut) {
      double sum = 0.0;
      for (std::size_t a = 0; a < l.arcs.size(); ++a)
        if (rank[l.arcs[a].from] < cut && rank[l.arcs[a].to] >= cut) sum += fb.posterior[a];
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("best_path picks the heavier branch and breaks ties lexicographically") {
  CHECK(best_path(diamond()).words == Tokens{"the", "cat", "sat"});
  CHECK(best_path(diamond()).score == doctest::Approx(std::log(3.0)));
  auto tie = make_lattice({{0}, {0.3}, {0.6}}, {{0, 1, "a", 0, 0}, {1, 2, "b", 0, 0}, {1, 2, "a", 0, 0}});
  CHECK(best_path(tie).words == Tokens{"a", "a"});

  // Adding the same constant to every arc of a layered lattice shifts every
  // path equally.
  Rng rng(3, "shift");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Node> nodes(6);
    std::vector<Arc> arcs;
    for (std::size_t i = 0; i < 5; ++i) {
      nodes[i + 1].time = 0.3 * static_cast<double>(i + 1);
      for (const auto& w : kWords)
        if (rng.uniform() < 0.7 || w == "a") arcs.push_back({i, i + 1, w, rng.uniform(-2, 0), 0.0});
    }
    auto l = make_lattice(nodes, arcs);
    auto shifted = l;
    for (auto& a : shifted.arcs) a.am_score -= 4.25;
    CHECK(best_path(shifted).words == best_path(l).words);
  }
}

TEST_CASE("nbest agrees with sequence-deduplicated enumeration") {
  CHECK(nbest(chain({"a", "b"}), 5).size() == 1);
  auto two = nbest(diamond(), 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].words == Tokens{"the", "cat", "sat"});
  CHECK(two[1].words == Tokens{"the", "hat", "sat"});
  CHECK(two[0].score > two[1].score);

  Rng rng(2, "nbest");
  for (int trial = 0; trial < 100; ++trial) {
    auto l = random_lattice(rng, 8, {"a", "b"});
    std::map<Tokens, double> best;
    for (const auto& p : enumerate_paths(l)) {
      auto it = best.find(p.words);
      if (it == best.end() || p.weight > it->second) best[p.words] = p.weight;
    }
    std::vector<Hypothesis> expect;
    for (const auto& [w, s] : best) expect.push_back({w, s});
    std::sort(expect.begin(), expect.end(), [](const Hypothesis& a, const Hypothesis& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.words < b.words;
    });
    auto got = nbest(l, 6);
    REQUIRE(got.size() == std::min<std::size_t>(6, expect.size()));
    std::set<Tokens> seen;
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].score == doctest::Approx(expect[i].score).epsilon(1e-12));
      CHECK(seen.insert(got[i].words).second);
      if (i > 0) CHECK(got[i].score <= got[i - 1].score);
    }
    auto one = nbest(l, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].words == best_path(l).words);
    CHECK(one[0].score == doctest::Approx(best_path(l).score));
  }
}

TEST_CASE("oracle_wer is the enumerated minimum") {
  CHECK(oracle_wer(diamond(), {"the", "hat", "sat"}).wer == 0.0);
  auto single = chain({"turn", "lights", "on"});
  Tokens ref{"turn", "the", "lights", "on"};
  CHECK(oracle_wer(single, ref).wer == doctest::Approx(metrics::wer(ref, best_path(single).words)));

  Rng rng(4, "oracle");
  for (int trial = 0; trial < 200; ++trial) {
    auto l = random_lattice(rng, 8, kWords);
    Tokens r;
    std::size_t len = 1 + rng.index(5);
    for (std::size_t i = 0; i < len; ++i) r.push_back(kWords[rng.index(3)]);
    double brute = 1e9;
    for (const auto& p : enumerate_paths(l)) brute = std::min(brute, metrics::wer(r, p.words));
    auto got = oracle_wer(l, r);
    CHECK(got.wer == doctest::Approx(brute));
    CHECK(metrics::wer(r, got.path) == doctest::Approx(got.wer));
    CHECK(got.wer <= metrics::wer(r, best_path(l).words) + 1e-12);
  }
}
