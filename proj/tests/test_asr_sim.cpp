#include <doctest.h>

#include <cmath>
#include <map>

#include "slubench/asr_sim.hpp"
#include "slubench/corpus.hpp"
#include "slubench/errors.hpp"
#include "slubench/lattice.hpp"
#include "slubench/metrics.hpp"
#include "slubench/wcn.hpp"

using namespace slubench;
using namespace slubench::asr;

namespace {

std::vector<Tokens> synthetic_transcripts(std::size_t n_per_intent) {
  std::vector<Tokens> out;
  for (const auto& r : corpus::generate_synthetic_corpus(corpus::default_grammar(), n_per_intent))
    out.push_back(tokenize(r.transcript));
  return out;
}

const Tokens kVocab = corpus::default_grammar().vocabulary();

NoiseProfile profile(double s, double d, double i, std::uint64_t seed = 1) {
  NoiseProfile p;
  p.p_sub = s;
  p.p_del = d;
  p.p_ins = i;
  p.confusion_vocab = kVocab;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("profile validation") {
  CHECK_THROWS_AS(validate(profile(0.6, 0.6, 0)), ContractError);
  CHECK_THROWS_AS(validate(profile(-0.1, 0, 0)), ContractError);
  auto p = profile(0.1, 0, 0);
  p.confusion_vocab.clear();
  CHECK_THROWS_AS(validate(p), ContractError);
  p.p_sub = 0;
  CHECK_NOTHROW(validate(p));
  p.depth = 0;
  CHECK_THROWS_AS(validate(p), ContractError);
  CHECK_THROWS_AS(preset("mystery", kVocab, 1), ContractError);
}

TEST_CASE("corrupt_transcript limiting cases") {
  Tokens t{"turn", "on", "the", "lamp"};
  CHECK(corrupt_transcript(t, profile(0, 0, 0), "k") == t);
  CHECK(corrupt_transcript(t, profile(0, 1, 0), "k").empty());
  auto subs = corrupt_transcript(t, profile(1, 0, 0), "k");
  REQUIRE(subs.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(subs[i] != t[i]);
  CHECK(corrupt_transcript(t, profile(0, 0, 1), "k").size() == 8);
  CHECK(corrupt_transcript(t, profile(0.3, 0.2, 0.1), "k") == corrupt_transcript(t, profile(0.3, 0.2, 0.1), "k"));
}

TEST_CASE("empirical WER tracks the configured rates") {
  auto corpus = synthetic_transcripts(300);
  CHECK(empirical_wer_of_profile(profile(0, 0, 0), corpus) == 0.0);
  CHECK(empirical_wer_of_profile(profile(0.155, 0, 0), corpus) == doctest::Approx(0.155).epsilon(0.02 / 0.155));
  double del = empirical_wer_of_profile(profile(0, 0.344, 0), corpus);
  CHECK(std::abs(del - 0.344) <= 0.02);
  CHECK(empirical_wer_of_profile(profile(0.1, 0.1, 0.1), corpus) ==
        empirical_wer_of_profile(profile(0.1, 0.1, 0.1), corpus));
  CHECK_THROWS_AS(empirical_wer_of_profile(profile(0, 0, 0), {{"too", "short"}}), ContractError);
}

TEST_CASE("empirical WER is monotone in each rate") {
  auto corpus = synthetic_transcripts(2500);  // over 1e5 tokens
  std::size_t tokens = 0;
  for (const auto& t : corpus) tokens += t.size();
  REQUIRE(tokens >= 100'000);
  for (int which = 0; which < 3; ++which) {
    double prev = -1.0;
    for (double v : {0.0, 0.05, 0.1, 0.2}) {
      double r[3] = {0.05, 0.05, 0.05};
      r[which] = v;
      double w = empirical_wer_of_profile(profile(r[0], r[1], r[2], 17), corpus);
      CHECK(w >= prev - 0.01);
      prev = w;
    }
  }
}

TEST_CASE("zero profile lattice is the gold single path") {
  Tokens t{"what", "is", "the", "weather"};
  auto out = simulate(t, profile(0, 0, 0), "z");
  CHECK(out.one_best == t);
  CHECK(lattice::best_path(out.lattice).words == t);
  for (double p : lattice::forward_backward(out.lattice).posterior) CHECK(p == doctest::Approx(1.0));
  CHECK(wcn::one_best(wcn::build_from_lattice(out.lattice)) == t);
}

TEST_CASE("a single substitution with depth 2 fans out once") {
  Tokens t{"play", "some", "jazz", "music", "now"};
  auto p = profile(0.2, 0, 0);
  p.depth = 2;
  std::size_t checked = 0;
  for (int k = 0; k < 200 && checked < 10; ++k) {
    std::string key = "sub" + std::to_string(k);
    auto out = simulate(t, p, key);
    if (metrics::align(t, out.one_best).substitutions != 1) continue;
    ++checked;
    std::map<std::size_t, std::vector<double>> fan;
    for (const auto& a : out.lattice.arcs) fan[a.from].push_back(std::exp(lattice::arc_weight(a, 1.0)));
    std::size_t wide = 0;
    for (const auto& [node, probs] : fan) {
      double s = 0;
      for (double q : probs) s += q;
      CHECK(s == doctest::Approx(1.0));
      wide += probs.size() == 2;
      CHECK(probs.size() <= 2);
    }
    CHECK(wide == 1);
    CHECK(lattice::best_path(out.lattice).words == out.one_best);
  }
  CHECK(checked == 10);
}

TEST_CASE("simulated lattices: best path is the 1-best, oracle never worse") {
  auto corpus = synthetic_transcripts(40);
  auto p = preset("unadapted", kVocab, 23);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::string key = "u" + std::to_string(i);
    auto out = simulate(corpus[i], p, key);
    CHECK(lattice::best_path(out.lattice).words == out.one_best);
    auto o = lattice::oracle_wer(out.lattice, corpus[i]);
    CHECK(o.wer <= metrics::wer(corpus[i], out.one_best) + 1e-12);
    if (out.one_best.size() > 1) CHECK(out.one_best == corrupt_transcript(corpus[i], p, key));
    wcn::validate(wcn::build_from_lattice(out.lattice));
  }
}

TEST_CASE("substitution-only lattices contain the gold path") {
  auto corpus = synthetic_transcripts(10);
  auto p = profile(0.4, 0, 0, 5);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    CHECK(lattice::oracle_wer(synthesize_lattice(corpus[i], p, std::to_string(i)), corpus[i]).wer == 0.0);
}

TEST_CASE("presets and parallel corruption") {
  auto p = preset("unadapted", kVocab, 3);
  CHECK(p.nominal_wer() == doctest::Approx(0.344));
  CHECK(p.p_sub == doctest::Approx(0.6 * 0.344));
  CHECK(preset("adapted", kVocab, 3).nominal_wer() == doctest::Approx(0.155));
  CHECK(preset("none", kVocab, 3).nominal_wer() == 0.0);

  auto corpus = synthetic_transcripts(30);
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < corpus.size(); ++i) keys.push_back("id" + std::to_string(i));
  CHECK(corrupt_corpus(corpus, keys, p) == corrupt_corpus_serial(corpus, keys, p));
  keys.pop_back();
  CHECK_THROWS_AS(corrupt_corpus(corpus, keys, p), ContractError);
}
