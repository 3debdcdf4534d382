// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "slubench/asr_sim.hpp"
#include "slubench/checkpoint.hpp"
#include "slubench/corpus.hpp"
#include "slubench/experiment.hpp"
#include "slubench/grad_suite.hpp"
#include "slubench/lattice.hpp"
#include "slubench/metrics.hpp"
#include "slubench/nn/crf.hpp"
#include "slubench/wcn.hpp"
#include "support.hpp"

using namespace slubench;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void criterion1() {
  auto t0 = Clock::now();
  auto fx = corpus::cleaning_fixture();
  auto res = corpus::filter_corpus(fx.records);
  auto stats = corpus::compute_stats(res.kept, fx.durations);
  double elapsed = seconds_since(t0);
  double drop = 100.0 * static_cast<double>(res.dropped.size()) / static_cast<double>(fx.records.size());
  bool pass = fx.records.size() == 72'277 && res.kept.size() == 50'568 && std::abs(drop - 30.0) <= 0.1 &&
              stats.n_close == 25'799 && stats.n_far == 24'769 && stats.n_intents == 47 && elapsed < 10.0;
  char buf[256];
  std::snprintf(buf, sizeof buf, "kept %zu of %zu (drop %.2f%%), close/far %zu/%zu, %zu intents, %.2f s",
                res.kept.size(), fx.records.size(), drop, stats.n_close, stats.n_far, stats.n_intents, elapsed);
  report(1, pass, buf);
}

void criterion2() {
  std::string a = format_half_up(metrics::relative_improvement(0.69, 0.72), 2);
  std::string b = format_half_up(metrics::relative_improvement(0.73, 0.86), 2);
  report(2, a == "4.35" && b == "17.81", "(0.69, 0.72) -> " + a + "%, (0.73, 0.86) -> " + b + "%");
}

void criterion3() {
  auto t0 = Clock::now();
  const Tokens words{"a", "b", "c"};
  double fb_err = 0.0, cut_err = 0.0;
  Rng rng(2022, "acceptance/fb");
  for (int trial = 0; trial < 500; ++trial) {
    auto l = testing::random_lattice(rng, 10, words);
    auto fb = lattice::forward_backward(l);
    auto paths = testing::enumerate_paths(l);
    std::vector<double> w;
    for (const auto& p : paths) w.push_back(p.weight);
    double log_z = testing::log_sum_exp(w);
    std::vector<double> expect(l.arcs.size(), 0.0);
    for (const auto& p : paths)
      for (std::size_t a : p.arcs) expect[a] += std::exp(p.weight - log_z);
    for (std::size_t a = 0; a < l.arcs.size(); ++a) fb_err = std::max(fb_err, std::abs(fb.posterior[a] - expect[a]));
    auto order = lattice::topological_order(l);
    std::vector<std::size_t> rank(l.nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
    for (std::size_t cut = 1; cut < order.size(); ++cut) {
      double s = 0.0;
      for (std::size_t a = 0; a < l.arcs.size(); ++a)
        if (rank[l.arcs[a].from] < cut && rank[l.arcs[a].to] >= cut) s += fb.posterior[a];
      cut_err = std::max(cut_err, std::abs(s - 1.0));
    }
  }
  std::size_t oracle_mismatch = 0;
  Rng rng2(2022, "acceptance/oracle");
  for (int trial = 0; trial < 500; ++trial) {
    auto l = testing::random_lattice(rng2, 8, words);
    Tokens ref(1 + rng2.index(6));
    for (auto& t : ref) t = words[rng2.index(words.size())];
    double brute = INFINITY;
    for (const auto& p : testing::enumerate_paths(l)) brute = std::min(brute, metrics::wer(ref, p.words));
    oracle_mismatch += std::abs(lattice::oracle_wer(l, ref).wer - brute) > 1e-12;
  }
  std::size_t oracle_worse = 0;
  auto grammar = corpus::default_grammar();
  auto records = corpus::generate_synthetic_corpus(grammar, 125);
  auto profile = asr::preset("unadapted", grammar.vocabulary(), 99);
  for (std::size_t i = 0; i < 1000; ++i) {
    Tokens gold = tokenize(records[i % records.size()].transcript);
    auto out = asr::simulate(gold, profile, "draw/" + std::to_string(i));
    double one = metrics::wer(gold, lattice::best_path(out.lattice).words);
    oracle_worse += lattice::oracle_wer(out.lattice, gold).wer > one + 1e-12;
  }
  double elapsed = seconds_since(t0);
  bool pass = fb_err <= 1e-9 && cut_err <= 1e-9 && oracle_mismatch == 0 && oracle_worse == 0 && elapsed < 60.0;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "posterior err %.2e, cut err %.2e, oracle mismatches %zu/500, oracle > 1-best %zu/1000, %.1f s",
                fb_err, cut_err, oracle_mismatch, oracle_worse, elapsed);
  report(3, pass, buf);
}

void criterion4() {
  Rng rng(2022, "acceptance/crf");
  double fwd_err = 0.0, vit_err = 0.0, min_nll = INFINITY;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t L = 1 + rng.index(5), K = 1 + rng.index(4);
    nn::Matrix E(L, K), T(K, K);
    for (auto& v : E.data) v = rng.uniform(-3, 3);
    for (auto& v : T.data) v = rng.uniform(-3, 3);
    std::vector<double> scores;
    std::vector<std::size_t> y(L, 0);
    while (true) {
      scores.push_back(nn::crf_sequence_score(E, T, y));
      std::size_t t = 0;
      while (t < L && ++y[t] == K) y[t++] = 0;
      if (t == L) break;
    }
    fwd_err = std::max(fwd_err, std::abs(nn::crf_forward(E, T) - testing::log_sum_exp(scores)));
    vit_err = std::max(vit_err, std::abs(nn::crf_viterbi(E, T).score - *std::max_element(scores.begin(), scores.end())));
    nn::ParamStore ps;
    ps.add("E", E);
    ps.add("T", T);
    std::vector<std::size_t> gold(L);
    for (auto& g : gold) g = rng.index(K);
    nn::Graph g;
    min_nll = std::min(min_nll, nn::crf_nll(g.param(ps, "E"), g.param(ps, "T"), gold).item());
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "forward err %.2e, viterbi err %.2e, min nll %.3e over 200 tables", fwd_err, vit_err,
                min_nll);
  report(4, fwd_err <= 1e-8 && vit_err <= 1e-8 && min_nll >= 0.0, buf);
}

void criterion5() {
  double worst = 0.0;
  std::string worst_block;
  std::size_t checks = 0;
  for (std::uint64_t seed : {3u, 7u, 10u})
    for (const auto& e : grad_suite::run_all(seed)) {
      ++checks;
      if (e.result.max_rel_error > worst) {
        worst = e.result.max_rel_error;
        worst_block = e.block + " (seed " + std::to_string(seed) + ")";
      }
    }
  double control = grad_suite::corrupted_control(3).result.max_rel_error;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu block checks, max rel error %.2e at %s; corrupted control %.2e", checks, worst,
                worst_block.c_str(), control);
  report(5, worst <= 1e-4 && control > 1e-2, buf);
}

void criterion6() {
  auto grammar = corpus::default_grammar();
  std::vector<Tokens> corpus;
  std::size_t tokens = 0;
  for (const auto& r : corpus::generate_synthetic_corpus(grammar, 2500)) {
    corpus.push_back(tokenize(r.transcript));
    tokens += corpus.back().size();
  }
  double un = asr::empirical_wer_of_profile(asr::preset("unadapted", grammar.vocabulary(), 31), corpus);
  double ad = asr::empirical_wer_of_profile(asr::preset("adapted", grammar.vocabulary(), 31), corpus);
  Rng rng(2022, "acceptance/f1");
  std::size_t identity_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng.index(50);
    std::vector<std::string> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = "c" + std::to_string(rng.index(6));
      pred[i] = "c" + std::to_string(rng.index(7));
    }
    identity_failures +=
        std::abs(metrics::f1_scores(gold, pred).micro - metrics::intent_accuracy(gold, pred)) > 1e-12;
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "unadapted WER %.4f, adapted WER %.4f over %zu tokens; F1 identity failures %zu/1000",
                un, ad, tokens, identity_failures);
  report(6, tokens >= 100'000 && std::abs(un - 0.344) <= 0.02 && std::abs(ad - 0.155) <= 0.02 &&
                identity_failures == 0,
         buf);
}

double test_accuracy(const metrics::EvalReport& r, const std::string& id) {
  for (const auto& row : r.rows)
    if (row.experiment == id && row.split == "test" && !row.failed) return row.accuracy;
  return NAN;
}

void criterion7() {
  auto cfg = experiment::default_matrix();
  auto t0 = Clock::now();
  auto res = experiment::run_matrix(cfg);
  double elapsed = seconds_since(t0);
  std::printf("%s", metrics::render_report(res.report, metrics::ReportFormat::markdown).c_str());

  std::map<std::string, double> acc;
  for (const auto& s : cfg.specs) acc[s.id] = test_accuracy(res.report, s.id);
  double text_dev = 0.0;
  for (std::size_t i = 0; i < cfg.specs.size(); ++i)
    if (cfg.specs[i].id == "EXP1")
      for (const auto& e : res.histories[i].history)
        if (e.epoch <= 30) text_dev = std::max(text_dev, e.dev_accuracy);
  const double slack = 0.01;
  bool manual_ge_wcn = acc["EXP1"] >= acc["EXP5"] - slack;
  bool wcn_ge_onebest = acc["EXP5"] >= acc["EXP4"] - slack;
  bool mm_ge_wcn = acc["EXP8"] >= acc["EXP5"] - slack;
  bool pass = !res.any_failed && manual_ge_wcn && wcn_ge_onebest && mm_ge_wcn && text_dev >= 0.90 &&
              elapsed <= 1800.0;
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "test ACC manual %.3f >= WCN %.3f >= 1-best %.3f; multimodal adapted (EXP8) %.3f >= WCN "
                "[EXP7 %.3f reported]; text dev %.3f within 30 epochs; %zu rows; %.0f s",
                acc["EXP1"], acc["EXP5"], acc["EXP4"], acc["EXP8"], acc["EXP7"], text_dev, res.report.rows.size(),
                elapsed);
  report(7, pass, buf);
}

void criterion8() {
  auto grammar = corpus::default_grammar(5);
  bool same = true;
  auto twice = [&](const std::function<std::string()>& f) { same = same && f() == f(); };
  twice([&] { return corpus::serialize_metadata(corpus::generate_synthetic_corpus(grammar, 10)); });
  twice([&] {
    auto profile = asr::preset("unadapted", grammar.vocabulary(), 4);
    std::string out;
    for (const auto& r : corpus::generate_synthetic_corpus(grammar, 5)) {
      auto lat = asr::synthesize_lattice(tokenize(r.transcript), profile, r.id);
      out += lattice::serialize_lattice(lat) + wcn::serialize_wcn(wcn::build_from_lattice(lat));
    }
    return out;
  });
  auto cfg = experiment::parse_config(
      "n_per_intent = 12\nepochs = 2\nd_model = 16\nhidden = 8\nn_layers = 1\n"
      "[T]\nfamily = text\ntrain_input = onebest\neval_input = onebest\nasr_profile = unadapted\n"
      "[W]\nfamily = wcn\ntrain_input = onebest\neval_input = wcn\nasr_profile = adapted\n"
      "[M]\nfamily = multimodal\ntrain_input = onebest\neval_input = multimodal\nasr_profile = adapted\n");
  auto data = experiment::prepare_corpus(cfg);
  twice([&] {
    auto r = experiment::run_matrix(cfg, data);
    return experiment::report_to_json(r.report) + experiment::render_histories(cfg, r);
  });
  for (const auto& spec : cfg.specs)
    twice([&] { return checkpoint::serialize(*experiment::train_experiment(spec, data).model); });
  report(8, same, same ? "corpus, lattices, WCNs, reports, histories and checkpoints byte-identical across repeats"
                       : "repeated runs differ");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
