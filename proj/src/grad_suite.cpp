#include "slubench/grad_suite.hpp"

#include "slubench/errors.hpp"
#include "slubench/models.hpp"
#include "slubench/nn/crf.hpp"
#include "slubench/nn/layers.hpp"
#include "slubench/rng.hpp"

namespace slubench::grad_suite {

using nn::Graph;
using nn::Matrix;
using nn::ParamStore;
using nn::Tensor;

namespace {

constexpr std::size_t kD = 8;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, const std::string& key) {
  Rng rng(seed, key);
  Matrix m(r, c);
  for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

// sum(out * R) for a fixed R with entries in [-0.1, 0.1]. Small weights
// keep the loss near 1, which bounds roundoff in the differences.
Tensor project(Tensor out, std::uint64_t seed) {
  Graph& g = *out.graph();
  Matrix r = random_matrix(out.rows(), out.cols(), seed, "projection");
  for (auto& v : r.data) v *= 0.1;
  return nn::sum_all(nn::mul(out, g.constant(std::move(r))));
}

nn::GradCheckResult check(const nn::LossFn& f, ParamStore& ps, std::uint64_t seed, nn::GradCheckOptions opts) {
  opts.seed = seed;
  return nn::gradient_check(f, ps, opts);
}

models::Model tiny_model(models::Family family, std::uint64_t seed) {
  models::Vocabulary vocab;
  for (const char* w : {"wake", "me", "up", "at", "seven", "turn", "on", "lights"}) vocab.add(w);
  models::LabelSpace labels;
  labels.add_intent("alarm_set");
  labels.add_intent("lights_on");
  labels.add_intent("alarm_query");
  labels.add_slot_tag("B-time");
  labels.add_slot_tag("I-time");
  models::ModelConfig cfg;
  cfg.family = family;
  cfg.d_model = kD;
  cfg.n_heads = 2;
  cfg.n_layers = 1;
  cfg.hidden = 3;  // 2 * hidden != d_model exercises the projection
  cfg.n_intents = 3;
  cfg.n_slot_tags = 3;
  cfg.max_len = 8;
  cfg.acoustic_dim = 4;
  cfg.seed = seed;
  return models::Model(cfg, vocab, labels);
}

Entry run(const std::string& block, std::uint64_t seed, const nn::GradCheckOptions& opts) {
  const nn::AttentionConfig attn{kD, 2, false};
  if (block == "attention") {
    ParamStore ps(seed);
    nn::add_attention(ps, "attn", attn);
    ps.add("x", random_matrix(5, kD, seed, "x"));
    std::vector<bool> mask = {true, true, true, false, true};
    auto f = [&](Graph& g, const ParamStore& p) {
      return project(nn::multi_head_self_attention(p, "attn", g.param(p, "x"), attn, &mask), seed);
    };
    return {block, check(f, ps, seed, opts)};
  }
  if (block == "causal_attention") {
    ParamStore ps(seed);
    nn::AttentionConfig causal{kD, 4, true};
    nn::add_attention(ps, "attn", causal);
    ps.add("x", random_matrix(4, kD, seed, "x"));
    auto f = [&](Graph& g, const ParamStore& p) {
      return project(nn::multi_head_self_attention(p, "attn", g.param(p, "x"), causal), seed);
    };
    return {block, check(f, ps, seed, opts)};
  }
  if (block == "crossmodal") {
    ParamStore ps(seed);
    nn::add_crossmodal_block(ps, "cm", attn);
    ps.add("t", random_matrix(5, kD, seed, "t"));
    ps.add("s", random_matrix(9, kD, seed, "s"));
    auto f = [&](Graph& g, const ParamStore& p) {
      return project(nn::crossmodal_block(p, "cm", g.param(p, "t"), g.param(p, "s"), attn), seed);
    };
    return {block, check(f, ps, seed, opts)};
  }
  if (block == "gru") {
    ParamStore ps(seed);
    nn::add_gru(ps, "gru", 5, 4, true);
    // Nonzero biases so the bias paths are exercised away from zero.
    for (const char* b : {"gru.fw.bx", "gru.fw.bh", "gru.bw.bx", "gru.bw.bh"})
      ps.at(b).value = random_matrix(1, 12, seed, b);
    ps.add("x", random_matrix(4, 5, seed, "x"));
    auto f = [&](Graph& g, const ParamStore& p) { return project(nn::gru_layer(p, "gru", g.param(p, "x"), true), seed); };
    return {block, check(f, ps, seed, opts)};
  }
  if (block == "crf") {
    ParamStore ps(seed);
    ps.add("E", random_matrix(5, 4, seed, "E"));
    ps.add("T", random_matrix(4, 4, seed, "T"));
    std::vector<std::size_t> gold = {0, 3, 3, 1, 2};
    auto f = [&](Graph& g, const ParamStore& p) { return nn::crf_nll(g.param(p, "E"), g.param(p, "T"), gold); };
    return {block, check(f, ps, seed, opts)};
  }
  if (block == "text_model") {
    models::Model m = tiny_model(models::Family::text, seed);
    m.params().at("text.crf").value = random_matrix(3, 3, seed, "crf");
    models::Example ex;
    ex.input.tokens = {"wake", "me", "up", "at", "seven", "oov"};
    ex.intent = 0;
    ex.slots = {0, 0, 0, 0, 1, 2};
    auto f = [&](Graph& g, const ParamStore& p) { return m.loss(g, p, ex); };
    return {block, check(f, m.params(), seed, opts)};
  }
  if (block == "wcn_model") {
    models::Model m = tiny_model(models::Family::wcn, seed);
    models::Example ex;
    ex.input.cn.bins = {{{{"turn", 0.7}, {"<eps>", 0.3}}, 0.0, 0.3},
                        {{{"on", 0.5}, {"me", 0.25}, {"up", 0.25}}, 0.3, 0.6},
                        {{{"lights", 1.0}}, 0.6, 0.9}};
    ex.intent = 1;
    auto f = [&](Graph& g, const ParamStore& p) { return m.loss(g, p, ex); };
    return {block, check(f, m.params(), seed, opts)};
  }
  if (block == "multimodal_model") {
    models::Model m = tiny_model(models::Family::multimodal, seed);
    models::Example ex;
    ex.input.tokens = {"turn", "on", "lights"};
    ex.input.acoustic = models::make_acoustic_features({"turn", "on", "the", "lights"}, 2, 0.5, seed, 4);
    ex.intent = 1;
    auto f = [&](Graph& g, const ParamStore& p) { return m.loss(g, p, ex); };
    return {block, check(f, m.params(), seed, opts)};
  }
  throw ContractError("unknown gradient-check block '" + block + "'");
}

}  // namespace

const std::vector<std::string>& block_names() {
  static const std::vector<std::string> names = {"attention", "causal_attention", "crossmodal", "gru",
                                                 "crf",       "text_model",       "wcn_model",  "multimodal_model"};
  return names;
}

Entry check_block(const std::string& block, std::uint64_t seed, const nn::GradCheckOptions& opts) {
  return run(block, seed, opts);
}

std::vector<Entry> run_all(std::uint64_t seed, const nn::GradCheckOptions& opts) {
  std::vector<Entry> out;
  for (const auto& b : block_names()) out.push_back(run(b, seed, opts));
  return out;
}

Entry corrupted_control(std::uint64_t seed) {
  nn::GradCheckOptions opts;
  opts.tamper = [](std::map<std::string, Matrix>& grads) {
    for (auto& v : grads.at("attn.v.W").data) v *= 1.1;
  };
  Entry e = run("attention", seed, opts);
  e.block = "attention (corrupted)";
  return e;
}

}  // namespace slubench::grad_suite
