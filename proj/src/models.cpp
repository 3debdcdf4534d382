#include "slubench/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "slubench/errors.hpp"
#include "slubench/metrics.hpp"
#include "slubench/nn/crf.hpp"
#include "slubench/nn/kernels.hpp"
#include "slubench/rng.hpp"

namespace slubench::models {

using nn::Matrix;
using nn::ParamStore;
using nn::Tensor;

std::string to_string(Family family) {
  switch (family) {
    case Family::text:
      return "text";
    case Family::wcn:
      return "wcn";
    case Family::multimodal:
      return "multimodal";
  }
  return "text";
}

Family parse_family(const std::string& name) {
  if (name == "text") return Family::text;
  if (name == "wcn") return Family::wcn;
  if (name == "multimodal") return Family::multimodal;
  throw ContractError("unknown model family '" + name + "'");
}

// --- Vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
  add(wcn::kEpsilon);
}

Vocabulary Vocabulary::build(const std::vector<Tokens>& sentences) {
  std::set<std::string> distinct;
  for (const auto& s : sentences) distinct.insert(s.begin(), s.end());
  Vocabulary v;
  for (const auto& t : distinct) v.add(t);
  return v;
}

std::size_t Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  tokens_.push_back(token);
  index_[token] = tokens_.size() - 1;
  return tokens_.size() - 1;
}

std::size_t Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

// --- LabelSpace ------------------------------------------------------------

LabelSpace::LabelSpace() { add_slot_tag("O"); }

LabelSpace LabelSpace::build(const corpus::Corpus& train) {
  std::set<std::string> intents, tags;
  for (const auto& r : train) {
    intents.insert(r.intent);
    tags.insert(r.slot_tags.begin(), r.slot_tags.end());
  }
  LabelSpace ls;
  for (const auto& i : intents) ls.add_intent(i);
  for (const auto& t : tags) ls.add_slot_tag(t);
  return ls;
}

std::size_t LabelSpace::add_intent(const std::string& intent) {
  if (auto it = intent_index_.find(intent); it != intent_index_.end()) return it->second;
  intents_.push_back(intent);
  intent_index_[intent] = intents_.size() - 1;
  return intents_.size() - 1;
}

std::size_t LabelSpace::add_slot_tag(const std::string& tag) {
  if (auto it = slot_index_.find(tag); it != slot_index_.end()) return it->second;
  slot_tags_.push_back(tag);
  slot_index_[tag] = slot_tags_.size() - 1;
  return slot_tags_.size() - 1;
}

std::size_t LabelSpace::intent_index(const std::string& intent) const {
  auto it = intent_index_.find(intent);
  if (it == intent_index_.end()) throw ContractError("unknown intent '" + intent + "'");
  return it->second;
}

std::size_t LabelSpace::slot_index(const std::string& tag) const {
  auto it = slot_index_.find(tag);
  return it == slot_index_.end() ? 0 : it->second;
}

// --- ModelConfig -----------------------------------------------------------

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || n_layers == 0 || hidden == 0 || max_len == 0 || acoustic_dim == 0)
    throw ContractError("model config: dimensions must be positive");
  if (d_model % n_heads != 0)
    throw ContractError("model config: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                        std::to_string(n_heads));
  if (n_intents == 0) throw ContractError("model config: n_intents must be positive");
  if (n_slot_tags == 0) throw ContractError("model config: n_slot_tags must be positive");
  if (!(multitask_weight >= 0.0 && multitask_weight <= 1.0))
    throw ContractError("model config: multitask_weight must lie in [0,1]");
}

// --- Model -----------------------------------------------------------------

Model::Model(ModelConfig config, Vocabulary vocab, LabelSpace labels)
    : config_(config), vocab_(std::move(vocab)), labels_(std::move(labels)), params_(config.seed) {
  config_.validate();
  if (config_.n_intents != labels_.intents().size())
    throw ContractError("model config: n_intents " + std::to_string(config_.n_intents) + " but " +
                        std::to_string(labels_.intents().size()) + " intent labels");
  if (config_.n_slot_tags != labels_.slot_tags().size())
    throw ContractError("model config: n_slot_tags " + std::to_string(config_.n_slot_tags) + " but " +
                        std::to_string(labels_.slot_tags().size()) + " slot tags");
  register_params();
}

void Model::register_params() {
  const std::size_t d = config_.d_model, v = vocab_.size();
  const auto attn = config_.attention();
  switch (config_.family) {
    case Family::text:
      params_.add("text.emb", v, d, nn::Init::embedding);
      params_.add("text.pos", config_.max_len, d, nn::Init::embedding);
      nn::add_gru(params_, "text.gru", d, config_.hidden, true);
      if (2 * config_.hidden != d) nn::add_linear(params_, "text.gru_proj", 2 * config_.hidden, d);
      nn::add_attention(params_, "text.attn", attn);
      nn::add_linear(params_, "text.intent", d, config_.n_intents);
      nn::add_linear(params_, "text.slot", d + config_.n_intents, config_.n_slot_tags);
      params_.add("text.crf", config_.n_slot_tags, config_.n_slot_tags, nn::Init::zeros);
      break;
    case Family::wcn:
      params_.add("wcn.emb", v, d, nn::Init::embedding);
      params_.add("wcn.pos", config_.max_len, d, nn::Init::embedding);
      for (std::size_t l = 0; l < config_.n_layers; ++l)
        nn::add_crossmodal_block(params_, "wcn.enc" + std::to_string(l), attn);
      nn::add_linear(params_, "wcn.intent", d, config_.n_intents);
      break;
    case Family::multimodal:
      params_.add("mm.emb", v, d, nn::Init::embedding);
      params_.add("mm.pos", config_.max_len, d, nn::Init::embedding);
      nn::add_linear(params_, "mm.tproj", d, d);
      nn::add_linear(params_, "mm.aproj", config_.acoustic_dim, d);
      for (std::size_t l = 0; l < config_.n_layers; ++l) {
        nn::add_crossmodal_block(params_, "mm.t_from_a" + std::to_string(l), attn);
        nn::add_crossmodal_block(params_, "mm.a_from_t" + std::to_string(l), attn);
      }
      nn::add_crossmodal_block(params_, "mm.self", attn);
      nn::add_linear(params_, "mm.fc1", d, d);
      nn::add_linear(params_, "mm.fc2", d, config_.n_intents);
      break;
  }
}

Tokens Model::truncate(const Tokens& tokens) const {
  if (tokens.empty()) throw ContractError("model input: empty token sequence");
  if (tokens.size() <= config_.max_len) return tokens;
  return Tokens(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(config_.max_len));
}

namespace {

Tensor positions(nn::Graph& g, const ParamStore& ps, const std::string& name, std::size_t len) {
  return nn::slice_rows(g.param(ps, name), 0, len);
}

}  // namespace

Encoded Model::encode_text(nn::Graph& g, const ParamStore& ps, const Tokens& tokens) const {
  if (config_.family != Family::text) throw ContractError("encode_text: model family is " + to_string(config_.family));
  Tokens t = truncate(tokens);
  std::vector<std::size_t> ids;
  for (const auto& w : t) ids.push_back(vocab_.index(w));
  Tensor x = nn::add(nn::embedding_gather(g.param(ps, "text.emb"), ids), positions(g, ps, "text.pos", t.size()));
  Tensor h = nn::gru_layer(ps, "text.gru", x, true);
  if (2 * config_.hidden != config_.d_model) h = nn::linear(ps, "text.gru_proj", h);
  Tensor seq = nn::add(h, nn::multi_head_self_attention(ps, "text.attn", h, config_.attention()));
  return {seq, nn::mean_rows(seq)};
}

TextOutputs Model::text_forward(const ParamStore& ps, const Encoded& enc) const {
  Tensor logits = nn::linear(ps, "text.intent", enc.pooled);
  Tensor post = nn::repeat_rows(nn::softmax_rows(logits), enc.seq.rows());
  Tensor emissions = nn::linear(ps, "text.slot", nn::concat_cols({enc.seq, post}));
  return {logits, emissions};
}

Encoded Model::wcn_attention_stack(const ParamStore& ps, Tensor embedded) const {
  nn::Graph& g = *embedded.graph();
  if (embedded.rows() > config_.max_len)
    throw ContractError("wcn: " + std::to_string(embedded.rows()) + " bins exceed max_len " +
                        std::to_string(config_.max_len));
  Tensor x = nn::add(embedded, positions(g, ps, "wcn.pos", embedded.rows()));
  for (std::size_t l = 0; l < config_.n_layers; ++l)
    x = nn::encoder_layer(ps, "wcn.enc" + std::to_string(l), x, config_.attention());
  return {x, nn::mean_rows(x)};
}

Encoded Model::encode_wcn(nn::Graph& g, const ParamStore& ps, const wcn::ConfusionNetwork& cn) const {
  if (config_.family != Family::wcn) throw ContractError("encode_wcn: model family is " + to_string(config_.family));
  if (cn.bins.empty()) throw ContractError("encode_wcn: empty confusion network");
  std::vector<nn::Mixture> mix;
  const std::size_t n = std::min(cn.bins.size(), config_.max_len);
  for (std::size_t b = 0; b < n; ++b) {
    const auto& bin = cn.bins[b];
    double sum = 0.0;
    nn::Mixture m;
    for (const auto& e : bin.entries) {
      sum += e.posterior;
      m.emplace_back(vocab_.index(e.token), e.posterior);
    }
    if (std::abs(sum - 1.0) > 1e-3)
      throw ContractError("encode_wcn: bin " + std::to_string(b) + " posteriors sum to " + format_double(sum));
    mix.push_back(std::move(m));
  }
  return wcn_attention_stack(ps, nn::embedding_mix(g.param(ps, "wcn.emb"), mix));
}

Tensor Model::text_stream(nn::Graph& g, const ParamStore& ps, const Tokens& tokens) const {
  if (config_.family != Family::multimodal)
    throw ContractError("text_stream: model family is " + to_string(config_.family));
  Tokens t = truncate(tokens);
  std::vector<std::size_t> ids;
  for (const auto& w : t) ids.push_back(vocab_.index(w));
  return nn::add(nn::embedding_gather(g.param(ps, "mm.emb"), ids), positions(g, ps, "mm.pos", t.size()));
}

Tensor Model::encode_multimodal(const ParamStore& ps, Tensor text, Tensor acoustic) const {
  if (config_.family != Family::multimodal)
    throw ContractError("encode_multimodal: model family is " + to_string(config_.family));
  if (text.rows() == 0 || acoustic.rows() == 0) throw ContractError("encode_multimodal: zero-length stream");
  if (acoustic.cols() != config_.acoustic_dim)
    throw ContractError("encode_multimodal: acoustic width " + std::to_string(acoustic.cols()) + ", expected " +
                        std::to_string(config_.acoustic_dim));
  nn::Graph& g = *text.graph();
  const auto attn = config_.attention();
  Tensor xt = nn::linear(ps, "mm.tproj", text);
  Tensor xa = nn::add(nn::linear(ps, "mm.aproj", acoustic),
                      g.constant(nn::sinusoidal_positions(acoustic.rows(), config_.d_model)));
  Tensor ht = xt, ha = xa;
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    Tensor nt = nn::crossmodal_block(ps, "mm.t_from_a" + std::to_string(l), ht, xa, attn);
    Tensor na = nn::crossmodal_block(ps, "mm.a_from_t" + std::to_string(l), ha, xt, attn);
    ht = nt;
    ha = na;
  }
  Tensor fused = nn::encoder_layer(ps, "mm.self", nn::concat_rows({ht, ha}), attn);
  return nn::slice_rows(fused, fused.rows() - 1, fused.rows());
}

Tensor Model::intent_logits(nn::Graph& g, const ParamStore& ps, const ModelInput& in) const {
  switch (config_.family) {
    case Family::text:
      return nn::linear(ps, "text.intent", encode_text(g, ps, in.tokens).pooled);
    case Family::wcn:
      return nn::linear(ps, "wcn.intent", encode_wcn(g, ps, in.cn).pooled);
    case Family::multimodal: {
      Tensor last = encode_multimodal(ps, text_stream(g, ps, in.tokens), g.constant(in.acoustic));
      return nn::linear(ps, "mm.fc2", nn::relu(nn::linear(ps, "mm.fc1", last)));
    }
  }
  throw ContractError("intent_logits: unknown family");
}

Tensor Model::loss(nn::Graph& g, const ParamStore& ps, const Example& ex) const {
  if (ex.intent >= config_.n_intents) throw ContractError("loss: intent index out of range");
  if (config_.family != Family::text) return nn::cross_entropy(intent_logits(g, ps, ex.input), {ex.intent});
  Encoded enc = encode_text(g, ps, ex.input.tokens);
  TextOutputs out = text_forward(ps, enc);
  const double w = config_.multitask_weight;
  Tensor ce = nn::cross_entropy(out.intent_logits, {ex.intent});
  if (ex.slots.empty() || w == 1.0) return ex.slots.empty() ? ce : nn::scale(ce, w);
  if (ex.slots.size() < enc.seq.rows()) throw ContractError("loss: fewer slot tags than tokens");
  std::vector<std::size_t> gold(ex.slots.begin(),
                                ex.slots.begin() + static_cast<std::ptrdiff_t>(enc.seq.rows()));
  Tensor crf = nn::crf_nll(out.slot_emissions, g.param(ps, "text.crf"), gold);
  if (w == 0.0) return crf;
  return nn::add(nn::scale(ce, w), nn::scale(crf, 1.0 - w));
}

std::vector<double> Model::logits(const ModelInput& in) const {
  nn::Graph g;
  return intent_logits(g, params_, in).value().data;
}

std::size_t argmax_first(const std::vector<double>& values) {
  if (values.empty()) throw ContractError("argmax: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t Model::predict_index(const ModelInput& in) const { return argmax_first(logits(in)); }

std::string Model::predict(const ModelInput& in) const { return labels_.intents()[predict_index(in)]; }

std::vector<std::string> predict_batch(const Model& model, const std::vector<ModelInput>& inputs) {
  std::vector<std::string> out(inputs.size());
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = model.predict(inputs[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<std::string> predict_batch_serial(const Model& model, const std::vector<ModelInput>& inputs) {
  std::vector<std::string> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(model.predict(in));
  return out;
}

Matrix make_acoustic_features(const Tokens& transcript, std::size_t frames_per_token, double noise_sd,
                              std::uint64_t seed, std::size_t dim) {
  if (frames_per_token == 0) throw ContractError("acoustic features: frames_per_token must be at least 1");
  if (noise_sd < 0.0) throw ContractError("acoustic features: noise_sd must be non-negative");
  Matrix m(transcript.size() * frames_per_token, dim);
  Rng noise(seed, "acoustic");
  std::size_t row = 0;
  for (const auto& tok : transcript) {
    Rng code_rng(0, "acoustic-code/" + tok);
    std::vector<double> code(dim);
    for (auto& c : code) c = code_rng.normal();
    for (std::size_t f = 0; f < frames_per_token; ++f, ++row)
      for (std::size_t k = 0; k < dim; ++k) m(row, k) = code[k] + (noise_sd > 0.0 ? noise.normal(0.0, noise_sd) : 0.0);
  }
  return m;
}

std::vector<std::string> project_slot_tags(const Tokens& reference, const std::vector<std::string>& tags,
                                           const Tokens& hypothesis) {
  if (tags.size() != reference.size()) throw ContractError("project_slot_tags: tag count does not match reference");
  std::vector<std::string> out(hypothesis.size(), "O");
  if (hypothesis.empty()) return out;
  for (const auto& op : metrics::align_ops(reference, hypothesis)) {
    if (op.kind == metrics::EditKind::hit || op.kind == metrics::EditKind::substitution)
      out[op.hyp_index] = tags[op.ref_index];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].rfind("I-", 0) != 0) continue;
    const std::string label = out[i].substr(2);
    bool continues = i > 0 && (out[i - 1] == "B-" + label || out[i - 1] == "I-" + label);
    if (!continues) out[i] = "B-" + label;
  }
  return out;
}

// --- training --------------------------------------------------------------

double batch_gradient(Model& model, const std::vector<const Example*>& batch, bool parallel) {
  ParamStore& ps = model.params();
  ps.zero_grad();
  if (batch.empty()) return 0.0;
  const std::size_t n = batch.size();
  std::vector<std::map<std::string, Matrix>> grads(n);
  std::vector<double> losses(n, 0.0);
  const Model& cm = model;
  auto one = [&](std::size_t i) {
    nn::Graph g;
    Tensor l = cm.loss(g, cm.params(), *batch[i]);
    g.backward(l);
    losses[i] = l.item();
    grads[i] = g.param_grads();
  };
  const auto sn = static_cast<std::ptrdiff_t>(n);
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < sn; ++i) one(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) one(i);
  }
  const double inv = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += losses[i];
    for (const auto& [name, g] : grads[i]) nn::kernels::axpy(inv, g, ps.at(name).grad);
  }
  return total * inv;
}

namespace {

struct DevScore {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Accuracy and mean intent cross-entropy; examples whose intent is outside
// the label space count as errors and add no loss.
DevScore dev_score(const Model& model, const std::vector<Example>& examples) {
  const std::size_t n_intents = model.config().n_intents;
  std::vector<std::size_t> pred(examples.size());
  std::vector<double> loss(examples.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(examples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    nn::Graph g;
    Tensor logits = model.intent_logits(g, model.params(), examples[k].input);
    pred[k] = argmax_first(logits.value().data);
    if (examples[k].intent < n_intents) loss[k] = nn::cross_entropy(logits, {examples[k].intent}).item();
  }
  DevScore s;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    hit += pred[i] == examples[i].intent ? 1 : 0;
    s.loss += loss[i];
  }
  if (!examples.empty()) {
    s.accuracy = static_cast<double>(hit) / static_cast<double>(examples.size());
    s.loss /= static_cast<double>(examples.size());
  }
  return s;
}

}  // namespace

double accuracy(const Model& model, const std::vector<Example>& examples) {
  return dev_score(model, examples).accuracy;
}

TrainResult train(Model& model, const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const TrainConfig& cfg) {
  if (train_set.empty()) throw ContractError("train: empty training set");
  if (dev_set.empty()) throw ContractError("train: empty dev set");
  if (!(cfg.lr > 0.0)) throw ContractError("train: lr must be positive");
  if (cfg.batch == 0) throw ContractError("train: batch must be positive");

  TrainResult res;
  std::map<std::string, Matrix> best;
  auto snapshot = [&] {
    best.clear();
    for (const auto& [name, p] : model.params()) best[name] = p.value;
  };
  snapshot();
  bool have_best = false;
  double best_loss = 0.0;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed, "epoch/" + std::to_string(e));
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      std::vector<const Example*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch); ++i) batch.push_back(&train_set[order[i]]);
      loss_sum += batch_gradient(model, batch, cfg.parallel) * static_cast<double>(batch.size());
      nn::sgd_step(model.params(), cfg.lr, cfg.clip);
    }
    DevScore dev = dev_score(model, dev_set);
    EpochLog log{e, loss_sum / static_cast<double>(order.size()), dev.accuracy, dev.loss};
    res.history.push_back(log);
    if (!have_best || dev.accuracy > res.best_dev_accuracy ||
        (dev.accuracy == res.best_dev_accuracy && dev.loss < best_loss)) {
      have_best = true;
      res.best_epoch = e;
      res.best_dev_accuracy = dev.accuracy;
      best_loss = dev.loss;
      snapshot();
    }
  }
  for (auto& [name, p] : model.params()) p.value = best.at(name);
  model.params().zero_grad();
  return res;
}

}  // namespace slubench::models
