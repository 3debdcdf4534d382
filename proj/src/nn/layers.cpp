#include "slubench/nn/layers.hpp"

#include <cmath>
#include <limits>

#include "slubench/errors.hpp"

namespace slubench::nn {

namespace {

Tensor p(const ParamStore& ps, Tensor like, const std::string& name) { return like.graph()->param(ps, name); }

void check_width(const char* op, Tensor x, std::size_t d) {
  if (x.cols() != d)
    throw ContractError(std::string(op) + ": expected width " + std::to_string(d) + ", got " +
                        shape_string(x.value()));
}

}  // namespace

void AttentionConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw ContractError("attention: d_model " + std::to_string(d_model) + " not divisible by " +
                        std::to_string(n_heads) + " heads");
}

void add_linear(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t out) {
  ps.add(prefix + ".W", in, out, Init::fan_in_uniform);
  ps.add(prefix + ".b", 1, out, Init::zeros);
}

Tensor linear(const ParamStore& ps, const std::string& prefix, Tensor x) {
  return add(matmul(x, p(ps, x, prefix + ".W")), p(ps, x, prefix + ".b"));
}

void add_layer_norm(ParamStore& ps, const std::string& prefix, std::size_t d) {
  ps.add(prefix + ".g", 1, d, Init::ones);
  ps.add(prefix + ".b", 1, d, Init::zeros);
}

Tensor layer_norm(const ParamStore& ps, const std::string& prefix, Tensor x) {
  return layer_norm(x, p(ps, x, prefix + ".g"), p(ps, x, prefix + ".b"));
}

void add_feed_forward(ParamStore& ps, const std::string& prefix, std::size_t d, std::size_t d_ff) {
  add_linear(ps, prefix + ".fc1", d, d_ff);
  add_linear(ps, prefix + ".fc2", d_ff, d);
}

Tensor feed_forward(const ParamStore& ps, const std::string& prefix, Tensor x) {
  return linear(ps, prefix + ".fc2", relu(linear(ps, prefix + ".fc1", x)));
}

void add_attention(ParamStore& ps, const std::string& prefix, const AttentionConfig& cfg) {
  cfg.validate();
  for (const char* name : {".q", ".k", ".v", ".o"}) add_linear(ps, prefix + name, cfg.d_model, cfg.d_model);
}

Tensor multi_head_attention(const ParamStore& ps, const std::string& prefix, Tensor target, Tensor source,
                            const AttentionConfig& cfg, const std::vector<bool>* key_mask,
                            std::vector<Matrix>* weights_out) {
  cfg.validate();
  check_width("attention target", target, cfg.d_model);
  check_width("attention source", source, cfg.d_model);
  const std::size_t lt = target.rows(), ls = source.rows();
  if (lt == 0 || ls == 0) throw ContractError("attention: empty sequence");
  if (key_mask && key_mask->size() != ls)
    throw ContractError("attention: key mask has " + std::to_string(key_mask->size()) + " entries for " +
                        std::to_string(ls) + " keys");

  Matrix mask(lt, ls, 1.0);
  bool masked = false;
  for (std::size_t i = 0; i < lt; ++i)
    for (std::size_t j = 0; j < ls; ++j)
      if ((key_mask && !(*key_mask)[j]) || (cfg.causal && j > i)) {
        mask(i, j) = 0.0;
        masked = true;
      }

  Tensor q = linear(ps, prefix + ".q", target);
  Tensor k = linear(ps, prefix + ".k", source);
  Tensor v = linear(ps, prefix + ".v", source);
  const std::size_t dh = cfg.d_model / cfg.n_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  if (weights_out) weights_out->clear();
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor w = softmax_rows(scale(matmul(qh, transpose(kh)), sc), masked ? &mask : nullptr);
    if (weights_out) weights_out->push_back(w.value());
    heads.push_back(matmul(w, vh));
  }
  Tensor cat = heads.size() == 1 ? heads.front() : concat_cols(heads);
  return linear(ps, prefix + ".o", cat);
}

Tensor multi_head_self_attention(const ParamStore& ps, const std::string& prefix, Tensor x,
                                 const AttentionConfig& cfg, const std::vector<bool>* key_mask,
                                 std::vector<Matrix>* weights_out) {
  return multi_head_attention(ps, prefix, x, x, cfg, key_mask, weights_out);
}

void add_crossmodal_block(ParamStore& ps, const std::string& prefix, const AttentionConfig& cfg) {
  add_attention(ps, prefix + ".attn", cfg);
  add_layer_norm(ps, prefix + ".ln1", cfg.d_model);
  add_feed_forward(ps, prefix + ".ffn", cfg.d_model, 2 * cfg.d_model);
  add_layer_norm(ps, prefix + ".ln2", cfg.d_model);
}

Tensor crossmodal_block(const ParamStore& ps, const std::string& prefix, Tensor target, Tensor source,
                        const AttentionConfig& cfg, const std::vector<bool>* source_mask) {
  Tensor a = multi_head_attention(ps, prefix + ".attn", target, source, cfg, source_mask);
  Tensor h = layer_norm(ps, prefix + ".ln1", add(target, a));
  return layer_norm(ps, prefix + ".ln2", add(h, feed_forward(ps, prefix + ".ffn", h)));
}

Tensor encoder_layer(const ParamStore& ps, const std::string& prefix, Tensor x, const AttentionConfig& cfg,
                     const std::vector<bool>* key_mask) {
  return crossmodal_block(ps, prefix, x, x, cfg, key_mask);
}

void add_gru(ParamStore& ps, const std::string& prefix, std::size_t d_in, std::size_t hidden,
             bool bidirectional) {
  if (d_in == 0 || hidden == 0) throw ContractError("gru: dimensions must be positive");
  for (const char* dir : {".fw", ".bw"}) {
    if (!bidirectional && std::string(dir) == ".bw") break;
    ps.add(prefix + dir + ".Wx", d_in, 3 * hidden, Init::fan_in_uniform);
    ps.add(prefix + dir + ".bx", 1, 3 * hidden, Init::zeros);
    ps.add(prefix + dir + ".Wh", hidden, 3 * hidden, Init::fan_in_uniform);
    ps.add(prefix + dir + ".bh", 1, 3 * hidden, Init::zeros);
  }
}

namespace {

// One direction; returns L x hidden with row t the state after position t.
Tensor gru_direction(const ParamStore& ps, const std::string& prefix, Tensor x, bool reverse) {
  Graph& g = *x.graph();
  Tensor wx = g.param(ps, prefix + ".Wx");
  if (wx.rows() != x.cols())
    throw ContractError("gru: input " + shape_string(x.value()) + " vs weights " + shape_string(wx.value()));
  Tensor wh = g.param(ps, prefix + ".Wh");
  Tensor bh = g.param(ps, prefix + ".bh");
  const std::size_t hidden = wh.rows();
  const std::size_t len = x.rows();
  Tensor xp = add(matmul(x, wx), g.param(ps, prefix + ".bx"));
  Tensor h = g.constant(Matrix(1, hidden));
  std::vector<Tensor> states(len);
  for (std::size_t s = 0; s < len; ++s) {
    std::size_t t = reverse ? len - 1 - s : s;
    Tensor xt = slice_rows(xp, t, t + 1);
    Tensor hp = add(matmul(h, wh), bh);
    Tensor z = sigmoid(add(slice_cols(xt, 0, hidden), slice_cols(hp, 0, hidden)));
    Tensor r = sigmoid(add(slice_cols(xt, hidden, 2 * hidden), slice_cols(hp, hidden, 2 * hidden)));
    Tensor n = tanh(add(slice_cols(xt, 2 * hidden, 3 * hidden), mul(r, slice_cols(hp, 2 * hidden, 3 * hidden))));
    h = add(n, mul(z, sub(h, n)));
    states[t] = h;
  }
  return len == 1 ? states.front() : concat_rows(states);
}

}  // namespace

Tensor gru_layer(const ParamStore& ps, const std::string& prefix, Tensor x, bool bidirectional) {
  if (x.rows() == 0) throw ContractError("gru: empty sequence");
  Tensor fw = gru_direction(ps, prefix + ".fw", x, false);
  if (!bidirectional) return fw;
  return concat_cols({fw, gru_direction(ps, prefix + ".bw", x, true)});
}

Matrix sinusoidal_positions(std::size_t length, std::size_t d) {
  Matrix m(length, d);
  for (std::size_t pos = 0; pos < length; ++pos)
    for (std::size_t i = 0; i < d; ++i) {
      double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      double a = static_cast<double>(pos) * rate;
      m(pos, i) = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  return m;
}

}  // namespace slubench::nn
