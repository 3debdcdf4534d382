#pragma once

#include <string>
#include <vector>

#include "slubench/nn/graph.hpp"

// Parameterized blocks. Each block has an add_* function that registers its
// parameters under a name prefix and a forward function that reads them back
// from the same store. Inputs are sequences laid out one position per row.
namespace slubench::nn {

struct AttentionConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  bool causal = false;

  // Throws ContractError unless d_model > 0 and divisible by n_heads.
  void validate() const;
};

// y = x W + b with W in x in, b 1 x out.
void add_linear(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t out);
Tensor linear(const ParamStore& ps, const std::string& prefix, Tensor x);

void add_layer_norm(ParamStore& ps, const std::string& prefix, std::size_t d);
Tensor layer_norm(const ParamStore& ps, const std::string& prefix, Tensor x);

// relu(x W1 + b1) W2 + b2
void add_feed_forward(ParamStore& ps, const std::string& prefix, std::size_t d, std::size_t d_ff);
Tensor feed_forward(const ParamStore& ps, const std::string& prefix, Tensor x);

// Q/K/V/output projections, all d_model x d_model.
void add_attention(ParamStore& ps, const std::string& prefix, const AttentionConfig& cfg);

// Queries from target (Lt x d), keys and values from source (Ls x d).
// key_mask, when given, has Ls entries; false marks padding. Under
// cfg.causal query i sees keys j <= i. weights_out, when given, receives one
// Lt x Ls matrix per head.
Tensor multi_head_attention(const ParamStore& ps, const std::string& prefix, Tensor target, Tensor source,
                            const AttentionConfig& cfg, const std::vector<bool>* key_mask = nullptr,
                            std::vector<Matrix>* weights_out = nullptr);
Tensor multi_head_self_attention(const ParamStore& ps, const std::string& prefix, Tensor x,
                                 const AttentionConfig& cfg, const std::vector<bool>* key_mask = nullptr,
                                 std::vector<Matrix>* weights_out = nullptr);

// Post-norm block: h = LN(target + Attn(target, source)), out = LN(h + FFN(h)).
// The output always has target's length. With source = target this is a
// standard self-attention encoder layer.
void add_crossmodal_block(ParamStore& ps, const std::string& prefix, const AttentionConfig& cfg);
Tensor crossmodal_block(const ParamStore& ps, const std::string& prefix, Tensor target, Tensor source,
                        const AttentionConfig& cfg, const std::vector<bool>* source_mask = nullptr);
Tensor encoder_layer(const ParamStore& ps, const std::string& prefix, Tensor x, const AttentionConfig& cfg,
                     const std::vector<bool>* key_mask = nullptr);

// GRU with update gate z, reset gate r and candidate n:
//   n = tanh(x Wn + bn + r * (h Un + bun)),  h' = n + z * (h - n).
// Bidirectional output concatenates forward and backward states per row.
void add_gru(ParamStore& ps, const std::string& prefix, std::size_t d_in, std::size_t hidden,
             bool bidirectional);
Tensor gru_layer(const ParamStore& ps, const std::string& prefix, Tensor x, bool bidirectional);

// Sinusoidal position codes, L x d.
Matrix sinusoidal_positions(std::size_t length, std::size_t d);

}  // namespace slubench::nn
