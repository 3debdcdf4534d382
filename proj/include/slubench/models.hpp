#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slubench/corpus.hpp"
#include "slubench/nn/graph.hpp"
#include "slubench/nn/layers.hpp"
#include "slubench/text.hpp"
#include "slubench/wcn.hpp"

namespace slubench::models {

enum class Family { text, wcn, multimodal };
std::string to_string(Family family);
Family parse_family(const std::string& name);  // ContractError on unknown names

// Token index map with fixed specials.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kEps = 2;

  Vocabulary();
  // Specials first, then the distinct tokens in sorted order.
  static Vocabulary build(const std::vector<Tokens>& sentences);

  std::size_t add(const std::string& token);
  // Unknown tokens map to kUnk; "<eps>" maps to kEps.
  std::size_t index(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> index_;
};

// Intent and BIO slot-tag indices. Slot tag "O" is always index 0.
class LabelSpace {
 public:
  LabelSpace();
  static LabelSpace build(const corpus::Corpus& train);

  std::size_t add_intent(const std::string& intent);
  std::size_t add_slot_tag(const std::string& tag);

  bool has_intent(const std::string& intent) const { return intent_index_.count(intent) > 0; }
  std::size_t intent_index(const std::string& intent) const;  // ContractError if unknown
  // Unknown tags map to "O".
  std::size_t slot_index(const std::string& tag) const;
  const std::vector<std::string>& intents() const { return intents_; }
  const std::vector<std::string>& slot_tags() const { return slot_tags_; }

 private:
  std::vector<std::string> intents_;
  std::vector<std::string> slot_tags_;
  std::map<std::string, std::size_t> intent_index_;
  std::map<std::string, std::size_t> slot_index_;
};

struct ModelConfig {
  Family family = Family::text;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t hidden = 32;
  std::size_t n_intents = 0;
  std::size_t n_slot_tags = 1;
  double multitask_weight = 0.5;
  std::size_t max_len = 64;
  std::size_t acoustic_dim = 16;
  std::uint64_t seed = 0;

  void validate() const;
  nn::AttentionConfig attention() const { return {d_model, n_heads, false}; }
};

// What a model reads for one utterance. Text uses tokens, wcn uses cn,
// multimodal uses tokens and acoustic.
struct ModelInput {
  Tokens tokens;
  wcn::ConfusionNetwork cn;
  nn::Matrix acoustic;
};

struct Example {
  ModelInput input;
  std::size_t intent = 0;
  std::vector<std::size_t> slots;  // per token; empty disables the tagging loss
};

struct Encoded {
  nn::Tensor seq;     // L x d_model
  nn::Tensor pooled;  // 1 x d_model
};

struct TextOutputs {
  nn::Tensor intent_logits;   // 1 x n_intents
  nn::Tensor slot_emissions;  // L x n_slot_tags
};

class Model {
 public:
  Model(ModelConfig config, Vocabulary vocab, LabelSpace labels);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const LabelSpace& labels() const { return labels_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Forward passes over an explicit store so gradient checks can perturb it.
  Encoded encode_text(nn::Graph& g, const nn::ParamStore& ps, const Tokens& tokens) const;
  TextOutputs text_forward(const nn::ParamStore& ps, const Encoded& enc) const;
  Encoded encode_wcn(nn::Graph& g, const nn::ParamStore& ps, const wcn::ConfusionNetwork& cn) const;
  // Position embeddings and the attention stack of the wcn family applied to
  // already embedded rows.
  Encoded wcn_attention_stack(const nn::ParamStore& ps, nn::Tensor embedded) const;
  nn::Tensor text_stream(nn::Graph& g, const nn::ParamStore& ps, const Tokens& tokens) const;
  // Crossmodal fusion of an embedded text stream (Lt x d_model) and an
  // acoustic stream (La x acoustic_dim); returns the 1 x d_model state read
  // by the classifier.
  nn::Tensor encode_multimodal(const nn::ParamStore& ps, nn::Tensor text, nn::Tensor acoustic) const;

  nn::Tensor intent_logits(nn::Graph& g, const nn::ParamStore& ps, const ModelInput& in) const;
  nn::Tensor loss(nn::Graph& g, const nn::ParamStore& ps, const Example& ex) const;

  std::vector<double> logits(const ModelInput& in) const;
  std::size_t predict_index(const ModelInput& in) const;
  std::string predict(const ModelInput& in) const;

 private:
  void register_params();
  Tokens truncate(const Tokens& tokens) const;

  ModelConfig config_;
  Vocabulary vocab_;
  LabelSpace labels_;
  nn::ParamStore params_;
};

// Index of the largest value; ties go to the smallest index.
std::size_t argmax_first(const std::vector<double>& values);

// Predictions for many inputs; the parallel version matches the serial one.
std::vector<std::string> predict_batch(const Model& model, const std::vector<ModelInput>& inputs);
std::vector<std::string> predict_batch_serial(const Model& model, const std::vector<ModelInput>& inputs);

// Synthetic speech stand-in: per token a fixed code seeded only by the token
// text, repeated frames_per_token times with N(0, noise_sd) noise drawn from
// the stream (seed, "acoustic"). Returns (frames_per_token * L) x dim.
nn::Matrix make_acoustic_features(const Tokens& transcript, std::size_t frames_per_token, double noise_sd,
                                  std::uint64_t seed, std::size_t dim = 16);

// Carries gold BIO tags onto a hypothesis through the word alignment:
// hits and substitutions keep the reference tag, insertions get "O", and
// an I- tag without a matching predecessor becomes B-.
std::vector<std::string> project_slot_tags(const Tokens& reference, const std::vector<std::string>& tags,
                                           const Tokens& hypothesis);

struct TrainConfig {
  double lr = 0.2;
  std::size_t epochs = 30;
  std::size_t batch = 8;
  double clip = 5.0;
  std::uint64_t seed = 0;
  bool parallel = true;  // per-example gradients across threads
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
  double dev_loss = 0.0;  // mean intent cross-entropy
};

struct TrainResult {
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
};

// Mini-batch SGD; after each epoch dev accuracy and loss are logged. The
// parameters of the epoch with the best dev accuracy are restored at the
// end; ties go to the lower dev loss, then to the earlier epoch.
TrainResult train(Model& model, const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const TrainConfig& cfg);

// Mean loss gradient of a batch, summed in example order so any thread
// count gives the same bits. Leaves the result in params().grad.
double batch_gradient(Model& model, const std::vector<const Example*>& batch, bool parallel);

double accuracy(const Model& model, const std::vector<Example>& examples);

}  // namespace slubench::models
