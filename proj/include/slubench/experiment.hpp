#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "slubench/asr_sim.hpp"
#include "slubench/corpus.hpp"
#include "slubench/metrics.hpp"
#include "slubench/models.hpp"

// Experiment matrix: corpus preparation, input views, training and scoring.
//
// Config grammar (line oriented, '#' starts a comment):
//
//   key = value          global keys, before the first section
//   [EXP1]               one section per experiment, ids unique
//   key = value          experiment keys
//
// Global keys: corpus_seed, n_per_intent, grammar (JSON path), metadata
// (JSON-lines path, replaces the grammar), annotation_noise, split_seed,
// dev_fraction, test_fraction, out. Any experiment key given globally
// becomes the default for every section.
//
// Experiment keys: family {text,wcn,multimodal}, train_input {manual,onebest},
// eval_input {manual,onebest,wcn,multimodal}, asr_profile
// {none,unadapted,adapted}, variant {original,filtered}, seed, label,
// epochs, lr, batch, clip, d_model, n_heads, n_layers, hidden, max_len,
// multitask_weight, acoustic_dim, frames_per_token, noise_sd.
//
// Unknown keys, repeated keys and malformed values are ParseErrors.
namespace slubench::experiment {

enum class InputKind { manual, onebest, wcn, multimodal };
std::string to_string(InputKind kind);
InputKind parse_input_kind(const std::string& name);

struct ExperimentSpec {
  std::string id;
  std::string label;  // table "Input" text; derived when empty
  models::Family family = models::Family::text;
  InputKind train_input = InputKind::manual;
  InputKind eval_input = InputKind::manual;
  std::string asr_profile = "none";
  std::string variant = "filtered";
  std::uint64_t seed = 1;

  models::TrainConfig train;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t hidden = 32;
  std::size_t max_len = 64;
  double multitask_weight = 0.5;
  std::size_t acoustic_dim = 16;
  std::size_t frames_per_token = 3;
  double noise_sd = 1.0;

  // ContractError when the family, inputs and profile do not fit together.
  void validate() const;
  std::string input_label() const;
};

struct MatrixConfig {
  std::vector<ExperimentSpec> specs;
  std::uint64_t corpus_seed = 7;
  std::size_t n_per_intent = 63;
  std::string grammar_path;
  std::string metadata_path;
  double annotation_noise = 0.0;
  std::uint64_t split_seed = 13;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  std::string out_dir;

  void validate() const;
};

MatrixConfig parse_config(const std::string& text);
MatrixConfig load_config(const std::string& path);
std::string serialize_config(const MatrixConfig& cfg);

// The shipped EXP1-EXP8 matrix.
MatrixConfig default_matrix();

// Both dataset variants, each already split.
struct PreparedCorpus {
  corpus::SplitResult original;
  corpus::SplitResult filtered;
  Tokens vocabulary;       // confusion vocabulary for the simulator
  std::uint64_t asr_seed;  // shared by every experiment, so equal profiles see equal errors
};
PreparedCorpus prepare_corpus(const MatrixConfig& cfg);

// One record as model input. text_kind picks gold (manual) or simulated
// 1-best text. The wcn family reads a degenerate network of the gold text
// for manual and the network of the simulated lattice otherwise; the
// multimodal family pairs the text with acoustic features of the gold text.
struct View {
  models::ModelInput input;
  std::vector<std::string> slot_tags;  // aligned to input.tokens; may be empty
};
View make_view(const corpus::UtteranceRecord& record, models::Family family, InputKind text_kind,
               const ExperimentSpec& spec, const asr::NoiseProfile& profile);

struct TrainedExperiment {
  std::unique_ptr<models::Model> model;
  models::TrainResult history;
};

// Builds the training view, label space and vocabulary, then trains.
TrainedExperiment train_experiment(const ExperimentSpec& spec, const PreparedCorpus& data);
// Dev and test rows of a trained model on the spec's evaluation view.
std::vector<metrics::EvalRow> evaluate_experiment(const models::Model& model, const ExperimentSpec& spec,
                                                  const PreparedCorpus& data);

struct ExperimentOutcome {
  std::vector<metrics::EvalRow> rows;  // dev then test
  models::TrainResult history;
};

// Throws ContractError before training when the spec is invalid.
ExperimentOutcome run_experiment(const ExperimentSpec& spec, const PreparedCorpus& data);

struct MatrixResult {
  metrics::EvalReport report;
  std::vector<models::TrainResult> histories;  // spec order; empty for failures
  bool any_failed = false;
};

// Runs every spec, in parallel when threads are available. Failures become
// FAILED rows; the rest of the matrix still runs.
MatrixResult run_matrix(const MatrixConfig& cfg);
MatrixResult run_matrix(const MatrixConfig& cfg, const PreparedCorpus& data);

// Relative test-accuracy gains of every wcn and multimodal experiment over
// every text experiment evaluated on 1-best input, as a markdown section.
std::string relative_improvement_appendix(const MatrixConfig& cfg, const metrics::EvalReport& report);

// Per-epoch logs as TSV: experiment, epoch, train_loss, dev_accuracy.
std::string render_histories(const MatrixConfig& cfg, const MatrixResult& result);

// EvalRows as a JSON array and back, for evaluate and report.
std::string report_to_json(const metrics::EvalReport& report);
metrics::EvalReport report_from_json(const std::string& text);

// Writes report.md (table plus appendix), report.csv and history.tsv.
void write_outputs(const std::string& dir, const MatrixConfig& cfg, const MatrixResult& result);

}  // namespace slubench::experiment
