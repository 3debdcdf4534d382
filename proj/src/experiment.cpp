#include "slubench/experiment.hpp"

#include <cctype>
#include <exception>
#include <functional>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "slubench/errors.hpp"
#include "slubench/wcn.hpp"

namespace slubench::experiment {

using models::Family;

std::string to_string(InputKind kind) {
  switch (kind) {
    case InputKind::manual:
      return "manual";
    case InputKind::onebest:
      return "onebest";
    case InputKind::wcn:
      return "wcn";
    case InputKind::multimodal:
      return "multimodal";
  }
  return "manual";
}

InputKind parse_input_kind(const std::string& name) {
  if (name == "manual") return InputKind::manual;
  if (name == "onebest") return InputKind::onebest;
  if (name == "wcn") return InputKind::wcn;
  if (name == "multimodal") return InputKind::multimodal;
  throw ContractError("unknown input kind '" + name + "'");
}

// --- specs -----------------------------------------------------------------

void ExperimentSpec::validate() const {
  const std::string where = "experiment " + (id.empty() ? std::string("<unnamed>") : id) + ": ";
  if (id.empty()) throw ContractError(where + "empty id");
  if (train_input != InputKind::manual && train_input != InputKind::onebest)
    throw ContractError(where + "train_input must be manual or onebest");
  switch (family) {
    case Family::text:
      if (eval_input != InputKind::manual && eval_input != InputKind::onebest)
        throw ContractError(where + "text family evaluates manual or onebest input");
      break;
    case Family::wcn:
      if (eval_input != InputKind::wcn) throw ContractError(where + "wcn family requires eval_input = wcn");
      break;
    case Family::multimodal:
      if (eval_input != InputKind::multimodal)
        throw ContractError(where + "multimodal family requires eval_input = multimodal");
      break;
  }
  if (!asr::is_preset(asr_profile)) throw ContractError(where + "unknown asr_profile '" + asr_profile + "'");
  if (asr_profile == "none" && (train_input != InputKind::manual || eval_input != InputKind::manual))
    throw ContractError(where + "asr_profile none is only valid with manual inputs");
  if (variant != "original" && variant != "filtered")
    throw ContractError(where + "variant must be original or filtered");
  if (train.epochs == 0) throw ContractError(where + "epochs must be positive");
  if (!(train.lr > 0.0)) throw ContractError(where + "lr must be positive");
  if (train.batch == 0) throw ContractError(where + "batch must be positive");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw ContractError(where + "d_model must be a positive multiple of n_heads");
  if (n_layers == 0 || hidden == 0 || max_len == 0 || acoustic_dim == 0)
    throw ContractError(where + "dimensions must be positive");
  if (frames_per_token == 0) throw ContractError(where + "frames_per_token must be positive");
  if (!(noise_sd >= 0.0)) throw ContractError(where + "noise_sd must be non-negative");
  if (!(multitask_weight >= 0.0 && multitask_weight <= 1.0))
    throw ContractError(where + "multitask_weight must lie in [0,1]");
}

namespace {

std::string display(InputKind k) {
  switch (k) {
    case InputKind::manual:
      return "manual";
    case InputKind::onebest:
      return "1-best";
    case InputKind::wcn:
      return "WCN";
    case InputKind::multimodal:
      return "multimodal";
  }
  return "manual";
}

}  // namespace

std::string ExperimentSpec::input_label() const {
  if (!label.empty()) return label;
  std::string s = display(train_input) + " -> " + display(eval_input);
  if (asr_profile != "none") s += " (" + asr_profile + ")";
  return s;
}

void MatrixConfig::validate() const {
  std::set<std::string> ids;
  for (const auto& s : specs) {
    s.validate();
    if (!ids.insert(s.id).second) throw ContractError("duplicate experiment id '" + s.id + "'");
  }
  if (!(dev_fraction > 0.0 && test_fraction > 0.0 && dev_fraction + test_fraction < 1.0))
    throw ContractError("dev_fraction and test_fraction must be positive and leave a training share");
  if (!(annotation_noise >= 0.0 && annotation_noise <= 1.0))
    throw ContractError("annotation_noise must lie in [0,1]");
  if (metadata_path.empty() && n_per_intent == 0) throw ContractError("n_per_intent must be positive");
}

// --- config file -----------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::size_t as_size(const std::string& v, std::size_t line) {
  std::size_t out = 0;
  if (!parse_size(v, out)) throw ParseError("expected a non-negative integer, got '" + v + "'", line);
  return out;
}

double as_double(const std::string& v, std::size_t line) {
  double out = 0.0;
  if (!parse_double(v, out)) throw ParseError("expected a number, got '" + v + "'", line);
  return out;
}

// Applies an experiment key; false when the key is not an experiment key.
bool set_spec_key(ExperimentSpec& s, const std::string& k, const std::string& v, std::size_t line) {
  try {
    if (k == "family") s.family = models::parse_family(v);
    else if (k == "train_input") s.train_input = parse_input_kind(v);
    else if (k == "eval_input") s.eval_input = parse_input_kind(v);
    else if (k == "asr_profile") {
      if (!asr::is_preset(v)) throw ContractError("unknown asr_profile '" + v + "'");
      s.asr_profile = v;
    } else if (k == "variant") {
      if (v != "original" && v != "filtered") throw ContractError("variant must be original or filtered");
      s.variant = v;
    } else if (k == "seed") s.seed = as_size(v, line);
    else if (k == "label") s.label = v;
    else if (k == "epochs") s.train.epochs = as_size(v, line);
    else if (k == "lr") s.train.lr = as_double(v, line);
    else if (k == "batch") s.train.batch = as_size(v, line);
    else if (k == "clip") s.train.clip = as_double(v, line);
    else if (k == "d_model") s.d_model = as_size(v, line);
    else if (k == "n_heads") s.n_heads = as_size(v, line);
    else if (k == "n_layers") s.n_layers = as_size(v, line);
    else if (k == "hidden") s.hidden = as_size(v, line);
    else if (k == "max_len") s.max_len = as_size(v, line);
    else if (k == "multitask_weight") s.multitask_weight = as_double(v, line);
    else if (k == "acoustic_dim") s.acoustic_dim = as_size(v, line);
    else if (k == "frames_per_token") s.frames_per_token = as_size(v, line);
    else if (k == "noise_sd") s.noise_sd = as_double(v, line);
    else return false;
  } catch (const ContractError& e) {
    throw ParseError(e.what(), line);
  }
  return true;
}

bool set_global_key(MatrixConfig& c, const std::string& k, const std::string& v, std::size_t line) {
  if (k == "corpus_seed") c.corpus_seed = as_size(v, line);
  else if (k == "n_per_intent") c.n_per_intent = as_size(v, line);
  else if (k == "grammar") c.grammar_path = v;
  else if (k == "metadata") c.metadata_path = v;
  else if (k == "annotation_noise") c.annotation_noise = as_double(v, line);
  else if (k == "split_seed") c.split_seed = as_size(v, line);
  else if (k == "dev_fraction") c.dev_fraction = as_double(v, line);
  else if (k == "test_fraction") c.test_fraction = as_double(v, line);
  else if (k == "out") c.out_dir = v;
  else return false;
  return true;
}

}  // namespace

MatrixConfig parse_config(const std::string& text) {
  MatrixConfig cfg;
  ExperimentSpec defaults;
  bool default_seed_given = false;
  std::vector<std::set<std::string>> seen_keys;
  std::set<std::string> global_seen;
  std::vector<bool> seed_given;
  std::vector<std::string> lines = split_exact(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    std::string l = lines[i];
    if (auto hash = l.find('#'); hash != std::string::npos) l.resize(hash);
    l = trim(l);
    if (l.empty()) continue;
    if (l.front() == '[') {
      if (l.back() != ']' || l.size() < 3) throw ParseError("malformed section header", ln);
      std::string id = trim(l.substr(1, l.size() - 2));
      for (char ch : id)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-'))
          throw ParseError("invalid experiment id '" + id + "'", ln);
      for (const auto& s : cfg.specs)
        if (s.id == id) throw ParseError("duplicate experiment id '" + id + "'", ln);
      ExperimentSpec s = defaults;
      s.id = id;
      cfg.specs.push_back(s);
      seen_keys.emplace_back();
      seed_given.push_back(false);
      continue;
    }
    auto eq = l.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", ln);
    std::string k = trim(l.substr(0, eq)), v = trim(l.substr(eq + 1));
    if (k.empty()) throw ParseError("empty key", ln);
    if (cfg.specs.empty()) {
      if (!global_seen.insert(k).second) throw ParseError("repeated key '" + k + "'", ln);
      if (set_global_key(cfg, k, v, ln)) continue;
      if (!set_spec_key(defaults, k, v, ln)) throw ParseError("unknown key '" + k + "'", ln);
      if (k == "seed") default_seed_given = true;
    } else {
      if (!seen_keys.back().insert(k).second) throw ParseError("repeated key '" + k + "'", ln);
      if (!set_spec_key(cfg.specs.back(), k, v, ln)) {
        if (set_global_key(cfg, k, v, ln)) throw ParseError("global key '" + k + "' inside a section", ln);
        throw ParseError("unknown key '" + k + "'", ln);
      }
      if (k == "seed") seed_given.back() = true;
    }
  }
  // Sections without their own seed derive one from the id.
  for (std::size_t i = 0; i < cfg.specs.size(); ++i)
    if (!seed_given[i]) cfg.specs[i].seed = stream_seed(default_seed_given ? defaults.seed : 1, cfg.specs[i].id) >> 33;
  for (auto& s : cfg.specs) s.train.seed = s.seed;
  cfg.validate();
  return cfg;
}

MatrixConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string serialize_config(const MatrixConfig& c) {
  std::ostringstream o;
  o << "corpus_seed = " << c.corpus_seed << "\n";
  o << "n_per_intent = " << c.n_per_intent << "\n";
  if (!c.grammar_path.empty()) o << "grammar = " << c.grammar_path << "\n";
  if (!c.metadata_path.empty()) o << "metadata = " << c.metadata_path << "\n";
  o << "annotation_noise = " << format_double(c.annotation_noise) << "\n";
  o << "split_seed = " << c.split_seed << "\n";
  o << "dev_fraction = " << format_double(c.dev_fraction) << "\n";
  o << "test_fraction = " << format_double(c.test_fraction) << "\n";
  if (!c.out_dir.empty()) o << "out = " << c.out_dir << "\n";
  for (const auto& s : c.specs) {
    o << "\n[" << s.id << "]\n";
    if (!s.label.empty()) o << "label = " << s.label << "\n";
    o << "family = " << models::to_string(s.family) << "\n";
    o << "train_input = " << to_string(s.train_input) << "\n";
    o << "eval_input = " << to_string(s.eval_input) << "\n";
    o << "asr_profile = " << s.asr_profile << "\n";
    o << "variant = " << s.variant << "\n";
    o << "seed = " << s.seed << "\n";
    o << "epochs = " << s.train.epochs << "\n";
    o << "lr = " << format_double(s.train.lr) << "\n";
    o << "batch = " << s.train.batch << "\n";
    o << "clip = " << format_double(s.train.clip) << "\n";
    o << "d_model = " << s.d_model << "\n";
    o << "n_heads = " << s.n_heads << "\n";
    o << "n_layers = " << s.n_layers << "\n";
    o << "hidden = " << s.hidden << "\n";
    o << "max_len = " << s.max_len << "\n";
    o << "multitask_weight = " << format_double(s.multitask_weight) << "\n";
    o << "acoustic_dim = " << s.acoustic_dim << "\n";
    o << "frames_per_token = " << s.frames_per_token << "\n";
    o << "noise_sd = " << format_double(s.noise_sd) << "\n";
  }
  return o.str();
}

MatrixConfig default_matrix() {
  MatrixConfig cfg;
  auto spec = [](std::string id, Family fam, InputKind tr, InputKind ev, std::string prof, std::uint64_t seed) {
    ExperimentSpec s;
    s.id = std::move(id);
    s.family = fam;
    s.train_input = tr;
    s.eval_input = ev;
    s.asr_profile = std::move(prof);
    s.seed = seed;
    s.train.seed = seed;
    return s;
  };
  using IK = InputKind;
  cfg.specs = {
      spec("EXP1", Family::text, IK::manual, IK::manual, "none", 101),
      spec("EXP2", Family::text, IK::manual, IK::onebest, "unadapted", 102),
      spec("EXP3", Family::text, IK::onebest, IK::manual, "unadapted", 103),
      spec("EXP4", Family::text, IK::onebest, IK::onebest, "unadapted", 104),
      spec("EXP5", Family::wcn, IK::onebest, IK::wcn, "adapted", 105),
      spec("EXP6", Family::multimodal, IK::onebest, IK::multimodal, "unadapted", 106),
      spec("EXP7", Family::multimodal, IK::onebest, IK::multimodal, "adapted", 107),
      spec("EXP8", Family::multimodal, IK::onebest, IK::multimodal, "adapted", 108),
  };
  for (auto& s : cfg.specs)
    if (s.family == Family::multimodal) s.train.batch = 4;
  cfg.specs[7].noise_sd = 0.5;
  cfg.specs[7].label = "1-best -> multimodal (adapted, low-noise acoustics)";
  return cfg;
}

// --- data ------------------------------------------------------------------

PreparedCorpus prepare_corpus(const MatrixConfig& cfg) {
  corpus::Corpus records;
  Tokens vocab;
  if (!cfg.metadata_path.empty()) {
    records = corpus::load_metadata(cfg.metadata_path, corpus::Split::train);
    std::set<std::string> words;
    for (const auto& r : records)
      for (const auto& w : tokenize(r.transcript)) words.insert(w);
    vocab.assign(words.begin(), words.end());
  } else {
    corpus::SyntheticGrammar g = cfg.grammar_path.empty() ? corpus::default_grammar(cfg.corpus_seed)
                                                          : corpus::parse_grammar_json(read_file(cfg.grammar_path));
    records = corpus::generate_synthetic_corpus(g, cfg.n_per_intent);
    vocab = g.vocabulary();
  }
  records = corpus::inject_annotation_noise(records, cfg.annotation_noise, cfg.corpus_seed);
  corpus::SplitFractions f{1.0 - cfg.dev_fraction - cfg.test_fraction, cfg.dev_fraction, cfg.test_fraction};
  PreparedCorpus out;
  out.original = corpus::split_corpus(records, f, cfg.split_seed);
  out.filtered = corpus::split_corpus(corpus::filter_corpus(records).kept, f, cfg.split_seed);
  out.vocabulary = std::move(vocab);
  out.asr_seed = stream_seed(cfg.corpus_seed, "asr");
  return out;
}

View make_view(const corpus::UtteranceRecord& record, Family family, InputKind text_kind,
               const ExperimentSpec& spec, const asr::NoiseProfile& profile) {
  if (text_kind != InputKind::manual && text_kind != InputKind::onebest)
    throw ContractError("make_view: text view must be manual or onebest");
  const Tokens gold = tokenize(record.transcript);
  View v;
  asr::AsrOutput asr_out;
  if (text_kind == InputKind::manual) {
    v.input.tokens = gold;
    v.slot_tags = record.slot_tags;
  } else {
    asr_out = asr::simulate(gold, profile, record.id);
    v.input.tokens = asr_out.one_best;
    if (!record.slot_tags.empty()) v.slot_tags = models::project_slot_tags(gold, record.slot_tags, v.input.tokens);
  }
  if (family == Family::wcn) {
    v.input.cn = text_kind == InputKind::manual ? wcn::from_tokens(gold) : wcn::build_from_lattice(asr_out.lattice);
    v.input.cn.source_id = record.id;
  } else if (family == Family::multimodal) {
    v.input.acoustic = models::make_acoustic_features(gold, spec.frames_per_token, spec.noise_sd,
                                                      stream_seed(profile.seed, "acoustic/" + record.id),
                                                      spec.acoustic_dim);
  }
  return v;
}

// --- running ---------------------------------------------------------------

namespace {

const corpus::SplitResult& split_of(const ExperimentSpec& spec, const PreparedCorpus& data) {
  const corpus::SplitResult& split = spec.variant == "original" ? data.original : data.filtered;
  if (split.train.empty()) throw ContractError("experiment " + spec.id + ": empty training split");
  if (split.dev.empty() || split.test.empty())
    throw ContractError("experiment " + spec.id + ": empty dev or test split");
  return split;
}

InputKind eval_text_kind(const ExperimentSpec& spec) {
  return spec.eval_input == InputKind::manual ? InputKind::manual : InputKind::onebest;
}

std::vector<View> make_views(const corpus::Corpus& recs, InputKind kind, const ExperimentSpec& spec,
                             const asr::NoiseProfile& profile) {
  std::vector<View> out(recs.size());
  const auto n = static_cast<std::ptrdiff_t>(recs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = make_view(recs[static_cast<std::size_t>(i)], spec.family, kind, spec, profile);
  return out;
}

std::vector<models::Example> to_examples(const corpus::Corpus& recs, const std::vector<View>& vs,
                                         const models::LabelSpace& labels, bool with_slots) {
  std::vector<models::Example> out;
  out.reserve(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    models::Example ex;
    ex.input = vs[i].input;
    ex.intent = labels.has_intent(recs[i].intent) ? labels.intent_index(recs[i].intent) : labels.intents().size();
    if (with_slots)
      for (const auto& t : vs[i].slot_tags) ex.slots.push_back(labels.slot_index(t));
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TrainedExperiment train_experiment(const ExperimentSpec& spec, const PreparedCorpus& data) {
  spec.validate();
  const corpus::SplitResult& split = split_of(spec, data);
  const asr::NoiseProfile profile = asr::preset(spec.asr_profile, data.vocabulary, data.asr_seed);
  std::vector<View> train_views = make_views(split.train, spec.train_input, spec, profile);
  std::vector<View> dev_views = make_views(split.dev, eval_text_kind(spec), spec, profile);

  models::LabelSpace labels = models::LabelSpace::build(split.train);
  std::vector<Tokens> sentences;
  for (const auto& v : train_views) {
    if (spec.family == Family::wcn) {
      Tokens bin_tokens;
      for (const auto& b : v.input.cn.bins)
        for (const auto& e : b.entries) bin_tokens.push_back(e.token);
      sentences.push_back(std::move(bin_tokens));
    } else {
      sentences.push_back(v.input.tokens);
    }
  }

  models::ModelConfig mc;
  mc.family = spec.family;
  mc.d_model = spec.d_model;
  mc.n_heads = spec.n_heads;
  mc.n_layers = spec.n_layers;
  mc.hidden = spec.hidden;
  mc.n_intents = labels.intents().size();
  mc.n_slot_tags = labels.slot_tags().size();
  mc.multitask_weight = spec.multitask_weight;
  mc.max_len = spec.max_len;
  mc.acoustic_dim = spec.acoustic_dim;
  mc.seed = spec.seed;
  TrainedExperiment out;
  out.model = std::make_unique<models::Model>(mc, models::Vocabulary::build(sentences), labels);

  std::vector<models::Example> train_ex = to_examples(split.train, train_views, labels, spec.family == Family::text);
  std::vector<models::Example> dev_ex = to_examples(split.dev, dev_views, labels, false);
  models::TrainConfig tc = spec.train;
  tc.seed = spec.seed;
  out.history = models::train(*out.model, train_ex, dev_ex, tc);
  return out;
}

std::vector<metrics::EvalRow> evaluate_experiment(const models::Model& model, const ExperimentSpec& spec,
                                                  const PreparedCorpus& data) {
  spec.validate();
  if (model.config().family != spec.family)
    throw ContractError("experiment " + spec.id + ": checkpoint family " + models::to_string(model.config().family) +
                        " does not match " + models::to_string(spec.family));
  const corpus::SplitResult& split = split_of(spec, data);
  const asr::NoiseProfile profile = asr::preset(spec.asr_profile, data.vocabulary, data.asr_seed);
  std::vector<metrics::EvalRow> rows;
  for (const auto& [name, recs] : {std::pair<std::string, const corpus::Corpus*>{"dev", &split.dev},
                                   std::pair<std::string, const corpus::Corpus*>{"test", &split.test}}) {
    std::vector<View> vs = make_views(*recs, eval_text_kind(spec), spec, profile);
    std::vector<models::ModelInput> inputs;
    std::vector<std::string> gold;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      inputs.push_back(std::move(vs[i].input));
      gold.push_back((*recs)[i].intent);
    }
    metrics::EvalRow row = metrics::score_row(gold, models::predict_batch(model, inputs));
    row.experiment = spec.id;
    row.input = spec.input_label();
    row.variant = spec.variant;
    row.split = name;
    rows.push_back(std::move(row));
  }
  return rows;
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec, const PreparedCorpus& data) {
  TrainedExperiment t = train_experiment(spec, data);
  ExperimentOutcome outcome;
  outcome.rows = evaluate_experiment(*t.model, spec, data);
  outcome.history = std::move(t.history);
  return outcome;
}

MatrixResult run_matrix(const MatrixConfig& cfg) {
  cfg.validate();
  if (cfg.specs.empty()) return {};
  return run_matrix(cfg, prepare_corpus(cfg));
}

MatrixResult run_matrix(const MatrixConfig& cfg, const PreparedCorpus& data) {
  cfg.validate();
  const std::size_t n = cfg.specs.size();
  std::vector<ExperimentOutcome> outcomes(n);
  std::vector<std::string> errors(n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      outcomes[k] = run_experiment(cfg.specs[k], data);
    } catch (const std::exception& e) {
      errors[k] = e.what();
      if (errors[k].empty()) errors[k] = "unknown error";
    }
  }
  MatrixResult res;
  for (std::size_t k = 0; k < n; ++k) {
    const ExperimentSpec& s = cfg.specs[k];
    if (!errors[k].empty()) {
      res.any_failed = true;
      for (const char* split : {"dev", "test"}) {
        metrics::EvalRow row;
        row.experiment = s.id;
        row.input = s.input_label();
        row.variant = s.variant;
        row.split = split;
        row.failed = true;
        row.error = errors[k];
        res.report.rows.push_back(row);
      }
      res.histories.emplace_back();
      continue;
    }
    for (auto& row : outcomes[k].rows) res.report.rows.push_back(row);
    res.histories.push_back(outcomes[k].history);
  }
  return res;
}

std::string relative_improvement_appendix(const MatrixConfig& cfg, const metrics::EvalReport& report) {
  std::map<std::string, const metrics::EvalRow*> test_rows;
  for (const auto& r : report.rows)
    if (r.split == "test" && !r.failed) test_rows[r.experiment] = &r;
  std::ostringstream o;
  o << "## Relative improvement (test ACC)\n\n";
  o << "| Exp. | Baseline | ACC | Baseline ACC | Relative |\n";
  o << "|---|---|---|---|---|\n";
  std::size_t lines = 0;
  for (const auto& cand : cfg.specs) {
    if (cand.family == Family::text) continue;
    auto c = test_rows.find(cand.id);
    if (c == test_rows.end()) continue;
    for (const auto& base : cfg.specs) {
      if (base.family != Family::text || base.eval_input != InputKind::onebest || base.variant != cand.variant)
        continue;
      auto b = test_rows.find(base.id);
      if (b == test_rows.end()) continue;
      std::string rel = b->second->accuracy > 0.0
                            ? format_fixed(metrics::relative_improvement(b->second->accuracy, c->second->accuracy), 2) + "%"
                            : "-";
      if (rel.front() != '-') rel = "+" + rel;
      o << "| " << cand.id << " | " << base.id << " | " << format_half_up(c->second->accuracy, 2) << " | "
        << format_half_up(b->second->accuracy, 2) << " | " << rel << " |\n";
      ++lines;
    }
  }
  if (lines == 0) o << "| - | - | - | - | - |\n";
  return o.str();
}

std::string render_histories(const MatrixConfig& cfg, const MatrixResult& result) {
  std::ostringstream o;
  o << "experiment\tepoch\ttrain_loss\tdev_accuracy\tdev_loss\n";
  for (std::size_t k = 0; k < cfg.specs.size() && k < result.histories.size(); ++k)
    for (const auto& e : result.histories[k].history)
      o << cfg.specs[k].id << "\t" << e.epoch << "\t" << format_fixed(e.train_loss, 6) << "\t"
        << format_fixed(e.dev_accuracy, 6) << "\t" << format_fixed(e.dev_loss, 6) << "\n";
  return o.str();
}

std::string report_to_json(const metrics::EvalReport& report) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json o;
    o["experiment"] = r.experiment;
    o["input"] = r.input;
    o["variant"] = r.variant;
    o["split"] = r.split;
    o["failed"] = r.failed;
    if (r.failed) {
      o["error"] = r.error;
    } else {
      o["accuracy"] = r.accuracy;
      o["f1_micro"] = r.f1_micro;
      o["f1_macro"] = r.f1_macro;
    }
    arr.push_back(o);
  }
  return arr.dump(2) + "\n";
}

metrics::EvalReport report_from_json(const std::string& text) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid report JSON: ") + e.what(), 1);
  }
  if (!arr.is_array()) throw ParseError("report JSON must be an array", 1);
  metrics::EvalReport rep;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& o = arr[i];
    try {
      metrics::EvalRow r;
      r.experiment = o.at("experiment").get<std::string>();
      r.input = o.at("input").get<std::string>();
      r.variant = o.at("variant").get<std::string>();
      r.split = o.at("split").get<std::string>();
      r.failed = o.value("failed", false);
      if (r.failed) {
        r.error = o.value("error", std::string());
      } else {
        r.accuracy = o.at("accuracy").get<double>();
        r.f1_micro = o.at("f1_micro").get<double>();
        r.f1_macro = o.at("f1_macro").get<double>();
      }
      rep.rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("report row " + std::to_string(i) + ": " + e.what(), 1);
    }
  }
  return rep;
}

void write_outputs(const std::string& dir, const MatrixConfig& cfg, const MatrixResult& result) {
  const std::string base = dir.empty() ? std::string(".") : dir;
  std::error_code ec;
  std::filesystem::create_directories(base, ec);
  if (ec) throw IoError("cannot create directory " + base + ": " + ec.message());
  write_file(base + "/report.md", metrics::render_report(result.report, metrics::ReportFormat::markdown) + "\n" +
                                      relative_improvement_appendix(cfg, result.report));
  write_file(base + "/report.csv", metrics::render_report(result.report, metrics::ReportFormat::csv));
  write_file(base + "/history.tsv", render_histories(cfg, result));
}

}  // namespace slubench::experiment
