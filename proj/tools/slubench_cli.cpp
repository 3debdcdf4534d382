// slubench command-line interface. Exit codes: 0 success, 1 contract
// violation or failed check, 2 I/O or parse error.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "slubench/asr_sim.hpp"
#include "slubench/checkpoint.hpp"
#include "slubench/corpus.hpp"
#include "slubench/errors.hpp"
#include "slubench/experiment.hpp"
#include "slubench/grad_suite.hpp"
#include "slubench/lattice.hpp"
#include "slubench/metrics.hpp"
#include "slubench/text.hpp"
#include "slubench/wcn.hpp"

namespace {

using namespace slubench;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "markdown";
  std::string config;
};

void emit(const Globals& g, const std::string& contents) {
  if (g.out.empty()) {
    std::cout << contents;
    std::cout.flush();
  } else {
    write_file(g.out, contents);
  }
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::string s((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    return s;
  }
  return read_file(path);
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

experiment::MatrixConfig matrix_config(const Globals& g) {
  return g.config.empty() ? experiment::default_matrix() : experiment::load_config(g.config);
}

const experiment::ExperimentSpec& find_spec(const experiment::MatrixConfig& cfg, const std::string& id) {
  for (const auto& s : cfg.specs)
    if (s.id == id) return s;
  throw ContractError("no experiment '" + id + "' in the configuration");
}

Tokens confusion_vocab(const std::string& grammar_path, const corpus::Corpus* records, std::uint64_t seed) {
  if (!grammar_path.empty()) return corpus::parse_grammar_json(read_file(grammar_path)).vocabulary();
  if (records) {
    std::set<std::string> words;
    for (const auto& r : *records)
      for (const auto& w : tokenize(r.transcript)) words.insert(w);
    return Tokens(words.begin(), words.end());
  }
  return corpus::default_grammar(seed).vocabulary();
}

std::string stats_table(const corpus::CorpusStats& s, metrics::ReportFormat fmt) {
  const std::vector<std::string> head = {"Audio Files", "Close range", "Far range", "Duration [hr]", "Avg. length [s]",
                                         "Nb. of intents"};
  const std::vector<std::string> vals = {std::to_string(s.n_audio), std::to_string(s.n_close), std::to_string(s.n_far),
                                         format_fixed(s.duration_hr, 2), format_fixed(s.avg_len_s, 3),
                                         std::to_string(s.n_intents)};
  std::string out;
  if (fmt == metrics::ReportFormat::csv) {
    for (std::size_t i = 0; i < head.size(); ++i) out += (i ? "," : "") + head[i];
    out += "\n";
    for (std::size_t i = 0; i < vals.size(); ++i) out += (i ? "," : "") + vals[i];
    return out + "\n";
  }
  out = "|";
  for (const auto& h : head) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < head.size(); ++i) out += "---|";
  out += "\n|";
  for (const auto& v : vals) out += " " + v + " |";
  return out + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slubench: spoken language understanding benchmark workbench"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Random seed");
  app.add_option("--out", g.out, "Output file (or directory for split and run-matrix)");
  app.add_option("--format", g.format, "Table format")->check(CLI::IsMember({"markdown", "csv"}));
  app.add_option("--config", g.config, "Experiment matrix config");

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic corpus as JSON-lines metadata");
  std::string gen_grammar, gen_durations;
  std::size_t gen_n = 63;
  double gen_noise = 0.0;
  bool gen_fixture = false;
  gen->add_option("--grammar", gen_grammar, "Grammar JSON (default: built-in grammar)");
  gen->add_option("--n-per-intent", gen_n, "Utterances per intent");
  gen->add_option("--annotation-noise", gen_noise, "Fraction of records given inconsistent annotations");
  gen->add_flag("--cleaning-fixture", gen_fixture, "Emit the 72,277-record cleaning fixture instead");
  gen->add_option("--durations-out", gen_durations, "Write recording durations (TSV) here");

  // filter
  auto* filt = app.add_subcommand("filter", "Drop records with nonzero metadata WER or inconsistent transcripts");
  std::string filt_in, filt_dropped, filt_summary;
  filt->add_option("--input", filt_in, "Metadata JSON-lines ('-' for stdin)")->required();
  filt->add_option("--dropped", filt_dropped, "Write dropped records here");
  filt->add_option("--summary", filt_summary, "Write a JSON summary here");

  // stats
  auto* stats = app.add_subcommand("stats", "Close/far and duration statistics of a corpus");
  std::string stats_in, stats_durations;
  stats->add_option("--input", stats_in, "Metadata JSON-lines ('-' for stdin)")->required();
  stats->add_option("--durations", stats_durations, "Recording durations TSV (file_id, seconds)")->required();

  // split
  auto* split = app.add_subcommand("split", "Stratified train/dev/test split into --out directory");
  std::string split_in;
  double split_dev = 0.1, split_test = 0.1;
  split->add_option("--input", split_in, "Metadata JSON-lines ('-' for stdin)")->required();
  split->add_option("--dev-fraction", split_dev, "Dev share");
  split->add_option("--test-fraction", split_test, "Test share");

  // simulate-asr
  auto* sim = app.add_subcommand("simulate-asr", "Corrupt transcripts and synthesize lattices");
  std::string sim_in, sim_text, sim_profile = "unadapted", sim_grammar, sim_lattice_dir;
  sim->add_option("--input", sim_in, "Metadata JSON-lines; writes id<TAB>1-best lines");
  sim->add_option("--text", sim_text, "A single transcript; writes its lattice");
  sim->add_option("--profile", sim_profile, "none, unadapted or adapted");
  sim->add_option("--grammar", sim_grammar, "Grammar JSON supplying the confusion vocabulary");
  sim->add_option("--lattice-dir", sim_lattice_dir, "With --input, also write <id>.lat files here");

  // lattice-to-wcn
  auto* l2w = app.add_subcommand("lattice-to-wcn", "Convert a lattice file to a confusion network");
  std::string l2w_in;
  double l2w_scale = 1.0, l2w_prune = 0.99;
  l2w->add_option("--input", l2w_in, "Lattice file ('-' for stdin)")->required();
  l2w->add_option("--lm-scale", l2w_scale, "Language-model score weight");
  l2w->add_option("--epsilon-prune", l2w_prune, "Drop bins whose epsilon posterior exceeds this");

  // train / evaluate
  auto* trn = app.add_subcommand("train", "Train one experiment of the matrix and write a checkpoint");
  std::string trn_exp;
  trn->add_option("--experiment", trn_exp, "Experiment id")->required();
  auto* evl = app.add_subcommand("evaluate", "Score a checkpoint on an experiment's dev and test views");
  std::string evl_exp, evl_ckpt;
  evl->add_option("--experiment", evl_exp, "Experiment id")->required();
  evl->add_option("--checkpoint", evl_ckpt, "Checkpoint written by train")->required();
  bool evl_json = false;
  evl->add_flag("--json", evl_json, "Write rows as JSON for the report subcommand");

  // report
  auto* rep = app.add_subcommand("report", "Render JSON rows from evaluate as an accuracy report");
  std::vector<std::string> rep_in;
  rep->add_option("--input", rep_in, "JSON row files")->required();

  // run-matrix
  auto* rm = app.add_subcommand("run-matrix", "Run the experiment matrix; writes report.md, report.csv, history.tsv");
  bool rm_print = false;
  rm->add_flag("--print-config", rm_print, "Print the resolved matrix config and exit");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks of the network blocks");
  std::string gc_block = "all";
  double gc_tol = 1e-4, gc_step = 1e-3;
  gc->add_option("--block", gc_block, "Block name or 'all'");
  gc->add_option("--tolerance", gc_tol, "Maximum relative error");
  gc->add_option("--step", gc_step, "Finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    const auto fmt = metrics::parse_report_format(g.format);
    if (gen->parsed()) {
      if (gen_fixture) {
        corpus::CleaningFixture fx = corpus::cleaning_fixture();
        emit(g, corpus::serialize_metadata(fx.records));
        if (!gen_durations.empty()) write_file(gen_durations, corpus::serialize_durations(fx.durations));
        return 0;
      }
      corpus::SyntheticGrammar grammar = gen_grammar.empty() ? corpus::default_grammar(g.seed.value_or(7))
                                                             : corpus::parse_grammar_json(read_file(gen_grammar));
      if (!gen_grammar.empty() && g.seed) grammar.seed = *g.seed;
      corpus::Corpus recs = corpus::generate_synthetic_corpus(grammar, gen_n);
      recs = corpus::inject_annotation_noise(recs, gen_noise, g.seed.value_or(7));
      emit(g, corpus::serialize_metadata(recs));
      if (!gen_durations.empty()) {
        corpus::Durations d;
        for (const auto& r : recs)
          for (const auto& m : r.recordings)
            d[m.file_id] = 0.5 + 0.35 * static_cast<double>(tokenize(r.transcript).size());
        write_file(gen_durations, corpus::serialize_durations(d));
      }
      return 0;
    }
    if (filt->parsed()) {
      corpus::FilterResult fr = corpus::filter_corpus(corpus::parse_metadata(read_input(filt_in), corpus::Split::train));
      emit(g, corpus::serialize_metadata(fr.kept));
      if (!filt_dropped.empty()) write_file(filt_dropped, corpus::serialize_metadata(fr.dropped));
      const std::size_t total = fr.kept.size() + fr.dropped.size();
      const double frac = total ? 100.0 * static_cast<double>(fr.dropped.size()) / static_cast<double>(total) : 0.0;
      std::string summary = "{\"total\": " + std::to_string(total) + ", \"kept\": " + std::to_string(fr.kept.size()) +
                            ", \"dropped\": " + std::to_string(fr.dropped.size()) +
                            ", \"dropped_percent\": " + format_fixed(frac, 2);
      for (const auto& [k, v] : fr.reason_counts) summary += ", \"" + k + "\": " + std::to_string(v);
      summary += "}\n";
      if (!filt_summary.empty()) write_file(filt_summary, summary);
      std::cerr << "kept " << fr.kept.size() << " of " << total << " records (dropped " << format_fixed(frac, 2)
                << "%)\n";
      return 0;
    }
    if (stats->parsed()) {
      corpus::Corpus recs = corpus::parse_metadata(read_input(stats_in), corpus::Split::train);
      corpus::Durations d = corpus::parse_durations(read_file(stats_durations));
      emit(g, stats_table(corpus::compute_stats(recs, d), fmt));
      return 0;
    }
    if (split->parsed()) {
      if (g.out.empty()) throw ContractError("split: --out directory is required");
      corpus::Corpus recs = corpus::parse_metadata(read_input(split_in), corpus::Split::train);
      corpus::SplitResult sr =
          corpus::split_corpus(recs, {1.0 - split_dev - split_test, split_dev, split_test}, g.seed.value_or(13));
      for (const auto& w : sr.warnings) std::cerr << "warning: " << w << "\n";
      make_dir(g.out);
      write_file(g.out + "/train.jsonl", corpus::serialize_metadata(sr.train));
      write_file(g.out + "/dev.jsonl", corpus::serialize_metadata(sr.dev));
      write_file(g.out + "/test.jsonl", corpus::serialize_metadata(sr.test));
      return 0;
    }
    if (sim->parsed()) {
      if (sim_in.empty() == sim_text.empty()) throw ContractError("simulate-asr: give exactly one of --input, --text");
      if (!sim_text.empty()) {
        auto prof = asr::preset(sim_profile, confusion_vocab(sim_grammar, nullptr, 7), g.seed.value_or(0));
        emit(g, lattice::serialize_lattice(asr::synthesize_lattice(tokenize(sim_text), prof, "text")));
        return 0;
      }
      corpus::Corpus recs = corpus::parse_metadata(read_input(sim_in), corpus::Split::train);
      auto prof = asr::preset(sim_profile, confusion_vocab(sim_grammar, &recs, 7), g.seed.value_or(0));
      if (!sim_lattice_dir.empty()) make_dir(sim_lattice_dir);
      std::string out;
      for (const auto& r : recs) {
        asr::AsrOutput o = asr::simulate(tokenize(r.transcript), prof, r.id);
        out += r.id + "\t" + join(o.one_best) + "\n";
        if (!sim_lattice_dir.empty())
          write_file(sim_lattice_dir + "/" + r.id + ".lat", lattice::serialize_lattice(o.lattice));
      }
      emit(g, out);
      return 0;
    }
    if (l2w->parsed()) {
      lattice::Lattice l = lattice::parse_lattice(read_input(l2w_in));
      emit(g, wcn::serialize_wcn(wcn::build_from_lattice(l, {l2w_scale, l2w_prune})));
      return 0;
    }
    if (trn->parsed()) {
      if (g.out.empty()) throw ContractError("train: --out checkpoint path is required");
      auto cfg = matrix_config(g);
      auto spec = find_spec(cfg, trn_exp);
      if (g.seed) spec.seed = spec.train.seed = *g.seed;
      auto data = experiment::prepare_corpus(cfg);
      auto t = experiment::train_experiment(spec, data);
      checkpoint::save(g.out, *t.model);
      for (const auto& e : t.history.history)
        std::cerr << "epoch " << e.epoch << " loss " << format_fixed(e.train_loss, 4) << " dev_acc "
                  << format_fixed(e.dev_accuracy, 4) << "\n";
      std::cerr << "best epoch " << t.history.best_epoch << "\n";
      return 0;
    }
    if (evl->parsed()) {
      auto cfg = matrix_config(g);
      const auto& spec = find_spec(cfg, evl_exp);
      models::Model model = checkpoint::load(evl_ckpt);
      auto data = experiment::prepare_corpus(cfg);
      metrics::EvalReport rep_rows;
      rep_rows.rows = experiment::evaluate_experiment(model, spec, data);
      emit(g, evl_json ? experiment::report_to_json(rep_rows) : metrics::render_report(rep_rows, fmt));
      return 0;
    }
    if (rep->parsed()) {
      metrics::EvalReport all;
      for (const auto& path : rep_in) {
        auto part = experiment::report_from_json(read_input(path));
        all.rows.insert(all.rows.end(), part.rows.begin(), part.rows.end());
      }
      emit(g, metrics::render_report(all, fmt));
      return 0;
    }
    if (rm->parsed()) {
      auto cfg = matrix_config(g);
      if (rm_print) {
        emit(g, experiment::serialize_config(cfg));
        return 0;
      }
      std::string dir = g.out.empty() ? cfg.out_dir : g.out;
      auto res = experiment::run_matrix(cfg);
      if (!dir.empty()) {
        make_dir(dir);
        experiment::write_outputs(dir, cfg, res);
      }
      std::cout << metrics::render_report(res.report, fmt);
      if (fmt == metrics::ReportFormat::markdown) std::cout << "\n" << experiment::relative_improvement_appendix(cfg, res.report);
      for (const auto& r : res.report.rows)
        if (r.failed && r.split == "dev") std::cerr << r.experiment << " FAILED: " << r.error << "\n";
      return res.any_failed ? 1 : 0;
    }
    if (gc->parsed()) {
      nn::GradCheckOptions opts;
      opts.step = gc_step;
      const std::uint64_t s = g.seed.value_or(3);
      std::vector<grad_suite::Entry> entries;
      if (gc_block == "all") entries = grad_suite::run_all(s, opts);
      else entries.push_back(grad_suite::check_block(gc_block, s, opts));
      bool ok = true;
      std::string out;
      for (const auto& e : entries) {
        bool pass = e.result.max_rel_error <= gc_tol;
        ok = ok && pass;
        char line[256];
        std::snprintf(line, sizeof line, "%-18s max_rel_error %.3e over %zu coordinates  %s\n", e.block.c_str(),
                      e.result.max_rel_error, e.result.coordinates, pass ? "PASS" : "FAIL");
        out += line;
      }
      emit(g, out);
      return ok ? 0 : 1;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
