#include <doctest.h>

#include <filesystem>

#include "slubench/checkpoint.hpp"
#include "slubench/errors.hpp"
#include "slubench/experiment.hpp"
#include "slubench/text.hpp"

using namespace slubench;
using namespace slubench::experiment;

namespace {

const char* kSmall =
    "# tiny matrix\n"
    "n_per_intent = 12\n"
    "epochs = 2\n"
    "d_model = 16\n"
    "hidden = 8\n"
    "n_layers = 1\n"
    "\n"
    "[A]\n"
    "family = text\n"
    "train_input = manual\n"
    "eval_input = manual\n"
    "asr_profile = none\n"
    "seed = 5\n"
    "\n"
    "[B]\n"
    "family = wcn\n"
    "train_input = onebest\n"
    "eval_input = wcn\n"
    "asr_profile = adapted\n";

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("config parsing applies global defaults") {
  auto cfg = parse_config(kSmall);
  CHECK(cfg.n_per_intent == 12);
  REQUIRE(cfg.specs.size() == 2);
  CHECK(cfg.specs[0].train.epochs == 2);
  CHECK(cfg.specs[0].d_model == 16);
  CHECK(cfg.specs[0].seed == 5);
  CHECK(cfg.specs[0].train.seed == 5);
  CHECK(cfg.specs[1].family == models::Family::wcn);
  CHECK(cfg.specs[1].seed == parse_config(kSmall).specs[1].seed);
  CHECK(cfg.specs[1].input_label() == "1-best -> WCN (adapted)");
  CHECK(serialize_config(parse_config(serialize_config(cfg))) == serialize_config(cfg));
}

TEST_CASE("config errors") {
  std::string base = kSmall;
  CHECK(parse_error_line(base + "colour = red\n") == 20);
  CHECK(parse_error_line(base + "seed = 3\nseed = 4\n") == 21);
  CHECK(parse_error_line(base + "[A]\n") == 20);
  CHECK(parse_error_line(base + "epochs = many\n") == 20);
  CHECK(parse_error_line(base + "n_per_intent = 4\n") == 20);
  CHECK(parse_error_line("[bad id]\n") == 1);
  CHECK(parse_error_line("just words\n") == 1);
  CHECK_THROWS_AS(parse_config("[X]\nfamily = wcn\neval_input = manual\n"), ContractError);
  CHECK_THROWS_AS(load_config("/nonexistent/matrix.ini"), IoError);
}

TEST_CASE("spec validation") {
  ExperimentSpec s;
  s.id = "X";
  CHECK_NOTHROW(s.validate());
  s.eval_input = InputKind::onebest;
  CHECK_THROWS_AS(s.validate(), ContractError);  // asr_profile none with 1-best input
  s.asr_profile = "unadapted";
  CHECK_NOTHROW(s.validate());
  s.family = models::Family::multimodal;
  CHECK_THROWS_AS(s.validate(), ContractError);
  s.eval_input = InputKind::multimodal;
  CHECK_NOTHROW(s.validate());
  s.train_input = InputKind::wcn;
  CHECK_THROWS_AS(s.validate(), ContractError);
  s.train_input = InputKind::onebest;
  s.variant = "cleaned";
  CHECK_THROWS_AS(s.validate(), ContractError);
}

TEST_CASE("default matrix shape and shipped config file") {
  auto d = default_matrix();
  REQUIRE(d.specs.size() == 8);
  CHECK_NOTHROW(d.validate());
  CHECK(d.specs[0].id == "EXP1");
  CHECK(d.specs[4].family == models::Family::wcn);
  CHECK(d.specs[7].noise_sd < d.specs[6].noise_sd);
  auto shipped = load_config(std::string(SLUBENCH_SOURCE_DIR) + "/configs/default_matrix.ini");
  CHECK(serialize_config(shipped) == serialize_config(d));
}

TEST_CASE("default corpus split sizes") {
  auto data = prepare_corpus(default_matrix());
  CHECK(data.filtered.train.size() == 408);
  CHECK(data.filtered.dev.size() == 48);
  CHECK(data.filtered.test.size() == 48);
  CHECK(data.original.train.size() == 408);
}

TEST_CASE("views per family") {
  auto cfg = parse_config(kSmall);
  auto data = prepare_corpus(cfg);
  const auto& rec = data.filtered.test.front();
  auto none = asr::preset("none", data.vocabulary, data.asr_seed);
  auto adapted = asr::preset("adapted", data.vocabulary, data.asr_seed);
  ExperimentSpec s = cfg.specs[0];
  auto manual = make_view(rec, models::Family::text, InputKind::manual, s, none);
  CHECK(manual.input.tokens == tokenize(rec.transcript));
  auto onebest = make_view(rec, models::Family::text, InputKind::onebest, s, adapted);
  CHECK(onebest.input.tokens == asr::simulate(tokenize(rec.transcript), adapted, rec.id).one_best);
  CHECK(onebest.slot_tags.size() == onebest.input.tokens.size());
  auto cn = make_view(rec, models::Family::wcn, InputKind::onebest, s, adapted);
  wcn::validate(cn.input.cn);
  auto gold_cn = make_view(rec, models::Family::wcn, InputKind::manual, s, none);
  CHECK(wcn::one_best(gold_cn.input.cn) == tokenize(rec.transcript));
  auto mm = make_view(rec, models::Family::multimodal, InputKind::onebest, s, adapted);
  CHECK(mm.input.acoustic.rows == s.frames_per_token * tokenize(rec.transcript).size());
}

TEST_CASE("running a tiny matrix is reproducible and writes every output") {
  auto cfg = parse_config(kSmall);
  auto data = prepare_corpus(cfg);
  auto r1 = run_matrix(cfg, data);
  auto r2 = run_matrix(cfg, data);
  CHECK_FALSE(r1.any_failed);
  REQUIRE(r1.report.rows.size() == 4);
  for (const auto& row : r1.report.rows) CHECK(row.accuracy == doctest::Approx(row.f1_micro).epsilon(1e-12));
  CHECK(report_to_json(r1.report) == report_to_json(r2.report));
  CHECK(render_histories(cfg, r1) == render_histories(cfg, r2));
  auto back = report_from_json(report_to_json(r1.report));
  CHECK(metrics::render_report(back, metrics::ReportFormat::csv) ==
        metrics::render_report(r1.report, metrics::ReportFormat::csv));

  auto dir = std::filesystem::temp_directory_path() / "slubench_matrix_test";
  std::filesystem::remove_all(dir);
  write_outputs(dir.string(), cfg, r1);
  for (const char* f : {"report.md", "report.csv", "history.tsv"}) CHECK(std::filesystem::exists(dir / f));
  CHECK(read_file((dir / "report.md").string()).find("Relative improvement") != std::string::npos);
  std::filesystem::remove_all(dir);

  MatrixConfig empty = cfg;
  empty.specs.clear();
  auto none = run_matrix(empty, data);
  CHECK(none.report.rows.empty());
  CHECK_FALSE(none.any_failed);

  MatrixConfig broken = cfg;
  broken.specs[0].variant = "filtered";
  broken.specs[1].variant = "original";
  PreparedCorpus starved = data;
  starved.original.train.clear();
  auto partial = run_matrix(broken, starved);
  CHECK(partial.any_failed);
  std::size_t failed = 0;
  for (const auto& row : partial.report.rows) failed += row.failed;
  CHECK(failed >= 1);
  CHECK(report_to_json(partial.report).find("\"A\"") != std::string::npos);
}

TEST_CASE("checkpoints round-trip byte-identically") {
  auto cfg = parse_config(kSmall);
  auto data = prepare_corpus(cfg);
  for (const auto& spec : cfg.specs) {
    auto trained = train_experiment(spec, data);
    auto text = checkpoint::serialize(*trained.model);
    CHECK(text.rfind(checkpoint::kMagic, 0) == 0);
    auto back = checkpoint::parse(text);
    CHECK(checkpoint::serialize(back) == text);
    auto rows_a = evaluate_experiment(*trained.model, spec, data);
    auto rows_b = evaluate_experiment(back, spec, data);
    REQUIRE(rows_a.size() == rows_b.size());
    for (std::size_t i = 0; i < rows_a.size(); ++i) CHECK(rows_a[i].accuracy == rows_b[i].accuracy);
    CHECK(checkpoint::serialize(*train_experiment(spec, data).model) == text);
  }
}

TEST_CASE("checkpoint parse errors") {
  CHECK_THROWS_AS(checkpoint::parse("NOT-A-CHECKPOINT\n"), ParseError);
  auto cfg = parse_config(kSmall);
  auto data = prepare_corpus(cfg);
  auto text = checkpoint::serialize(*train_experiment(cfg.specs[0], data).model);
  auto truncated = text.substr(0, text.size() / 2);
  truncated.resize(truncated.rfind('\n') + 1);
  CHECK_THROWS_AS(checkpoint::parse(truncated), ParseError);
  auto renamed = text;
  renamed.replace(renamed.find("P text.emb"), 10, "P text.xyz");
  CHECK_THROWS_AS(checkpoint::parse(renamed), ParseError);
  CHECK_THROWS_AS(checkpoint::load("/nonexistent/model.ckpt"), IoError);
}

TEST_CASE("relative improvement appendix") {
  auto cfg = default_matrix();
  metrics::EvalReport report;
  auto row = [&](const std::string& id, double acc) {
    metrics::EvalRow r;
    r.experiment = id;
    r.variant = "filtered";
    r.split = "test";
    r.accuracy = acc;
    report.rows.push_back(r);
  };
  row("EXP4", 0.69);
  row("EXP5", 0.72);
  row("EXP8", 0.86);
  auto text = relative_improvement_appendix(cfg, report);
  CHECK(text.find("4.35") != std::string::npos);
  CHECK(text.find("24.64") != std::string::npos);
}
