#include <doctest.h>

#include <algorithm>
#include <set>

#include "slubench/corpus.hpp"
#include "slubench/errors.hpp"
#include "slubench/text.hpp"

using namespace slubench;
using namespace slubench::corpus;

namespace {

UtteranceRecord clean_record(const std::string& id, const std::string& intent, const std::string& text) {
  UtteranceRecord r;
  r.id = id;
  r.intent = intent;
  r.transcript = text;
  r.recordings.push_back({id + ".flac", Range::close, 0.0, text});
  return r;
}

std::multiset<std::string> ids(const Corpus& c) {
  std::multiset<std::string> out;
  for (const auto& r : c) out.insert(r.id);
  return out;
}

}  // namespace

TEST_CASE("normalize_text lowercases and collapses whitespace, keeps punctuation") {
  CHECK(normalize_text("  Turn   ON\tthe Lights, ") == "turn on the lights,");
  CHECK(tokenize(" a  b ") == Tokens{"a", "b"});
  CHECK(tokenize("   ").empty());
}

TEST_CASE("format_half_up rounds on the decimal form") {
  CHECK(format_half_up(0.8649, 2) == "0.86");
  CHECK(format_half_up(0.865, 2) == "0.87");
  CHECK(format_half_up(0.125, 2) == "0.13");
  CHECK(format_half_up(1.0, 2) == "1.00");
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 12345.678}) {
    double back = 0;
    REQUIRE(parse_double(format_double(v), back));
    CHECK(back == v);
  }
}

TEST_CASE("filter keeps a clean record and drops a nonzero-WER one") {
  auto a = clean_record("a", "lights_on", "turn on the lights");
  auto b = clean_record("b", "lights_on", "turn on the lights");
  b.recordings[0].metadata_wer = 0.12;
  auto res = filter_corpus({a, b});
  REQUIRE(res.kept.size() == 1);
  CHECK(res.kept[0].id == "a");
  REQUIRE(res.dropped.size() == 1);
  CHECK(res.reason_counts.at(kReasonWer) == 1);
  CHECK(res.reason_counts.at(kReasonInconsistent) == 0);
}

TEST_CASE("transcript consistency is judged after normalization") {
  auto a = clean_record("a", "x_y", "turn on the lights");
  a.recordings[0].metadata_transcript = "Turn  on the LIGHTS ";
  CHECK_FALSE(has_inconsistent_transcripts(a));
  a.recordings[0].metadata_transcript = "turn on the lights.";
  CHECK(has_inconsistent_transcripts(a));
}

TEST_CASE("filter is idempotent and partitions its input") {
  auto grammar = default_grammar(3);
  auto noisy = inject_annotation_noise(generate_synthetic_corpus(grammar, 20), 0.3, 5);
  auto first = filter_corpus(noisy);
  auto second = filter_corpus(first.kept);
  CHECK(second.kept.size() == first.kept.size());
  CHECK(second.dropped.empty());
  auto all = ids(first.kept);
  for (const auto& r : first.dropped) {
    CHECK(all.count(r.id) == 0);
    all.insert(r.id);
  }
  CHECK(all == ids(noisy));
  CHECK(first.dropped.size() > 0);
}

TEST_CASE("a clean synthetic corpus loses nothing to filtering") {
  auto c = generate_synthetic_corpus(default_grammar(), 10);
  CHECK(filter_corpus(c).dropped.empty());
}

TEST_CASE("compute_stats arithmetic") {
  UtteranceRecord a = clean_record("a", "x_y", "hi");
  a.recordings.push_back({"a-far.flac", Range::far, 0.0, "hi"});
  UtteranceRecord b = clean_record("b", "x_y", "hi");
  b.recordings.clear();
  Durations d{{"a.flac", 2.0}, {"a-far.flac", 4.0}};
  auto s = compute_stats({a, b}, d);
  CHECK(s.n_audio == 2);
  CHECK(s.n_close == 1);
  CHECK(s.n_far == 1);
  CHECK(s.duration_hr == doctest::Approx(6.0 / 3600.0));
  CHECK(s.avg_len_s == doctest::Approx(3.0));
  CHECK(s.n_intents == 1);

  auto empty = compute_stats({}, {});
  CHECK(empty.n_audio == 0);
  CHECK(empty.n_intents == 0);
  CHECK(empty.duration_hr == 0.0);

  try {
    compute_stats({a}, {{"a.flac", 1.0}});
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("a-far.flac") != std::string::npos);
  }
}

TEST_CASE("the cleaning fixture reproduces both columns") {
  auto fx = cleaning_fixture();
  auto orig = compute_stats(fx.records, fx.durations);
  CHECK(orig.n_audio == 72'277);
  CHECK(orig.n_close == 34'603);
  CHECK(orig.n_far == 37'674);
  CHECK(orig.n_intents == 48);
  CHECK(format_fixed(orig.duration_hr, 0) == "58");
  CHECK(format_fixed(orig.avg_len_s, 1) == "2.9");

  auto res = filter_corpus(fx.records);
  CHECK(res.kept.size() == 50'568);
  auto filt = compute_stats(res.kept, fx.durations);
  CHECK(filt.n_close == 25'799);
  CHECK(filt.n_far == 24'769);
  CHECK(filt.n_intents == 47);
  CHECK(format_fixed(filt.duration_hr, 1) == "37.2");
  CHECK(format_fixed(filt.avg_len_s, 1) == "2.6");
}

TEST_CASE("metadata parsing") {
  std::string text =
      "{\"id\":\"u1\",\"transcript\":\"hi there\",\"intent\":\"greet_hello\",\"extra\":1,"
      "\"recordings\":[{\"file\":\"u1.flac\",\"range\":\"far\",\"wer\":0.0,\"transcript\":\"hi there\"}]}\n"
      "\n";
  auto c = parse_metadata(text, Split::dev);
  REQUIRE(c.size() == 1);
  CHECK(c[0].recordings[0].range == Range::far);
  CHECK(c[0].split == Split::dev);
  CHECK(parse_metadata(serialize_metadata(c), Split::dev)[0].transcript == "hi there");

  SUBCASE("malformed line carries its number") {
    try {
      parse_metadata(text + "{not json\n", Split::train);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("repeated id") { CHECK_THROWS_AS(parse_metadata(text + text, Split::train), ParseError); }
  SUBCASE("bad range") {
    std::string bad = text;
    bad.replace(bad.find("far"), 3, "mid");
    CHECK_THROWS_AS(parse_metadata(bad, Split::train), ParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_metadata("/nonexistent/x.jsonl", Split::train), IoError); }
}

TEST_CASE("synthetic generation counts, determinism and closed fillers") {
  auto g = default_grammar(11);
  auto c = generate_synthetic_corpus(g, 50);
  CHECK(c.size() == 400);
  std::map<std::string, std::size_t> per_intent;
  for (const auto& r : c) per_intent[r.intent]++;
  CHECK(per_intent.size() == 8);
  for (const auto& [intent, n] : per_intent) CHECK(n == 50);
  CHECK(serialize_metadata(c) == serialize_metadata(generate_synthetic_corpus(g, 50)));
  for (const auto& r : c)
    for (const auto& rec : r.recordings) CHECK(rec.metadata_wer == 0.0);

  SyntheticGrammar small;
  small.seed = 1;
  small.scenarios = {"iot"};
  small.actions_per_scenario = {{"iot", {"on"}}};
  small.templates = {{"iot_on", {"switch on the {device}"}}};
  small.slot_fillers = {{"device", {"lamp", "tv"}}};
  for (const auto& r : generate_synthetic_corpus(small, 30)) {
    auto t = tokenize(r.transcript);
    REQUIRE(t.size() == 4);
    CHECK((t[3] == "lamp" || t[3] == "tv"));
    REQUIRE(r.slot_tags.size() == 4);
    CHECK(r.slot_tags[3] == "B-device");
  }

  small.templates["iot_on"] = {"switch on the {colour}"};
  try {
    validate_grammar(small);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("iot_on") != std::string::npos);
  }
}

TEST_CASE("stratified split") {
  Corpus one;
  for (int i = 0; i < 100; ++i) one.push_back(clean_record("r" + std::to_string(i), "a_b", "x"));
  auto s = split_corpus(one, {0.8, 0.1, 0.1}, 4);
  CHECK(s.train.size() == 80);
  CHECK(s.dev.size() == 10);
  CHECK(s.test.size() == 10);
  CHECK_THROWS_AS(split_corpus(one, {0.8, 0.05, 0.05}, 4), ContractError);

  auto c = generate_synthetic_corpus(default_grammar(), 63);
  auto a = split_corpus(c, {0.8, 0.1, 0.1}, 13);
  auto b = split_corpus(c, {0.8, 0.1, 0.1}, 13);
  CHECK(serialize_metadata(a.train) == serialize_metadata(b.train));
  CHECK(serialize_metadata(a.test) == serialize_metadata(b.test));
  auto all = ids(a.train);
  for (const auto* part : {&a.dev, &a.test})
    for (const auto& r : *part) {
      CHECK(all.count(r.id) == 0);
      all.insert(r.id);
    }
  CHECK(all == ids(c));
  std::map<std::string, std::size_t> dev_per_intent;
  for (const auto& r : a.dev) dev_per_intent[r.intent]++;
  for (const auto& [intent, n] : dev_per_intent) {
    CHECK(n >= 5);
    CHECK(n <= 7);
  }
  for (const auto& r : a.dev) CHECK(r.split == Split::dev);

  Corpus tiny{clean_record("t1", "rare_one", "x"), clean_record("t2", "rare_one", "x")};
  auto t = split_corpus(tiny, {0.8, 0.1, 0.1}, 1);
  CHECK(t.train.size() == 2);
  CHECK(t.warnings.size() == 1);
}

TEST_CASE("durations TSV round trip") {
  Durations d{{"a.flac", 1.25}, {"b.flac", 3.0}};
  CHECK(parse_durations(serialize_durations(d)) == d);
  CHECK_THROWS_AS(parse_durations("a.flac\tabc\n"), ParseError);
}
