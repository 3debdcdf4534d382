#include "slubench/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "slubench/errors.hpp"
#include "slubench/rng.hpp"

namespace slubench::corpus {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

std::string to_string(Range range) { return range == Range::close ? "close" : "far"; }

void validate_record(const UtteranceRecord& r) {
  if (r.id.empty()) throw ContractError("record with empty id");
  if (r.intent.empty()) throw ContractError("record " + r.id + ": empty intent");
  if (normalize_text(r.transcript).empty())
    throw ContractError("record " + r.id + ": empty transcript");
  if (r.recordings.empty()) throw ContractError("record " + r.id + ": no recordings");
  for (const auto& rec : r.recordings) {
    if (!(rec.metadata_wer >= 0.0))
      throw ContractError("record " + r.id + ": negative metadata wer");
  }
  if (!r.slot_tags.empty() && r.slot_tags.size() != tokenize(r.transcript).size())
    throw ContractError("record " + r.id + ": slot tags do not match transcript length");
}

namespace {

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field \"") + key + "\"", line);
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_string()) throw ParseError(std::string("field \"") + key + "\" must be a string", line);
  return v.get<std::string>();
}

UtteranceRecord record_from_json(const json& obj, std::size_t line, Split split) {
  if (!obj.is_object()) throw ParseError("expected a JSON object", line);
  UtteranceRecord r;
  r.id = require_string(obj, "id", line);
  r.transcript = require_string(obj, "transcript", line);
  r.intent = require_string(obj, "intent", line);
  r.split = split;
  const json& recs = require(obj, "recordings", line);
  if (!recs.is_array()) throw ParseError("field \"recordings\" must be an array", line);
  for (const json& rj : recs) {
    if (!rj.is_object()) throw ParseError("recording must be an object", line);
    RecordingMeta m;
    m.file_id = require_string(rj, "file", line);
    std::string range = require_string(rj, "range", line);
    if (range == "close") m.range = Range::close;
    else if (range == "far") m.range = Range::far;
    else throw ParseError("range must be \"close\" or \"far\", got \"" + range + "\"", line);
    const json& wer = require(rj, "wer", line);
    if (!wer.is_number()) throw ParseError("field \"wer\" must be a number", line);
    m.metadata_wer = wer.get<double>();
    m.metadata_transcript = require_string(rj, "transcript", line);
    r.recordings.push_back(std::move(m));
  }
  if (auto it = obj.find("slots"); it != obj.end()) {
    if (!it->is_array()) throw ParseError("field \"slots\" must be an array", line);
    for (const json& t : *it) {
      if (!t.is_string()) throw ParseError("slot tags must be strings", line);
      r.slot_tags.push_back(t.get<std::string>());
    }
  }
  try {
    validate_record(r);
  } catch (const ContractError& e) {
    throw ParseError(e.what(), line);
  }
  return r;
}

}  // namespace

Corpus parse_metadata(const std::string& text, Split split) {
  Corpus out;
  std::unordered_set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (normalize_text(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    UtteranceRecord r = record_from_json(obj, line_no, split);
    if (!seen.insert(r.id).second) throw ParseError("duplicate id \"" + r.id + "\"", line_no);
    out.push_back(std::move(r));
  }
  return out;
}

Corpus load_metadata(const std::string& path, Split split) {
  return parse_metadata(read_file(path), split);
}

std::string serialize_record(const UtteranceRecord& r) {
  json obj;
  obj["id"] = r.id;
  obj["transcript"] = r.transcript;
  obj["intent"] = r.intent;
  json recs = json::array();
  for (const auto& m : r.recordings) {
    recs.push_back({{"file", m.file_id},
                    {"range", to_string(m.range)},
                    {"wer", m.metadata_wer},
                    {"transcript", m.metadata_transcript}});
  }
  obj["recordings"] = std::move(recs);
  if (!r.slot_tags.empty()) obj["slots"] = r.slot_tags;
  return obj.dump();
}

std::string serialize_metadata(const Corpus& records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

bool has_metadata_errors(const UtteranceRecord& r) {
  return std::any_of(r.recordings.begin(), r.recordings.end(),
                     [](const RecordingMeta& m) { return m.metadata_wer > 0.0; });
}

bool has_inconsistent_transcripts(const UtteranceRecord& r) {
  // Every metadata transcript equal to gold implies they are equal to each other.
  const std::string gold = normalize_text(r.transcript);
  return std::any_of(r.recordings.begin(), r.recordings.end(), [&](const RecordingMeta& m) {
    return normalize_text(m.metadata_transcript) != gold;
  });
}

FilterResult filter_corpus(const Corpus& records) {
  FilterResult res;
  res.reason_counts[kReasonWer] = 0;
  res.reason_counts[kReasonInconsistent] = 0;
  for (const auto& r : records) {
    bool wer = has_metadata_errors(r);
    bool inconsistent = has_inconsistent_transcripts(r);
    if (wer) ++res.reason_counts[kReasonWer];
    if (inconsistent) ++res.reason_counts[kReasonInconsistent];
    (wer || inconsistent ? res.dropped : res.kept).push_back(r);
  }
  return res;
}

CorpusStats compute_stats(const Corpus& records, const Durations& durations) {
  CorpusStats s;
  double total = 0.0;
  std::set<std::string> intents;
  for (const auto& r : records) {
    intents.insert(r.intent);
    for (const auto& m : r.recordings) {
      auto it = durations.find(m.file_id);
      if (it == durations.end()) throw ContractError("no duration for file " + m.file_id);
      ++s.n_audio;
      (m.range == Range::close ? s.n_close : s.n_far) += 1;
      total += it->second;
    }
  }
  s.duration_hr = total / 3600.0;
  s.avg_len_s = s.n_audio ? total / static_cast<double>(s.n_audio) : 0.0;
  s.n_intents = intents.size();
  return s;
}

Durations parse_durations(const std::string& text) {
  Durations d;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_exact(line, '\t');
    double secs = 0;
    if (fields.size() != 2 || fields[0].empty() || !parse_double(fields[1], secs) || secs < 0)
      throw ParseError("expected \"<file>\\t<seconds>\"", line_no);
    d[fields[0]] = secs;
  }
  return d;
}

std::string serialize_durations(const Durations& durations) {
  std::string out;
  for (const auto& [file, secs] : durations) {
    out += file;
    out += '\t';
    out += format_double(secs);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic grammar

namespace {

std::vector<std::string> placeholders(const std::string& tmpl) {
  std::vector<std::string> out;
  for (const auto& tok : tokenize(tmpl)) {
    if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}')
      out.push_back(tok.substr(1, tok.size() - 2));
  }
  return out;
}

}  // namespace

std::vector<std::string> SyntheticGrammar::intents() const {
  std::vector<std::string> out;
  for (const auto& s : scenarios) {
    auto it = actions_per_scenario.find(s);
    if (it == actions_per_scenario.end()) continue;
    for (const auto& a : it->second) out.push_back(s + "_" + a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> SyntheticGrammar::vocabulary() const {
  std::set<std::string> vocab;
  for (const auto& [intent, list] : templates) {
    for (const auto& t : list)
      for (const auto& tok : tokenize(t))
        if (!(tok.front() == '{' && tok.back() == '}')) vocab.insert(tok);
  }
  for (const auto& [slot, fillers] : slot_fillers)
    for (const auto& f : fillers)
      for (const auto& tok : tokenize(f)) vocab.insert(tok);
  return {vocab.begin(), vocab.end()};
}

void validate_grammar(const SyntheticGrammar& g) {
  auto intents = g.intents();
  if (intents.empty()) throw ContractError("grammar defines no intents");
  for (const auto& intent : intents) {
    auto it = g.templates.find(intent);
    if (it == g.templates.end() || it->second.empty())
      throw ContractError("unexpandable template: intent " + intent + " has no templates");
    for (const auto& t : it->second) {
      if (tokenize(t).empty())
        throw ContractError("unexpandable template: intent " + intent + " has an empty template");
      for (const auto& slot : placeholders(t)) {
        auto f = g.slot_fillers.find(slot);
        if (f == g.slot_fillers.end() || f->second.empty())
          throw ContractError("unexpandable template: intent " + intent + " uses slot {" + slot +
                              "} without fillers");
      }
    }
  }
}

SyntheticGrammar default_grammar(std::uint64_t seed) {
  SyntheticGrammar g;
  g.seed = seed;
  g.scenarios = {"alarm", "lights", "music", "news", "weather"};
  g.actions_per_scenario = {{"alarm", {"set", "remove"}},
                            {"lights", {"on", "off"}},
                            {"music", {"play", "stop"}},
                            {"news", {"query"}},
                            {"weather", {"query"}}};
  g.templates = {
      {"lights_on",
       {"turn on the {room} lights", "switch the {device} on", "turn the {device} on please",
        "can you turn on the {device} in the {room}"}},
      {"lights_off",
       {"turn off the {room} lights", "switch the {device} off", "turn the {device} off please",
        "can you turn off the {device} in the {room}"}},
      {"music_play",
       {"play some {genre} music", "play {artist} in the {room}",
        "can you play the {genre} playlist", "start the music please"}},
      {"music_stop",
       {"stop the {genre} music", "stop playing {artist}", "can you pause the music in the {room}",
        "stop the music please"}},
      {"alarm_set",
       {"set an alarm for {time}", "wake me up at {time}", "can you set the alarm for {time} please"}},
      {"alarm_remove",
       {"cancel the alarm for {time}", "remove my {time} alarm", "can you cancel the alarm please"}},
      {"weather_query",
       {"what is the weather in {place}", "will it rain in {place} {date}",
        "what is the weather like {date}"}},
      {"news_query",
       {"what is the latest {topic} news", "tell me the news {date}",
        "can you read the {topic} headlines"}},
  };
  g.slot_fillers = {
      {"room", {"kitchen", "bedroom", "living room", "bathroom", "office"}},
      {"device", {"lamp", "tv", "light", "heater"}},
      {"genre", {"jazz", "rock", "classical", "pop"}},
      {"artist", {"adele", "the beatles", "queen"}},
      {"time", {"seven am", "six thirty", "noon", "ten pm"}},
      {"place", {"london", "paris", "new york", "berlin"}},
      {"date", {"today", "tomorrow", "this weekend"}},
      {"topic", {"sports", "business", "tech", "world"}},
  };
  return g;
}

SyntheticGrammar parse_grammar_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("grammar: malformed JSON: ") + e.what());
  }
  SyntheticGrammar g;
  try {
    g.scenarios = j.at("scenarios").get<std::vector<std::string>>();
    g.actions_per_scenario =
        j.at("actions").get<std::map<std::string, std::vector<std::string>>>();
    g.templates = j.at("templates").get<std::map<std::string, std::vector<std::string>>>();
    g.slot_fillers = j.value("slots", std::map<std::string, std::vector<std::string>>{});
    g.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ParseError(std::string("grammar: ") + e.what());
  }
  return g;
}

Corpus generate_synthetic_corpus(const SyntheticGrammar& g, std::size_t n_per_intent) {
  if (n_per_intent < 1) throw ContractError("n_per_intent must be >= 1");
  validate_grammar(g);
  Corpus out;
  Rng rng(g.seed, "synthetic-corpus");
  for (const auto& intent : g.intents()) {
    const auto& tmpls = g.templates.at(intent);
    for (std::size_t k = 0; k < n_per_intent; ++k) {
      const std::string& tmpl = tmpls[rng.index(tmpls.size())];
      Tokens words;
      std::vector<std::string> tags;
      for (const auto& tok : tokenize(tmpl)) {
        if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}') {
          std::string slot = tok.substr(1, tok.size() - 2);
          const auto& fillers = g.slot_fillers.at(slot);
          Tokens filler = tokenize(fillers[rng.index(fillers.size())]);
          for (std::size_t i = 0; i < filler.size(); ++i) {
            words.push_back(filler[i]);
            tags.push_back((i == 0 ? "B-" : "I-") + slot);
          }
        } else {
          words.push_back(tok);
          tags.push_back("O");
        }
      }
      UtteranceRecord r;
      char idbuf[32];
      std::snprintf(idbuf, sizeof(idbuf), "-%05zu", k);
      r.id = intent + idbuf;
      r.transcript = join(words);
      r.intent = intent;
      r.slot_tags = std::move(tags);
      std::size_t n_rec = 1 + rng.index(2);
      for (std::size_t j = 0; j < n_rec; ++j) {
        RecordingMeta m;
        m.file_id = r.id + "-" + std::to_string(j) + ".flac";
        m.range = rng.uniform() < 0.5 ? Range::close : Range::far;
        m.metadata_wer = 0.0;
        m.metadata_transcript = r.transcript;
        r.recordings.push_back(std::move(m));
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

SplitResult split_corpus(const Corpus& records, const SplitFractions& f, std::uint64_t seed) {
  if (!(f.train > 0 && f.dev > 0 && f.test > 0))
    throw ContractError("split fractions must be positive");
  if (std::abs(f.train + f.dev + f.test - 1.0) > 1e-9)
    throw ContractError("split fractions must sum to 1");
  std::map<std::string, std::vector<std::size_t>> by_intent;
  for (std::size_t i = 0; i < records.size(); ++i) by_intent[records[i].intent].push_back(i);

  std::vector<Split> assignment(records.size(), Split::train);
  SplitResult res;
  for (auto& [intent, idx] : by_intent) {
    if (idx.size() < 3) {
      res.warnings.push_back("intent " + intent + " has " + std::to_string(idx.size()) +
                             " records; all assigned to train");
      continue;
    }
    Rng rng(seed, intent);
    shuffle_in_place(idx, rng);
    const double n = static_cast<double>(idx.size());
    auto n_dev = static_cast<std::size_t>(std::floor(n * f.dev + 1e-9));
    auto n_test = static_cast<std::size_t>(std::floor(n * f.test + 1e-9));
    for (std::size_t k = 0; k < n_dev; ++k) assignment[idx[k]] = Split::dev;
    for (std::size_t k = n_dev; k < n_dev + n_test; ++k) assignment[idx[k]] = Split::test;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    UtteranceRecord r = records[i];
    r.split = assignment[i];
    switch (assignment[i]) {
      case Split::train: res.train.push_back(std::move(r)); break;
      case Split::dev: res.dev.push_back(std::move(r)); break;
      case Split::test: res.test.push_back(std::move(r)); break;
    }
  }
  return res;
}

Corpus inject_annotation_noise(const Corpus& records, double fraction, std::uint64_t seed) {
  if (fraction < 0 || fraction > 1) throw ContractError("noise fraction must be in [0,1]");
  std::set<std::string> intent_set;
  for (const auto& r : records) intent_set.insert(r.intent);
  std::vector<std::string> intents(intent_set.begin(), intent_set.end());
  Corpus out = records;
  if (intents.size() < 2 || fraction == 0) return out;
  for (auto& r : out) {
    Rng rng(seed, "annotation-noise:" + r.id);
    if (rng.uniform() >= fraction) continue;
    std::size_t pick = rng.index(intents.size() - 1);
    auto self = std::find(intents.begin(), intents.end(), r.intent) - intents.begin();
    if (static_cast<std::ptrdiff_t>(pick) >= self) ++pick;
    r.intent = intents[pick];
    auto& m = r.recordings.front();
    Tokens toks = tokenize(m.metadata_transcript);
    m.metadata_wer = 1.0 / static_cast<double>(toks.size());
    toks.pop_back();
    m.metadata_transcript = toks.empty() ? std::string("<unintelligible>") : join(toks);
  }
  return out;
}

// ---------------------------------------------------------------------------
// cleaning fixture

namespace {

const std::vector<std::string>& fixture_intents() {
  static const std::vector<std::string> intents = {
      "alarm_query",        "alarm_remove",       "alarm_set",          "audio_volume_down",
      "audio_volume_mute",  "audio_volume_up",    "calendar_query",     "calendar_remove",
      "calendar_set",       "cooking_recipe",     "datetime_convert",   "datetime_query",
      "email_addcontact",   "email_query",        "email_querycontact", "email_sendemail",
      "general_joke",       "general_quirky",     "iot_cleaning",       "iot_coffee",
      "iot_hue_lightchange", "iot_hue_lightdim",  "iot_hue_lightoff",   "iot_hue_lighton",
      "iot_hue_lightup",    "iot_wemo_off",       "iot_wemo_on",        "lists_createoradd",
      "lists_query",        "lists_remove",       "music_likeness",     "music_query",
      "music_settings",     "news_query",         "play_audiobook",     "play_game",
      "play_music",         "play_podcasts",      "play_radio",         "qa_currency",
      "qa_definition",      "qa_factoid",         "qa_maths",           "recommendation_events",
      "recommendation_locations", "social_post",  "takeaway_order",     "transport_query",
  };
  return intents;
}

}  // namespace

CleaningFixture cleaning_fixture() {
  constexpr std::size_t kCleanClose = 25'799, kCleanFar = 24'769;
  constexpr std::size_t kAllClose = 34'603, kAllFar = 37'674;
  constexpr std::size_t kDirtyClose = kAllClose - kCleanClose;  // 8,804
  constexpr std::size_t kDirtyFar = kAllFar - kCleanFar;        // 12,905
  constexpr std::size_t kOrphanRecords = 300;  // the intent with no clean record

  const auto& intents = fixture_intents();
  const std::size_t n_clean_intents = intents.size() - 1;

  struct Slot {
    bool clean;
    Range range;
    std::size_t ordinal;  // index within clean or dirty group
  };
  std::vector<Slot> slots;
  slots.reserve(kAllClose + kAllFar);
  std::size_t ci = 0, di = 0;
  for (std::size_t i = 0; i < kCleanClose; ++i) slots.push_back({true, Range::close, ci++});
  for (std::size_t i = 0; i < kCleanFar; ++i) slots.push_back({true, Range::far, ci++});
  for (std::size_t i = 0; i < kDirtyClose; ++i) slots.push_back({false, Range::close, di++});
  for (std::size_t i = 0; i < kDirtyFar; ++i) slots.push_back({false, Range::far, di++});
  Rng rng(20221, "cleaning-fixture");
  shuffle_in_place(slots, rng);

  CleaningFixture fx;
  fx.records.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& s = slots[i];
    UtteranceRecord r;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "slurp-%06zu", i);
    r.id = idbuf;
    std::size_t ms;
    if (s.clean) {
      r.intent = intents[s.ordinal % n_clean_intents];
      ms = 1650 + (s.ordinal * 7919) % 1995;
    } else {
      r.intent = s.ordinal < kOrphanRecords ? intents.back() : intents[s.ordinal % intents.size()];
      ms = 2450 + (s.ordinal * 7919) % 2005;
    }
    std::string words = r.intent;
    std::replace(words.begin(), words.end(), '_', ' ');
    r.transcript = "please " + words + " request " + std::to_string(i % 97);
    RecordingMeta m;
    m.file_id = r.id + (s.range == Range::close ? "-headset.flac" : ".flac");
    m.range = s.range;
    m.metadata_transcript = r.transcript;
    if (!s.clean) {
      switch (s.ordinal % 3) {
        case 0: m.metadata_transcript = "please " + words; break;
        case 1: m.metadata_wer = 0.05 * static_cast<double>(1 + s.ordinal % 5); break;
        default:
          m.metadata_wer = 0.25;
          m.metadata_transcript = words;
          break;
      }
    }
    fx.durations[m.file_id] = static_cast<double>(ms) / 1000.0;
    r.recordings.push_back(std::move(m));
    fx.records.push_back(std::move(r));
  }
  return fx;
}

}  // namespace slubench::corpus
