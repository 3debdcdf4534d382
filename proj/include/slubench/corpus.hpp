#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slubench/text.hpp"

namespace slubench::corpus {

enum class Split { train, dev, test };
enum class Range { close, far };

std::string to_string(Split split);
std::string to_string(Range range);

struct RecordingMeta {
  std::string file_id;
  Range range = Range::close;
  double metadata_wer = 0.0;
  std::string metadata_transcript;
};

struct UtteranceRecord {
  std::string id;
  std::string transcript;
  std::string intent;  // "scenario_action"
  std::vector<RecordingMeta> recordings;
  Split split = Split::train;
  // Optional BIO tags aligned with tokenize(transcript); empty means all "O".
  std::vector<std::string> slot_tags;
};

using Corpus = std::vector<UtteranceRecord>;

// Throws ContractError if a record breaks the UtteranceRecord invariants.
void validate_record(const UtteranceRecord& record);

// JSON-lines metadata. Blank lines are skipped; unknown keys are ignored.
// Malformed lines raise ParseError with the 1-based line number; a repeated
// id raises ParseError naming the id.
Corpus parse_metadata(const std::string& text, Split split);
Corpus load_metadata(const std::string& path, Split split);
std::string serialize_metadata(const Corpus& records);
std::string serialize_record(const UtteranceRecord& record);

inline constexpr const char* kReasonWer = "wer_gt_zero";
inline constexpr const char* kReasonInconsistent = "inconsistent_transcript";

struct FilterResult {
  Corpus kept;
  Corpus dropped;
  // Both keys always present. A record failing both rules counts once per rule.
  std::map<std::string, std::size_t> reason_counts;
};

// True when some recording has metadata_wer > 0.
bool has_metadata_errors(const UtteranceRecord& record);
// True when some metadata transcript differs from the gold transcript after
// normalize_text.
bool has_inconsistent_transcripts(const UtteranceRecord& record);

FilterResult filter_corpus(const Corpus& records);

struct CorpusStats {
  std::size_t n_audio = 0;
  std::size_t n_close = 0;
  std::size_t n_far = 0;
  double duration_hr = 0.0;
  double avg_len_s = 0.0;
  std::size_t n_intents = 0;
};

using Durations = std::map<std::string, double>;

// Throws ContractError naming the first recording without a duration.
CorpusStats compute_stats(const Corpus& records, const Durations& durations);

// Two-column TSV: file id, seconds.
Durations parse_durations(const std::string& text);
std::string serialize_durations(const Durations& durations);

struct SyntheticGrammar {
  std::vector<std::string> scenarios;
  std::map<std::string, std::vector<std::string>> actions_per_scenario;
  // intent -> templates; a template is whitespace-separated tokens where
  // "{slot}" is a placeholder.
  std::map<std::string, std::vector<std::string>> templates;
  std::map<std::string, std::vector<std::string>> slot_fillers;
  std::uint64_t seed = 0;

  std::vector<std::string> intents() const;
  // Sorted vocabulary of every token the grammar can emit.
  std::vector<std::string> vocabulary() const;
};

// Throws ContractError naming the offending intent.
void validate_grammar(const SyntheticGrammar& grammar);

// The built-in home-assistant grammar: 8 intents over 5 scenarios.
SyntheticGrammar default_grammar(std::uint64_t seed = 7);
SyntheticGrammar parse_grammar_json(const std::string& text);

Corpus generate_synthetic_corpus(const SyntheticGrammar& grammar, std::size_t n_per_intent);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct SplitResult {
  Corpus train;
  Corpus dev;
  Corpus test;
  std::vector<std::string> warnings;
};

SplitResult split_corpus(const Corpus& records, const SplitFractions& fractions,
                         std::uint64_t seed);

// Corrupts a fraction of records the way inconsistent annotations look in
// metadata: intent relabelled, one recording given nonzero WER and a
// perturbed transcript. Records touched are exactly those filter_corpus
// would later drop.
Corpus inject_annotation_noise(const Corpus& records, double fraction, std::uint64_t seed);

struct CleaningFixture {
  Corpus records;
  Durations durations;
};

// A 72,277-recording corpus laid out with the original/filtered statistics
// of the SLURP release: 50,568 clean recordings (25,799 close, 24,769 far)
// over 47 intents; 21,709 recordings that fail the cleaning rules, one
// intent of which is never clean.
CleaningFixture cleaning_fixture();

}  // namespace slubench::corpus
