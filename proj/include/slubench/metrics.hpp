#pragma once

#include <map>
#include <string>
#include <vector>

#include "slubench/text.hpp"

namespace slubench::metrics {

struct AlignmentResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t hits = 0;
  std::size_t ref_len = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
};

enum class EditKind { hit, substitution, deletion, insertion };

struct EditOp {
  EditKind kind;
  // Index into the reference (hit, substitution, deletion) and into the
  // hypothesis (hit, substitution, insertion); npos when not applicable.
  std::size_t ref_index;
  std::size_t hyp_index;
};

// Unit-cost Levenshtein alignment. Backtrace prefers hit, then
// substitution, deletion, insertion. Throws ContractError on an empty
// reference.
AlignmentResult align(const Tokens& reference, const Tokens& hypothesis);
std::vector<EditOp> align_ops(const Tokens& reference, const Tokens& hypothesis);
// Plain edit distance; defined for empty sequences too.
std::size_t edit_distance(const Tokens& a, const Tokens& b);

double wer(const Tokens& reference, const Tokens& hypothesis);
// Normalizes and tokenizes both strings first.
double wer(const std::string& reference, const std::string& hypothesis);

double intent_accuracy(const std::vector<std::string>& gold, const std::vector<std::string>& pred);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
};

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;  // mean over classes present in gold
  std::map<std::string, ClassScores> per_class;  // every gold or predicted class
};

F1Scores f1_scores(const std::vector<std::string>& gold, const std::vector<std::string>& pred);

// Percentage change of candidate over baseline. Throws for baseline <= 0.
double relative_improvement(double baseline, double candidate);

struct EvalRow {
  std::string experiment;
  std::string input;    // e.g. "manual -> 1-best"
  std::string variant;  // "original" or "filtered"
  std::string split;    // "dev" or "test"
  double accuracy = 0.0;
  double f1_micro = 0.0;
  double f1_macro = 0.0;
  std::map<std::string, ClassScores> per_class;
  bool failed = false;
  std::string error;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

EvalRow score_row(const std::vector<std::string>& gold, const std::vector<std::string>& pred);

enum class ReportFormat { markdown, csv };

ReportFormat parse_report_format(const std::string& name);

// Experiments as rows (natural order of ids), one column group per
// (variant, split) holding ACC, F1 (micro) and F1-macro. Values are rounded
// half-up to 2 decimals.
std::string render_report(const EvalReport& report, ReportFormat format);

// "EXP2" < "EXP10".
bool natural_less(const std::string& a, const std::string& b);

}  // namespace slubench::metrics
