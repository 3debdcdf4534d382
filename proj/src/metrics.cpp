#include "slubench/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>
#include <tuple>

#include "slubench/errors.hpp"

namespace slubench::metrics {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> dp_table(const Tokens& ref, const Tokens& hyp) {
  const std::size_t R = ref.size(), H = hyp.size();
  std::vector<std::size_t> d((R + 1) * (H + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (H + 1) + j]; };
  for (std::size_t i = 0; i <= R; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= H; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= R; ++i) {
    for (std::size_t j = 1; j <= H; ++j) {
      std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  return d;
}

}  // namespace

std::size_t edit_distance(const Tokens& a, const Tokens& b) {
  return dp_table(a, b).back();
}

std::vector<EditOp> align_ops(const Tokens& ref, const Tokens& hyp) {
  if (ref.empty()) throw ContractError("align: empty reference (WER undefined)");
  const std::size_t H = hyp.size();
  auto d = dp_table(ref, hyp);
  auto at = [&](std::size_t i, std::size_t j) { return d[i * (H + 1) + j]; };
  std::vector<EditOp> ops;
  std::size_t i = ref.size(), j = H;
  while (i > 0 || j > 0) {
    std::size_t c = at(i, j);
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && c == at(i - 1, j - 1)) {
      ops.push_back({EditKind::hit, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && j > 0 && c == at(i - 1, j - 1) + 1) {
      ops.push_back({EditKind::substitution, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && c == at(i - 1, j) + 1) {
      ops.push_back({EditKind::deletion, i - 1, npos});
      --i;
    } else {
      ops.push_back({EditKind::insertion, npos, j - 1});
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

AlignmentResult align(const Tokens& ref, const Tokens& hyp) {
  AlignmentResult res;
  res.ref_len = ref.size();
  for (const auto& op : align_ops(ref, hyp)) {
    switch (op.kind) {
      case EditKind::hit: ++res.hits; break;
      case EditKind::substitution: ++res.substitutions; break;
      case EditKind::deletion: ++res.deletions; break;
      case EditKind::insertion: ++res.insertions; break;
    }
  }
  return res;
}

double wer(const Tokens& ref, const Tokens& hyp) {
  auto a = align(ref, hyp);
  return static_cast<double>(a.errors()) / static_cast<double>(a.ref_len);
}

double wer(const std::string& ref, const std::string& hyp) {
  return wer(tokenize(ref), tokenize(hyp));
}

double intent_accuracy(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  if (gold.size() != pred.size())
    throw ContractError("intent_accuracy: length mismatch (" + std::to_string(gold.size()) +
                        " gold vs " + std::to_string(pred.size()) + " predicted)");
  if (gold.empty()) throw ContractError("intent_accuracy: empty label lists");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += gold[i] == pred[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

F1Scores f1_scores(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  if (gold.size() != pred.size())
    throw ContractError("f1_scores: length mismatch (" + std::to_string(gold.size()) +
                        " gold vs " + std::to_string(pred.size()) + " predicted)");
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == pred[i]) {
      ++counts[gold[i]].tp;
    } else {
      ++counts[gold[i]].fn;
      ++counts[pred[i]].fp;
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  auto f1 = [](double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); };

  F1Scores out;
  Counts pooled;
  double macro_sum = 0.0;
  std::size_t macro_n = 0;
  for (const auto& [label, c] : counts) {
    ClassScores s;
    s.precision = ratio(c.tp, c.tp + c.fp);
    s.recall = ratio(c.tp, c.tp + c.fn);
    s.f1 = f1(s.precision, s.recall);
    s.support = c.tp + c.fn;
    if (s.support > 0) {
      macro_sum += s.f1;
      ++macro_n;
    }
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
    out.per_class[label] = s;
  }
  out.micro = f1(ratio(pooled.tp, pooled.tp + pooled.fp), ratio(pooled.tp, pooled.tp + pooled.fn));
  out.macro = macro_n ? macro_sum / static_cast<double>(macro_n) : 0.0;
  return out;
}

double relative_improvement(double baseline, double candidate) {
  if (!(baseline > 0)) throw ContractError("relative_improvement: baseline must be positive");
  return 100.0 * (candidate - baseline) / baseline;
}

EvalRow score_row(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  EvalRow row;
  row.accuracy = intent_accuracy(gold, pred);
  auto f1 = f1_scores(gold, pred);
  row.f1_micro = f1.micro;
  row.f1_macro = f1.macro;
  row.per_class = std::move(f1.per_class);
  return row;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  if (name == "csv") return ReportFormat::csv;
  throw ContractError("unknown report format \"" + name + "\" (expected markdown or csv)");
}

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) &&
        std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      na.erase(0, std::min(na.find_first_not_of('0'), na.size()));
      nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size()));
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie, j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i, ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

namespace {

int variant_rank(const std::string& v) {
  if (v == "original") return 0;
  if (v == "filtered") return 1;
  return 2;
}

int split_rank(const std::string& s) {
  if (s == "dev") return 0;
  if (s == "test") return 1;
  return 2;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
  std::vector<std::string> experiments;
  std::map<std::string, std::string> inputs;
  std::vector<std::pair<std::string, std::string>> groups;
  std::map<std::tuple<std::string, std::string, std::string>, const EvalRow*> cells;
  std::set<std::string> failed;
  for (const auto& row : report.rows) {
    if (!inputs.count(row.experiment)) {
      experiments.push_back(row.experiment);
      inputs[row.experiment] = row.input;
    }
    if (row.failed) {
      failed.insert(row.experiment);
      continue;
    }
    std::pair<std::string, std::string> g{row.variant, row.split};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    cells[{row.experiment, row.variant, row.split}] = &row;
  }
  std::stable_sort(experiments.begin(), experiments.end(), natural_less);
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    auto ka = std::make_tuple(variant_rank(a.first), a.first, split_rank(a.second), a.second);
    auto kb = std::make_tuple(variant_rank(b.first), b.first, split_rank(b.second), b.second);
    return ka < kb;
  });

  std::vector<std::string> header = {"Exp.", "Input"};
  for (const auto& [variant, split] : groups) {
    for (const char* metric : {"ACC", "F1", "F1-macro"})
      header.push_back(variant + " " + split + " " + metric);
  }
  std::vector<std::vector<std::string>> body;
  for (const auto& exp : experiments) {
    std::vector<std::string> line = {exp, inputs[exp]};
    for (const auto& [variant, split] : groups) {
      auto it = cells.find({exp, variant, split});
      for (int m = 0; m < 3; ++m) {
        if (failed.count(exp)) {
          line.push_back("FAILED");
        } else if (it == cells.end()) {
          line.push_back("-");
        } else {
          const EvalRow& r = *it->second;
          double v = m == 0 ? r.accuracy : (m == 1 ? r.f1_micro : r.f1_macro);
          line.push_back(format_half_up(v, 2));
        }
      }
    }
    body.push_back(std::move(line));
  }

  std::string out;
  if (format == ReportFormat::csv) {
    auto emit = [&](const std::vector<std::string>& cols) {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out += ',';
        out += csv_field(cols[i]);
      }
      out += '\n';
    };
    emit(header);
    for (const auto& l : body) emit(l);
  } else {
    auto emit = [&](const std::vector<std::string>& cols) {
      out += '|';
      for (const auto& c : cols) out += " " + c + " |";
      out += '\n';
    };
    emit(header);
    out += '|';
    for (std::size_t i = 0; i < header.size(); ++i) out += i < 2 ? " --- |" : " ---: |";
    out += '\n';
    for (const auto& l : body) emit(l);
  }
  return out;
}

}  // namespace slubench::metrics
