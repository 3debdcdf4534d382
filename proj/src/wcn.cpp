#include "slubench/wcn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "slubench/errors.hpp"

namespace slubench::wcn {

namespace {

struct Interval {
  double lo, hi;
};

// Closed intervals sharing more than a point. A zero-length interval
// overlaps anything that contains it.
bool overlaps(Interval a, Interval b) {
  double lo = std::max(a.lo, b.lo), hi = std::min(a.hi, b.hi);
  if (lo < hi) return true;
  return lo == hi && (a.lo == a.hi || b.lo == b.hi);
}

long long micro_units(double p) { return std::llround(p * 1e6); }

}  // namespace

void canonicalize(ConfusionNetwork& cn) {
  for (auto& bin : cn.bins) {
    std::sort(bin.entries.begin(), bin.entries.end(), [](const Entry& a, const Entry& b) {
      long long ua = micro_units(a.posterior), ub = micro_units(b.posterior);
      if (ua != ub) return ua > ub;
      return a.token < b.token;
    });
  }
}

ConfusionNetwork build_from_lattice(const lattice::Lattice& l, const BuildOptions& opt) {
  const auto post = lattice::forward_backward(l, opt.lm_scale);
  struct Item {
    double mid, start, end;
    std::size_t arc;
  };
  std::vector<Item> items;
  items.reserve(l.arcs.size());
  for (std::size_t i = 0; i < l.arcs.size(); ++i) {
    double s = l.nodes[l.arcs[i].from].time, e = l.nodes[l.arcs[i].to].time;
    items.push_back({0.5 * (s + e), s, e, i});
  }
  std::sort(items.begin(), items.end(), [&](const Item& a, const Item& b) {
    return std::tie(a.mid, a.start, a.end, l.arcs[a.arc].word, a.arc) <
           std::tie(b.mid, b.start, b.end, l.arcs[b.arc].word, b.arc);
  });

  struct Cluster {
    Interval running;
    double start, end;
    std::map<std::string, double> mass;
  };
  std::vector<Cluster> clusters;
  for (const Item& it : items) {
    Interval iv{it.start, it.end};
    double p = post.posterior[it.arc];
    if (!clusters.empty() && overlaps(clusters.back().running, iv)) {
      Cluster& c = clusters.back();
      c.running = {std::max(c.running.lo, iv.lo), std::min(c.running.hi, iv.hi)};
      c.start = std::min(c.start, it.start);
      c.end = std::max(c.end, it.end);
      c.mass[l.arcs[it.arc].word] += p;
    } else {
      Cluster c{iv, it.start, it.end, {}};
      c.mass[l.arcs[it.arc].word] += p;
      clusters.push_back(std::move(c));
    }
  }

  ConfusionNetwork cn;
  for (auto& c : clusters) {
    Bin bin;
    bin.start = c.start;
    bin.end = c.end;
    double total = 0.0;
    for (const auto& [word, p] : c.mass) {
      if (p > 0) {
        bin.entries.push_back({word, p});
        total += p;
      }
    }
    // Deficits below rounding noise of forward-backward are not epsilon mass.
    if (total < 1.0 - 1e-9) {
      bin.entries.push_back({kEpsilon, 1.0 - total});
      total = 1.0;
    }
    for (auto& e : bin.entries) e.posterior /= total;
    if (bin.entries.empty()) continue;
    cn.bins.push_back(std::move(bin));
  }
  auto eps_mass = [](const Bin& b) {
    for (const auto& e : b.entries)
      if (e.token == kEpsilon) return e.posterior;
    return 0.0;
  };
  std::vector<Bin> kept;
  for (auto& b : cn.bins)
    if (eps_mass(b) <= opt.epsilon_prune) kept.push_back(std::move(b));
  if (kept.empty() && !cn.bins.empty()) {
    auto least = std::min_element(cn.bins.begin(), cn.bins.end(),
                                  [&](const Bin& a, const Bin& b) { return eps_mass(a) < eps_mass(b); });
    kept.push_back(std::move(*least));
  }
  cn.bins = std::move(kept);
  canonicalize(cn);
  return cn;
}

void validate(const ConfusionNetwork& cn, double tol) {
  if (cn.bins.empty()) throw ContractError("confusion network has no bins");
  for (std::size_t i = 0; i < cn.bins.size(); ++i) {
    const Bin& b = cn.bins[i];
    const std::string where = "bin " + std::to_string(i);
    if (b.entries.empty()) throw ContractError(where + " is empty");
    std::set<std::string> seen;
    double sum = 0.0;
    for (const auto& e : b.entries) {
      if (e.token.empty()) throw ContractError(where + " has an empty token");
      if (!seen.insert(e.token).second) throw ContractError(where + " repeats token " + e.token);
      if (!(e.posterior > 0.0 && e.posterior <= 1.0 + tol))
        throw ContractError(where + " has posterior outside (0,1]");
      sum += e.posterior;
    }
    if (std::abs(sum - 1.0) > tol) throw ContractError(where + " posteriors do not sum to 1");
  }
}

Tokens one_best(const ConfusionNetwork& cn) {
  Tokens out;
  for (const auto& bin : cn.bins) {
    const Entry* best = nullptr;
    for (const auto& e : bin.entries) {
      if (!best) {
        best = &e;
        continue;
      }
      bool better;
      if (e.posterior != best->posterior) {
        better = e.posterior > best->posterior;
      } else if ((e.token == kEpsilon) != (best->token == kEpsilon)) {
        better = best->token == kEpsilon;
      } else {
        better = e.token < best->token;
      }
      if (better) best = &e;
    }
    if (best && best->token != kEpsilon) out.push_back(best->token);
  }
  return out;
}

std::string serialize_wcn(const ConfusionNetwork& cn_in) {
  ConfusionNetwork cn = cn_in;
  canonicalize(cn);
  std::string out = "WCN " + std::to_string(cn.bins.size()) + "\n";
  for (const auto& b : cn.bins) {
    out += "B " + format_double(b.start) + " " + format_double(b.end);
    for (const auto& e : b.entries) out += " " + e.token + ":" + format_fixed(e.posterior, 6);
    out += "\n";
  }
  return out;
}

ConfusionNetwork parse_wcn(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t n_bins = 0;
  ConfusionNetwork cn;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = split_exact(line, ' ');
    for (const auto& field : f)
      if (field.empty()) throw ParseError("empty field (fields are single-space separated)", line_no);
    if (!have_header) {
      if (f.size() != 2 || f[0] != "WCN" || !parse_size(f[1], n_bins))
        throw ParseError("expected header \"WCN <n_bins>\"", line_no);
      have_header = true;
      continue;
    }
    if (f[0] != "B" || f.size() < 4)
      throw ParseError("expected \"B <start> <end> token:posterior ...\"", line_no);
    Bin bin;
    if (!parse_double(f[1], bin.start) || !parse_double(f[2], bin.end))
      throw ParseError("bad bin time span", line_no);
    const std::size_t index = cn.bins.size();
    double sum = 0.0;
    std::set<std::string> seen;
    for (std::size_t k = 3; k < f.size(); ++k) {
      auto colon = f[k].rfind(':');
      Entry e;
      if (colon == std::string::npos || colon == 0 ||
          !parse_double(std::string_view(f[k]).substr(colon + 1), e.posterior))
        throw ParseError("bad entry \"" + f[k] + "\"", line_no);
      e.token = f[k].substr(0, colon);
      if (!(e.posterior > 0.0 && e.posterior <= 1.0))
        throw ParseError("bin " + std::to_string(index) + ": posterior outside (0,1]", line_no);
      if (!seen.insert(e.token).second)
        throw ParseError("bin " + std::to_string(index) + ": repeated token " + e.token, line_no);
      sum += e.posterior;
      bin.entries.push_back(std::move(e));
    }
    if (std::abs(sum - 1.0) > 1e-3)
      throw ParseError("bin " + std::to_string(index) + ": posteriors sum to " + format_fixed(sum, 6),
                       line_no);
    cn.bins.push_back(std::move(bin));
  }
  if (!have_header) throw ParseError("missing WCN header", line_no);
  if (cn.bins.size() != n_bins)
    throw ParseError("header declares " + std::to_string(n_bins) + " bins, found " +
                     std::to_string(cn.bins.size()));
  if (cn.bins.empty()) throw ParseError("confusion network has no bins");
  canonicalize(cn);
  return cn;
}

ConfusionNetwork from_tokens(const Tokens& tokens, double slot) {
  ConfusionNetwork cn;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Bin b;
    b.start = slot * static_cast<double>(i);
    b.end = slot * static_cast<double>(i + 1);
    b.entries.push_back({tokens[i], 1.0});
    cn.bins.push_back(std::move(b));
  }
  return cn;
}

}  // namespace slubench::wcn
