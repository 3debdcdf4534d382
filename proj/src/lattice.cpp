#include "slubench/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

#include "slubench/errors.hpp"

namespace slubench::lattice {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

std::vector<std::vector<std::size_t>> out_arcs(const Lattice& l) {
  std::vector<std::vector<std::size_t>> out(l.nodes.size());
  for (std::size_t i = 0; i < l.arcs.size(); ++i) out[l.arcs[i].from].push_back(i);
  return out;
}

std::vector<std::vector<std::size_t>> in_arcs(const Lattice& l) {
  std::vector<std::vector<std::size_t>> in(l.nodes.size());
  for (std::size_t i = 0; i < l.arcs.size(); ++i) in[l.arcs[i].to].push_back(i);
  return in;
}

// Returns an empty vector when acyclic, else the node ids of one cycle.
std::vector<std::size_t> find_cycle(const Lattice& l) {
  const auto out = out_arcs(l);
  enum Color : unsigned char { white, grey, black };
  std::vector<Color> color(l.nodes.size(), white);
  std::vector<std::size_t> parent(l.nodes.size(), 0);
  for (std::size_t root = 0; root < l.nodes.size(); ++root) {
    if (color[root] != white) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    color[root] = grey;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next == out[v].size()) {
        color[v] = black;
        stack.pop_back();
        continue;
      }
      std::size_t u = l.arcs[out[v][next++]].to;
      if (color[u] == grey) {
        std::vector<std::size_t> cycle{u};
        for (std::size_t w = v; w != u; w = parent[w]) cycle.push_back(w);
        cycle.push_back(u);
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      if (color[u] == white) {
        color[u] = grey;
        parent[u] = v;
        stack.push_back({u, 0});
      }
    }
  }
  return {};
}

std::vector<bool> reachable(std::size_t from, const std::vector<std::vector<std::size_t>>& adj,
                            const Lattice& l, bool forward) {
  std::vector<bool> seen(l.nodes.size(), false);
  std::vector<std::size_t> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t a : adj[v]) {
      std::size_t u = forward ? l.arcs[a].to : l.arcs[a].from;
      if (!seen[u]) {
        seen[u] = true;
        stack.push_back(u);
      }
    }
  }
  return seen;
}

}  // namespace

void validate(const Lattice& l) {
  const std::size_t n = l.nodes.size();
  if (n < 2) throw ContractError("lattice needs at least a start and a final node");
  for (std::size_t i = 0; i < l.arcs.size(); ++i) {
    const Arc& a = l.arcs[i];
    if (a.from >= n || a.to >= n)
      throw ContractError("arc " + std::to_string(i) + " references unknown node " +
                          std::to_string(a.from >= n ? a.from : a.to));
    if (a.word.empty() || a.word == "-" || a.word == "<eps>")
      throw ContractError("arc " + std::to_string(i) + " has invalid word \"" + a.word + "\"");
    if (a.word.find_first_of(" \t\n\r") != std::string::npos)
      throw ContractError("arc " + std::to_string(i) + " word contains whitespace");
    if (!std::isfinite(a.am_score) || !std::isfinite(a.lm_score))
      throw ContractError("arc " + std::to_string(i) + " has a non-finite score");
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(l.nodes[i].time))
      throw ContractError("node " + std::to_string(i) + " has a non-finite time");
  if (auto cycle = find_cycle(l); !cycle.empty()) {
    std::string msg = "lattice has a cycle:";
    for (std::size_t i = 0; i < cycle.size(); ++i) msg += (i ? " -> " : " ") + std::to_string(cycle[i]);
    throw ContractError(msg);
  }
  const auto out = out_arcs(l);
  const auto in = in_arcs(l);
  if (!in[0].empty()) throw ContractError("start node 0 has incoming arcs");
  if (!out[n - 1].empty()) throw ContractError("final node " + std::to_string(n - 1) + " has outgoing arcs");
  auto fwd = reachable(0, out, l, true);
  auto bwd = reachable(n - 1, in, l, false);
  for (std::size_t v = 0; v < n; ++v) {
    if (!fwd[v]) throw ContractError("node " + std::to_string(v) + " is unreachable from start");
    if (!bwd[v]) throw ContractError("node " + std::to_string(v) + " cannot reach the final node");
  }
  for (std::size_t i = 0; i < l.arcs.size(); ++i) {
    const Arc& a = l.arcs[i];
    if (l.nodes[a.to].time < l.nodes[a.from].time)
      throw ContractError("arc " + std::to_string(i) + " goes back in time");
  }
}

Lattice make_lattice(std::vector<Node> nodes, std::vector<Arc> arcs) {
  Lattice l{std::move(nodes), std::move(arcs)};
  validate(l);
  return l;
}

std::vector<std::size_t> topological_order(const Lattice& l) {
  const std::size_t n = l.nodes.size();
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& a : l.arcs) ++indeg[a.to];
  const auto out = out_arcs(l);
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push(v);
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::size_t v = ready.top();
    ready.pop();
    order.push_back(v);
    for (std::size_t a : out[v])
      if (--indeg[l.arcs[a].to] == 0) ready.push(l.arcs[a].to);
  }
  if (order.size() != n) throw ContractError("lattice is not acyclic");
  return order;
}

Lattice parse_lattice(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t n_nodes = 0, n_arcs = 0;
  std::vector<Node> nodes;
  std::vector<bool> defined;
  std::vector<Arc> arcs;
  std::size_t nodes_seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = split_exact(line, ' ');
    for (const auto& field : f)
      if (field.empty()) throw ParseError("empty field (fields are single-space separated)", line_no);
    if (!have_header) {
      if (f.size() != 3 || f[0] != "LAT" || !parse_size(f[1], n_nodes) || !parse_size(f[2], n_arcs))
        throw ParseError("expected header \"LAT <n_nodes> <n_arcs>\"", line_no);
      have_header = true;
      nodes.resize(n_nodes);
      defined.assign(n_nodes, false);
      continue;
    }
    if (f[0] == "N") {
      std::size_t id;
      double t;
      if (f.size() != 3 || !parse_size(f[1], id) || !parse_double(f[2], t))
        throw ParseError("expected \"N <id> <time_sec>\"", line_no);
      if (id >= n_nodes) throw ParseError("node id " + f[1] + " out of range", line_no);
      if (defined[id]) throw ParseError("node " + f[1] + " defined twice", line_no);
      defined[id] = true;
      nodes[id].time = t;
      ++nodes_seen;
    } else if (f[0] == "A") {
      Arc a;
      if (f.size() != 6 || !parse_size(f[1], a.from) || !parse_size(f[2], a.to) ||
          !parse_double(f[4], a.am_score) || !parse_double(f[5], a.lm_score))
        throw ParseError("expected \"A <from> <to> <word> <am_score> <lm_score>\"", line_no);
      if (a.from >= n_nodes || a.to >= n_nodes)
        throw ParseError("arc references unknown node", line_no);
      if (f[3] == "-") throw ParseError("\"-\" is not a valid word", line_no);
      a.word = f[3];
      arcs.push_back(std::move(a));
    } else {
      throw ParseError("unknown record type \"" + f[0] + "\"", line_no);
    }
  }
  if (!have_header) throw ParseError("missing LAT header", line_no);
  if (nodes_seen != n_nodes)
    throw ParseError("header declares " + std::to_string(n_nodes) + " nodes, found " +
                     std::to_string(nodes_seen));
  if (arcs.size() != n_arcs)
    throw ParseError("header declares " + std::to_string(n_arcs) + " arcs, found " +
                     std::to_string(arcs.size()));
  return make_lattice(std::move(nodes), std::move(arcs));
}

std::string serialize_lattice(const Lattice& l) {
  std::vector<const Arc*> sorted;
  sorted.reserve(l.arcs.size());
  for (const auto& a : l.arcs) sorted.push_back(&a);
  std::sort(sorted.begin(), sorted.end(), [](const Arc* a, const Arc* b) {
    return std::tie(a->from, a->to, a->word, a->am_score, a->lm_score) <
           std::tie(b->from, b->to, b->word, b->am_score, b->lm_score);
  });
  std::string out = "LAT " + std::to_string(l.nodes.size()) + " " + std::to_string(l.arcs.size()) + "\n";
  for (std::size_t i = 0; i < l.nodes.size(); ++i)
    out += "N " + std::to_string(i) + " " + format_double(l.nodes[i].time) + "\n";
  for (const Arc* a : sorted) {
    out += "A " + std::to_string(a->from) + " " + std::to_string(a->to) + " " + a->word + " " +
           format_double(a->am_score) + " " + format_double(a->lm_score) + "\n";
  }
  return out;
}

ArcPosteriorTable forward_backward(const Lattice& l, double lm_scale) {
  const auto order = topological_order(l);
  const auto out = out_arcs(l);
  ArcPosteriorTable t;
  t.alpha.assign(l.nodes.size(), kNegInf);
  t.beta.assign(l.nodes.size(), kNegInf);
  t.alpha[l.start()] = 0.0;
  for (std::size_t v : order) {
    if (t.alpha[v] == kNegInf) continue;
    for (std::size_t ai : out[v]) {
      const Arc& a = l.arcs[ai];
      t.alpha[a.to] = log_add(t.alpha[a.to], t.alpha[v] + arc_weight(a, lm_scale));
    }
  }
  t.beta[l.final_node()] = 0.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    std::size_t v = *it;
    for (std::size_t ai : out[v]) {
      const Arc& a = l.arcs[ai];
      t.beta[v] = log_add(t.beta[v], arc_weight(a, lm_scale) + t.beta[a.to]);
    }
  }
  t.log_z = t.alpha[l.final_node()];
  t.posterior.resize(l.arcs.size());
  for (std::size_t i = 0; i < l.arcs.size(); ++i) {
    const Arc& a = l.arcs[i];
    t.posterior[i] = std::exp(t.alpha[a.from] + arc_weight(a, lm_scale) + t.beta[a.to] - t.log_z);
  }
  return t;
}

Hypothesis best_path(const Lattice& l, double lm_scale) {
  const auto order = topological_order(l);
  const auto out = out_arcs(l);
  std::vector<Hypothesis> best(l.nodes.size());
  std::vector<bool> done(l.nodes.size(), false);
  done[l.final_node()] = true;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    std::size_t v = *it;
    if (v == l.final_node()) continue;
    for (std::size_t ai : out[v]) {
      const Arc& a = l.arcs[ai];
      if (!done[a.to]) continue;
      double score = arc_weight(a, lm_scale) + best[a.to].score;
      Tokens words;
      words.reserve(best[a.to].words.size() + 1);
      words.push_back(a.word);
      words.insert(words.end(), best[a.to].words.begin(), best[a.to].words.end());
      if (!done[v] || score > best[v].score || (score == best[v].score && words < best[v].words)) {
        best[v] = {std::move(words), score};
        done[v] = true;
      }
    }
  }
  return best[l.start()];
}

std::vector<Hypothesis> nbest(const Lattice& l, std::size_t n, double lm_scale) {
  if (n < 1) throw ContractError("nbest: n must be >= 1");
  const auto order = topological_order(l);
  const auto out = out_arcs(l);
  auto ranked = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.words < b.words;
  };
  std::vector<std::vector<Hypothesis>> lists(l.nodes.size());
  lists[l.final_node()] = {Hypothesis{}};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    std::size_t v = *it;
    if (v == l.final_node()) continue;
    std::map<Tokens, double> merged;
    for (std::size_t ai : out[v]) {
      const Arc& a = l.arcs[ai];
      for (const auto& suffix : lists[a.to]) {
        Tokens words;
        words.reserve(suffix.words.size() + 1);
        words.push_back(a.word);
        words.insert(words.end(), suffix.words.begin(), suffix.words.end());
        double score = arc_weight(a, lm_scale) + suffix.score;
        auto [pos, inserted] = merged.emplace(std::move(words), score);
        if (!inserted && score > pos->second) pos->second = score;
      }
    }
    std::vector<Hypothesis> cand;
    cand.reserve(merged.size());
    for (auto& [words, score] : merged) cand.push_back({words, score});
    std::sort(cand.begin(), cand.end(), ranked);
    if (cand.size() > n) cand.resize(n);
    lists[v] = std::move(cand);
  }
  return lists[l.start()];
}

OracleResult oracle_wer(const Lattice& l, const Tokens& ref) {
  if (ref.empty()) throw ContractError("oracle_wer: empty reference");
  const std::size_t R = ref.size();
  const auto order = topological_order(l);
  const auto out = out_arcs(l);
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  enum class Step : unsigned char { none, deletion, insertion, match };
  struct Back {
    Step step = Step::none;
    std::size_t arc = 0;
  };
  const std::size_t width = R + 1;
  std::vector<std::size_t> cost(l.nodes.size() * width, kInf);
  std::vector<Back> back(l.nodes.size() * width);
  auto idx = [&](std::size_t v, std::size_t j) { return v * width + j; };
  cost[idx(l.start(), 0)] = 0;
  for (std::size_t v : order) {
    for (std::size_t j = 1; j <= R; ++j) {
      std::size_t prev = cost[idx(v, j - 1)];
      if (prev != kInf && prev + 1 < cost[idx(v, j)]) {
        cost[idx(v, j)] = prev + 1;
        back[idx(v, j)] = {Step::deletion, 0};
      }
    }
    for (std::size_t ai : out[v]) {
      const Arc& a = l.arcs[ai];
      for (std::size_t j = 0; j <= R; ++j) {
        std::size_t c = cost[idx(v, j)];
        if (c == kInf) continue;
        if (j < R) {
          std::size_t m = c + (a.word == ref[j] ? 0 : 1);
          if (m < cost[idx(a.to, j + 1)]) {
            cost[idx(a.to, j + 1)] = m;
            back[idx(a.to, j + 1)] = {Step::match, ai};
          }
        }
        if (c + 1 < cost[idx(a.to, j)]) {
          cost[idx(a.to, j)] = c + 1;
          back[idx(a.to, j)] = {Step::insertion, ai};
        }
      }
    }
  }
  OracleResult res;
  res.errors = cost[idx(l.final_node(), R)];
  res.wer = static_cast<double>(res.errors) / static_cast<double>(R);
  std::size_t v = l.final_node(), j = R;
  while (!(v == l.start() && j == 0)) {
    const Back& b = back[idx(v, j)];
    switch (b.step) {
      case Step::deletion: --j; break;
      case Step::insertion:
        res.path.push_back(l.arcs[b.arc].word);
        v = l.arcs[b.arc].from;
        break;
      case Step::match:
        res.path.push_back(l.arcs[b.arc].word);
        v = l.arcs[b.arc].from;
        --j;
        break;
      case Step::none: throw ContractError("oracle_wer: broken backtrace");
    }
  }
  std::reverse(res.path.begin(), res.path.end());
  return res;
}

}  // namespace slubench::lattice
