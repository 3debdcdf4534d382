#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "slubench/lattice.hpp"
#include "slubench/rng.hpp"

// Brute-force oracles shared by the test binaries.
namespace slubench::testing {

struct EnumeratedPath {
  Tokens words;
  double weight = 0.0;
  std::vector<std::size_t> arcs;
};

inline std::vector<EnumeratedPath> enumerate_paths(const lattice::Lattice& l, double lm_scale = 1.0) {
  std::vector<std::vector<std::size_t>> out(l.nodes.size());
  for (std::size_t i = 0; i < l.arcs.size(); ++i) out[l.arcs[i].from].push_back(i);
  std::vector<EnumeratedPath> paths;
  EnumeratedPath cur;
  std::function<void(std::size_t)> walk = [&](std::size_t node) {
    if (node == l.final_node()) {
      paths.push_back(cur);
      return;
    }
    for (std::size_t a : out[node]) {
      const auto& arc = l.arcs[a];
      cur.words.push_back(arc.word);
      cur.weight += lattice::arc_weight(arc, lm_scale);
      cur.arcs.push_back(a);
      walk(arc.to);
      cur.words.pop_back();
      cur.weight -= lattice::arc_weight(arc, lm_scale);
      cur.arcs.pop_back();
    }
  };
  walk(l.start());
  return paths;
}

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -INFINITY;
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// Random DAG over n nodes with a backbone chain, so every node is on a
// start->final path, plus forward skip arcs.
inline lattice::Lattice random_lattice(Rng& rng, std::size_t max_nodes, const Tokens& words,
                                       double extra_arc_rate = 0.35) {
  std::size_t n = 2 + rng.index(max_nodes - 1);
  std::vector<lattice::Node> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i].time = 0.3 * static_cast<double>(i);
  std::vector<lattice::Arc> arcs;
  auto add = [&](std::size_t from, std::size_t to) {
    lattice::Arc a;
    a.from = from;
    a.to = to;
    a.word = words[rng.index(words.size())];
    a.am_score = rng.uniform(-3.0, 0.0);
    a.lm_score = rng.uniform(-2.0, 0.0);
    arcs.push_back(a);
  };
  for (std::size_t i = 0; i + 1 < n; ++i) add(i, i + 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < extra_arc_rate) add(i, j);
  return lattice::make_lattice(std::move(nodes), std::move(arcs));
}

}  // namespace slubench::testing
