#pragma once

#include <string>
#include <vector>

#include "slubench/text.hpp"

namespace slubench::lattice {

struct Node {
  double time = 0.0;  // seconds
};

struct Arc {
  std::size_t from = 0;
  std::size_t to = 0;
  std::string word;
  double am_score = 0.0;  // natural-log probability
  double lm_score = 0.0;
};

// Word lattice: a DAG from node 0 (start) to node n-1 (final). Construct
// with make_lattice or parse_lattice; both validate.
struct Lattice {
  std::vector<Node> nodes;
  std::vector<Arc> arcs;

  std::size_t start() const { return 0; }
  std::size_t final_node() const { return nodes.empty() ? 0 : nodes.size() - 1; }
};

// Throws ContractError on: fewer than two nodes, arcs referencing unknown
// nodes, a cycle (message lists one), start with in-arcs, final with
// out-arcs, a node off every start->final path (message names it), time
// decreasing along an arc, or an empty, "-" or "<eps>" word.
void validate(const Lattice& l);
Lattice make_lattice(std::vector<Node> nodes, std::vector<Arc> arcs);

// Node order where every arc goes forward. Ties resolve to the smaller id.
std::vector<std::size_t> topological_order(const Lattice& l);

// Text format:
//   LAT <n_nodes> <n_arcs>
//   N <id> <time_sec>            (one per node)
//   A <from> <to> <word> <am> <lm>  (one per arc)
// Fields separated by single spaces; lines starting with '#' are comments.
// Syntax errors and arcs naming an undeclared node raise ParseError with the
// line number; other structural errors raise ContractError.
Lattice parse_lattice(const std::string& text);
// Canonical: nodes by id, arcs by (from, to, word, am, lm).
std::string serialize_lattice(const Lattice& l);

struct ArcPosteriorTable {
  std::vector<double> posterior;  // parallel to Lattice::arcs
  std::vector<double> alpha;      // log forward score per node
  std::vector<double> beta;       // log backward score per node
  double log_z = 0.0;
};

inline double arc_weight(const Arc& a, double lm_scale) { return a.am_score + lm_scale * a.lm_score; }

// Log-semiring forward-backward.
ArcPosteriorTable forward_backward(const Lattice& l, double lm_scale = 1.0);

struct Hypothesis {
  Tokens words;
  double score = 0.0;

  bool operator==(const Hypothesis&) const = default;
};

// Tropical best path; equal scores resolve to the lexicographically
// smallest word sequence.
Hypothesis best_path(const Lattice& l, double lm_scale = 1.0);

// Top-n distinct word sequences, each with its best path score, sorted by
// score descending then words ascending.
std::vector<Hypothesis> nbest(const Lattice& l, std::size_t n, double lm_scale = 1.0);

struct OracleResult {
  double wer = 0.0;
  std::size_t errors = 0;
  Tokens path;
};

// Minimum WER of any lattice path against the reference.
OracleResult oracle_wer(const Lattice& l, const Tokens& reference);

}  // namespace slubench::lattice
