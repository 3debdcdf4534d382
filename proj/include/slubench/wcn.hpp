#pragma once

#include <string>
#include <vector>

#include "slubench/lattice.hpp"
#include "slubench/text.hpp"

namespace slubench::wcn {

inline constexpr const char* kEpsilon = "<eps>";

struct Entry {
  std::string token;  // a word or kEpsilon
  double posterior = 0.0;
};

struct Bin {
  std::vector<Entry> entries;
  double start = 0.0;
  double end = 0.0;
};

struct ConfusionNetwork {
  std::vector<Bin> bins;
  std::string source_id;
};

struct BuildOptions {
  double lm_scale = 1.0;
  // Bins whose epsilon posterior exceeds this are dropped.
  double epsilon_prune = 0.99;
};

// Arc posteriors from forward-backward, arcs sorted by midpoint time and
// greedily clustered: an arc joins the open bin while its interval overlaps
// the bin's running intersection. Same-word arcs merge, missing mass goes
// to <eps>, bins are renormalized. Entries end in canonical order.
ConfusionNetwork build_from_lattice(const lattice::Lattice& l, const BuildOptions& options = {});

// Throws ContractError when a bin is empty, repeats a token, holds a
// posterior outside (0,1] or sums outside 1 +/- tolerance.
void validate(const ConfusionNetwork& cn, double tolerance = 1e-6);

// Max-posterior entry per bin (ties: smallest token; <eps> loses ties),
// with <eps> picks dropped.
Tokens one_best(const ConfusionNetwork& cn);

// Sorts each bin by posterior (rounded to the 6 printed decimals)
// descending, then token ascending.
void canonicalize(ConfusionNetwork& cn);

// Text format:
//   WCN <n_bins>
//   B <start> <end> token:posterior token:posterior ...
// Posteriors are printed with 6 decimals.
std::string serialize_wcn(const ConfusionNetwork& cn);
// Bins summing outside 1 +/- 1e-3 raise ParseError naming the bin index.
ConfusionNetwork parse_wcn(const std::string& text);

// Degenerate network with one posterior-1 bin per token.
ConfusionNetwork from_tokens(const Tokens& tokens, double slot_seconds = 0.3);

}  // namespace slubench::wcn
