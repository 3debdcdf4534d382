#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "slubench/lattice.hpp"
#include "slubench/text.hpp"

namespace slubench::asr {

struct NoiseProfile {
  double p_sub = 0.0;
  double p_del = 0.0;
  double p_ins = 0.0;
  Tokens confusion_vocab;
  std::uint64_t seed = 0;
  std::size_t depth = 3;  // competing arcs at a substituted position

  double nominal_wer() const { return p_sub + p_del + p_ins; }
};

// Throws ContractError for probabilities outside [0,1], a total above 1,
// depth 0, or an empty vocabulary when substitutions or insertions are on.
void validate(const NoiseProfile& profile);

// Named operating points. "unadapted" targets 34.4% WER and "adapted"
// 15.5%, each split 60/25/15 into substitutions, deletions and insertions.
// "none" is the identity.
NoiseProfile preset(const std::string& name, Tokens vocab, std::uint64_t seed);
bool is_preset(const std::string& name);

inline constexpr double kSlotSeconds = 0.3;

// Per-token independent edits drawn from the stream (profile.seed, key).
Tokens corrupt_transcript(const Tokens& transcript, const NoiseProfile& profile,
                          std::string_view key = {});

struct AsrOutput {
  Tokens one_best;
  lattice::Lattice lattice;
};

// The corrupted 1-best together with a lattice whose best path is that
// 1-best. Uses the same edit draws as corrupt_transcript for the same key.
// If every token was deleted the lattice keeps the final gold token, since
// lattices carry no epsilon arcs; one_best then holds that token too.
AsrOutput simulate(const Tokens& transcript, const NoiseProfile& profile, std::string_view key = {});

lattice::Lattice synthesize_lattice(const Tokens& transcript, const NoiseProfile& profile,
                                    std::string_view key = {});

// Corpus-level WER (pooled errors over pooled reference length) of
// corrupt_transcript, keying each utterance by its index. Requires at
// least 1000 reference tokens.
double empirical_wer_of_profile(const NoiseProfile& profile, const std::vector<Tokens>& corpus);

// Corrupts every transcript with its own key. The parallel version is
// bit-identical to the serial reference for any thread count.
std::vector<Tokens> corrupt_corpus(const std::vector<Tokens>& transcripts,
                                   const std::vector<std::string>& keys, const NoiseProfile& profile);
std::vector<Tokens> corrupt_corpus_serial(const std::vector<Tokens>& transcripts,
                                          const std::vector<std::string>& keys,
                                          const NoiseProfile& profile);

}  // namespace slubench::asr
