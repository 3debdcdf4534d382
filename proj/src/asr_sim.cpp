#include "slubench/asr_sim.hpp"

#include <algorithm>
#include <cmath>

#include "slubench/errors.hpp"
#include "slubench/metrics.hpp"
#include "slubench/rng.hpp"

namespace slubench::asr {

namespace {

enum class EditKind { keep, substitute, remove, insert };

struct Edit {
  EditKind kind;
  std::string gold;
  std::string hyp;    // substitute
  std::string extra;  // insert: token emitted after gold
};

std::vector<Edit> draw_edits(const Tokens& gold, const NoiseProfile& p, Rng& rng) {
  std::vector<Edit> edits;
  edits.reserve(gold.size());
  for (const auto& tok : gold) {
    Edit e{EditKind::keep, tok, {}, {}};
    double u = rng.uniform();
    if (u < p.p_sub) {
      std::size_t others = p.confusion_vocab.size();
      for (const auto& v : p.confusion_vocab) others -= v == tok;
      if (others > 0) {
        std::size_t k = rng.index(others);
        for (const auto& v : p.confusion_vocab) {
          if (v == tok) continue;
          if (k-- == 0) {
            e.hyp = v;
            break;
          }
        }
        e.kind = EditKind::substitute;
      }
    } else if (u < p.p_sub + p.p_del) {
      e.kind = EditKind::remove;
    } else if (u < p.p_sub + p.p_del + p.p_ins) {
      e.kind = EditKind::insert;
      e.extra = p.confusion_vocab[rng.index(p.confusion_vocab.size())];
    }
    edits.push_back(std::move(e));
  }
  return edits;
}

Tokens hypothesis_of(const std::vector<Edit>& edits) {
  Tokens out;
  for (const auto& e : edits) {
    switch (e.kind) {
      case EditKind::keep: out.push_back(e.gold); break;
      case EditKind::substitute: out.push_back(e.hyp); break;
      case EditKind::remove: break;
      case EditKind::insert:
        out.push_back(e.gold);
        out.push_back(e.extra);
        break;
    }
  }
  return out;
}

// One 0.3 s slot of the synthesized lattice.
struct Slot {
  bool deleted = false;     // gold word absent from the 1-best
  bool skippable = false;   // inserted word the alternative path omits
  std::string best;         // 1-best word (hyp slots) or gold word (deleted)
  std::vector<std::pair<std::string, double>> alts;  // competing arcs, best first
  double q = 0.0;           // mass of the alternative path (deleted / skippable)
};

}  // namespace

void validate(const NoiseProfile& p) {
  for (double v : {p.p_sub, p.p_del, p.p_ins})
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("noise probabilities must lie in [0,1]");
  if (p.nominal_wer() > 1.0 + 1e-12) throw ContractError("p_sub + p_del + p_ins must be <= 1");
  if (p.depth < 1) throw ContractError("noise profile depth must be >= 1");
  if (p.p_sub + p.p_ins > 0 && p.confusion_vocab.empty())
    throw ContractError("confusion vocabulary is empty");
}

bool is_preset(const std::string& name) {
  return name == "none" || name == "unadapted" || name == "adapted";
}

NoiseProfile preset(const std::string& name, Tokens vocab, std::uint64_t seed) {
  NoiseProfile p;
  p.confusion_vocab = std::move(vocab);
  p.seed = seed;
  double target;
  if (name == "none") return p;
  if (name == "unadapted") target = 0.344;
  else if (name == "adapted") target = 0.155;
  else throw ContractError("unknown ASR profile \"" + name + "\"");
  p.p_sub = 0.60 * target;
  p.p_del = 0.25 * target;
  p.p_ins = 0.15 * target;
  return p;
}

Tokens corrupt_transcript(const Tokens& transcript, const NoiseProfile& profile, std::string_view key) {
  validate(profile);
  Rng rng(profile.seed, key);
  return hypothesis_of(draw_edits(transcript, profile, rng));
}

AsrOutput simulate(const Tokens& transcript, const NoiseProfile& p, std::string_view key) {
  validate(p);
  if (transcript.empty()) throw ContractError("simulate: empty transcript");
  Rng rng(p.seed, key);
  auto edits = draw_edits(transcript, p, rng);
  AsrOutput out;
  out.one_best = hypothesis_of(edits);

  // Alternative probabilities come from a second stream so the edit draws
  // stay identical to corrupt_transcript.
  Rng alt_rng(p.seed, std::string(key) + "/lattice");
  const double sub_mass = std::min(0.45, 0.2 + p.p_sub);
  std::vector<Slot> slots;
  for (const auto& e : edits) {
    switch (e.kind) {
      case EditKind::keep: slots.push_back({false, false, e.gold, {{e.gold, 1.0}}, 0.0}); break;
      case EditKind::substitute: {
        Slot s{false, false, e.hyp, {}, 0.0};
        std::size_t width = std::max<std::size_t>(p.depth, 2);
        Tokens extras;
        for (std::size_t tries = 0; extras.size() + 2 < width && tries < 8 * width; ++tries) {
          const auto& cand = p.confusion_vocab[alt_rng.index(p.confusion_vocab.size())];
          if (cand == e.hyp || cand == e.gold) continue;
          if (std::find(extras.begin(), extras.end(), cand) != extras.end()) continue;
          extras.push_back(cand);
        }
        double gold_p = extras.empty() ? sub_mass : sub_mass * (0.5 + 0.3 * alt_rng.uniform());
        s.alts.push_back({e.hyp, 1.0 - sub_mass});
        s.alts.push_back({e.gold, gold_p});
        for (const auto& x : extras)
          s.alts.push_back({x, (sub_mass - gold_p) / static_cast<double>(extras.size())});
        slots.push_back(std::move(s));
        break;
      }
      case EditKind::remove:
        slots.push_back({true, false, e.gold, {{e.gold, 1.0}}, 0.1 + 0.2 * alt_rng.uniform()});
        break;
      case EditKind::insert:
        slots.push_back({false, false, e.gold, {{e.gold, 1.0}}, 0.0});
        slots.push_back({false, true, e.extra, {{e.extra, 1.0}}, 0.1 + 0.2 * alt_rng.uniform()});
        break;
    }
  }
  bool any_hyp = std::any_of(slots.begin(), slots.end(), [](const Slot& s) { return !s.deleted; });
  if (!any_hyp) {
    slots.back().deleted = false;
    slots.back().q = 0.0;
    out.one_best = {slots.back().best};
  }

  const std::size_t S = slots.size();
  std::vector<lattice::Node> nodes(S + 1);
  for (std::size_t k = 0; k <= S; ++k) nodes[k].time = kSlotSeconds * static_cast<double>(k);
  std::vector<double> factor(S, 1.0);  // scale of a slot's own arcs at its start node
  std::vector<lattice::Arc> arcs;
  auto add = [&](std::size_t from, std::size_t to, const std::string& w, double prob) {
    arcs.push_back({from, to, w, std::log(prob), 0.0});
  };

  for (std::size_t k = 0; k < S;) {
    if (!slots[k].deleted) {
      if (slots[k].skippable) {
        // Path without the inserted word: the previous word stretched over both slots.
        const Slot& prev = slots[k - 1];
        factor[k - 1] *= 1.0 - slots[k].q;
        add(k - 1, k + 1, prev.best, slots[k].q);
      }
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end < S && slots[end].deleted) ++end;
    const double q = slots[k].q;
    if (k > 0) {
      // Best path skips the run by stretching the previous word.
      factor[k - 1] *= q;
      add(k - 1, end, slots[k - 1].best, 1.0 - q);
      for (std::size_t j = k; j < end; ++j) add(j, j + 1, slots[j].best, 1.0);
    } else {
      // Run at the start: stretch the next word backwards, and forwards over
      // a deleted run that directly follows it.
      std::size_t stop = end + 1;
      while (stop < S && slots[stop].deleted) ++stop;
      add(0, stop, slots[end].best, 1.0 - q);
      add(0, 1, slots[0].best, q);
      for (std::size_t j = 1; j < end; ++j) add(j, j + 1, slots[j].best, 1.0);
    }
    k = end;
  }
  for (std::size_t k = 0; k < S; ++k) {
    if (slots[k].deleted) continue;
    for (const auto& [w, prob] : slots[k].alts) add(k, k + 1, w, factor[k] * prob);
  }
  out.lattice = lattice::make_lattice(std::move(nodes), std::move(arcs));
  return out;
}

lattice::Lattice synthesize_lattice(const Tokens& transcript, const NoiseProfile& profile,
                                    std::string_view key) {
  return simulate(transcript, profile, key).lattice;
}

std::vector<Tokens> corrupt_corpus_serial(const std::vector<Tokens>& transcripts,
                                          const std::vector<std::string>& keys,
                                          const NoiseProfile& profile) {
  if (keys.size() != transcripts.size()) throw ContractError("corrupt_corpus: one key per transcript");
  validate(profile);
  std::vector<Tokens> out(transcripts.size());
  for (std::size_t i = 0; i < transcripts.size(); ++i)
    out[i] = corrupt_transcript(transcripts[i], profile, keys[i]);
  return out;
}

std::vector<Tokens> corrupt_corpus(const std::vector<Tokens>& transcripts,
                                   const std::vector<std::string>& keys, const NoiseProfile& profile) {
  if (keys.size() != transcripts.size()) throw ContractError("corrupt_corpus: one key per transcript");
  validate(profile);
  std::vector<Tokens> out(transcripts.size());
  const auto n = static_cast<std::ptrdiff_t>(transcripts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[i] = corrupt_transcript(transcripts[i], profile, keys[i]);
  return out;
}

double empirical_wer_of_profile(const NoiseProfile& profile, const std::vector<Tokens>& corpus) {
  validate(profile);
  std::size_t total = 0;
  for (const auto& t : corpus) total += t.size();
  if (total < 1000)
    throw ContractError("empirical_wer_of_profile: corpus has " + std::to_string(total) +
                        " tokens, need at least 1000");
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
  std::size_t errors = 0, ref_len = 0;
#pragma omp parallel for schedule(static) reduction(+ : errors, ref_len)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (corpus[i].empty()) continue;
    auto hyp = corrupt_transcript(corpus[i], profile, std::to_string(i));
    auto a = metrics::align(corpus[i], hyp);
    errors += a.errors();
    ref_len += a.ref_len;
  }
  return static_cast<double>(errors) / static_cast<double>(ref_len);
}

}  // namespace slubench::asr
