#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "dpslm/types.hpp"

namespace dpslm {

struct DpdpConfig {
  double lambda = 0.0;           // reward for repeating the previous code
  double prune_fraction = 0.05;  // per-frame candidates = ceil(fraction * K)
};

struct DpdpResult {
  EncodedUtterance encoded;
  double objective_value = 0.0;
  bool pruned = false;
};

// Minimizes sum_t(||x_t - c_{u_t}||^2 - lambda * [u_t == u_{t-1}]) over code
// assignments restricted to each frame's ceil(prune_fraction * K) nearest
// candidates. The first frame carries no reward term. Backtrace ties prefer
// staying on the previous code, then the lowest code index. With
// prune_fraction = 1 the returned assignment is a global optimum.
DpdpResult dpdp_encode(const FeatureSequence& seq, const Codebook& cb,
                       const DpdpConfig& cfg);

// Run-length encoding of a code sequence.
std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> deduplicate(
    std::span<const std::int32_t> frame_codes);

// Recomputes the objective of an assignment directly from the codes,
// independently of the DP recursion.
double assignment_objective(const FeatureSequence& seq, const Codebook& cb,
                            std::span<const std::int32_t> frame_codes,
                            double lambda);

struct EncodeSummary {
  std::int64_t total_units = 0;
  std::int64_t total_frames = 0;
  double total_seconds = 0.0;
  double units_per_sec = 0.0;
};

// Encodes every utterance, preserving corpus order. Parallel across
// utterances; each utterance's DP is sequential.
std::vector<DpdpResult> encode_corpus(const std::vector<FeatureSequence>& corpus,
                                      const Codebook& cb, const DpdpConfig& cfg);

EncodeSummary summarize(std::span<const DpdpResult> results);

// Manifest-driven variant used by the CLI: loads features, encodes, and
// writes the units file. Any per-utterance failure aborts and identifies the
// utterance.
EncodeSummary encode_corpus_to_file(const CorpusManifest& manifest,
                                    const std::filesystem::path& base_dir,
                                    const Codebook& cb, const DpdpConfig& cfg,
                                    const std::filesystem::path& out_units);

}  // namespace dpslm
