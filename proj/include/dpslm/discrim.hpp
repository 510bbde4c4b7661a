#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpslm/dtw.hpp"
#include "dpslm/types.hpp"

namespace dpslm {

struct AbxCell {
  std::string speaker;
  std::string label_a;
  std::string label_b;
  double score = 0.0;  // fraction of triples where x sits closer to a
  std::int64_t n_triples = 0;
};

struct AbxReport {
  double error = 0.0;  // 1 - mean over speakers of mean over cells
  std::vector<AbxCell> cells;
};

// Any-context within-speaker ABX over item segments. For each speaker and
// each ordered pair of distinct labels (A, B), every triple (a, x distinct
// instances of A; b an instance of B) scores 1 when dtw(a, x) < dtw(b, x),
// 0.5 on an exact tie, else 0.
AbxReport abx_score(const ItemList& items,
                    const std::vector<EncodedUtterance>& units, const Codebook& cb,
                    const DtwConfig& dtw_cfg, bool per_frame = false);

enum class Pairing { all_pairs, across_speaker_only };

struct SameDiffConfig {
  Pairing pairing = Pairing::all_pairs;
};

struct SameDiffReport {
  double ap = 0.0;
  std::int64_t n_pairs = 0;
  std::int64_t n_ties = 0;  // adjacent equal-cost pairs in the ranking
  std::vector<std::pair<double, double>> pr_curve;  // (recall, precision)
};

// Same-different word discrimination: DTW cost for every admitted item pair,
// ranked ascending (ties keep enumeration order), average precision over the
// induced precision-recall curve.
SameDiffReport same_different_ap(const ItemList& items,
                                 const std::vector<EncodedUtterance>& units,
                                 const Codebook& cb, const DtwConfig& dtw_cfg,
                                 const SameDiffConfig& sd_cfg, bool per_frame = false);

// Non-interpolated average precision of a ranked 0/1 relevance list.
double average_precision(std::span<const char> ranked_positives,
                         std::vector<std::pair<double, double>>* pr_curve = nullptr);

}  // namespace dpslm
