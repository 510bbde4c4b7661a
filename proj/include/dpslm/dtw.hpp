#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpslm/types.hpp"

namespace dpslm {

enum class LocalDistance {
  angular,            // arccos of the cosine similarity, scaled to [0, 1]
  squared_euclidean,
  code_mismatch,      // 0/1 on the unit ids
};

struct DtwConfig {
  LocalDistance local_distance = LocalDistance::angular;
};

// A labeled time span mapped to one vector per (deduplicated) unit.
struct SegmentRepr {
  std::vector<float> steps;          // n_steps * dim, row-major
  std::vector<std::int32_t> codes;   // unit id per step
  std::size_t n_steps = 0;
  std::size_t dim = 0;
  std::string utt_id;
  std::string label;
  std::string speaker;
  std::int64_t onset = 0;
  std::int64_t offset = 0;

  std::span<const float> step(std::size_t i) const {
    return {steps.data() + i * dim, dim};
  }
};

double local_distance(std::span<const float> a, std::span<const float> b,
                      std::int32_t code_a, std::int32_t code_b, LocalDistance kind);

// DTW over the {diagonal, vertical, horizontal} step pattern. Returns the
// minimal accumulated local distance divided by the alignment path length;
// among equal-cost paths the shortest is used, which keeps the value
// symmetric and deterministic.
double dtw_cost(const SegmentRepr& a, const SegmentRepr& b, const DtwConfig& cfg);

// Maps an item's frame span onto codebook centroids. By default consecutive
// repeated codes inside the span are collapsed first; per_frame keeps one
// step per frame.
SegmentRepr make_segment(const Item& item, const EncodedUtterance& enc,
                         const Codebook& cb, bool per_frame = false);

}  // namespace dpslm
