#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpslm/dpdp.hpp"
#include "dpslm/types.hpp"

namespace dpslm {

enum class RateKind { fixed, entropy };

struct BitrateReport {
  double units_per_sec = 0.0;
  double bits_per_sec_fixed = 0.0;    // units_per_sec * log2(K)
  double bits_per_sec_entropy = 0.0;  // empirical unit entropy per second
  std::int64_t total_units = 0;
  double total_seconds = 0.0;
};

BitrateReport bitrate(std::span<const EncodedUtterance> units, std::size_t k);

double rate_of(const BitrateReport& report, RateKind kind);

struct CalibrationResult {
  double lambda = 0.0;
  BitrateReport achieved;
  // False when the discrete bitrate curve jumps over the target and only the
  // closest bracketing lambda could be returned.
  bool converged = true;
  int evals = 0;
};

// Bisection on lambda against the monotone units/sec curve. Each probe
// re-encodes the corpus. Returns the smallest lambda found whose bitrate is
// within rel_tol of target.
CalibrationResult calibrate_lambda(const std::vector<FeatureSequence>& corpus,
                                   const Codebook& cb, double target_bits_per_sec,
                                   RateKind kind, double rel_tol, int max_evals,
                                   double prune_fraction);

struct SweepPoint {
  double lambda = 0.0;
  BitrateReport report;
  bool converged = true;
};

// n_points bitrate targets spaced linearly from the lambda=0 bitrate down to
// half of it; the first point is always lambda=0 itself.
std::vector<SweepPoint> sweep(const std::vector<FeatureSequence>& corpus,
                              const Codebook& cb, int n_points, RateKind kind,
                              double rel_tol, int max_evals, double prune_fraction);

}  // namespace dpslm
