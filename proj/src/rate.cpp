#include "dpslm/rate.hpp"

#include <cmath>
#include <limits>

namespace dpslm {

namespace {

struct Probe {
  double lambda;
  BitrateReport report;
};

Probe encode_probe(const std::vector<FeatureSequence>& corpus, const Codebook& cb,
                   double lambda, double prune_fraction) {
  DpdpConfig cfg;
  cfg.lambda = lambda;
  cfg.prune_fraction = prune_fraction;
  const auto results = encode_corpus(corpus, cb, cfg);
  std::vector<EncodedUtterance> encoded;
  encoded.reserve(results.size());
  for (const auto& r : results) encoded.push_back(r.encoded);
  return {lambda, bitrate(encoded, cb.size)};
}

}  // namespace

BitrateReport bitrate(std::span<const EncodedUtterance> units, std::size_t k) {
  if (units.empty()) {
    throw Error(ErrorCategory::BadArgument, "empty corpus");
  }
  BitrateReport rep;
  std::vector<std::int64_t> counts(k, 0);
  for (const auto& enc : units) {
    validate(enc);
    for (std::int32_t u : enc.units) {
      if (u < 0 || static_cast<std::size_t>(u) >= k) {
        throw Error(ErrorCategory::BadArgument,
                    "unit id " + std::to_string(u) + " out of range for K=" +
                        std::to_string(k) + " in '" + enc.utt_id + "'");
      }
      ++counts[static_cast<std::size_t>(u)];
    }
    rep.total_units += static_cast<std::int64_t>(enc.units.size());
    rep.total_seconds += static_cast<double>(enc.total_frames) / enc.frame_rate_hz;
  }
  if (!(rep.total_seconds > 0.0)) {
    throw Error(ErrorCategory::Degenerate, "zero duration corpus");
  }

  rep.units_per_sec = static_cast<double>(rep.total_units) / rep.total_seconds;
  rep.bits_per_sec_fixed = rep.units_per_sec * std::log2(static_cast<double>(k));

  double bits = 0.0;
  const double n = static_cast<double>(rep.total_units);
  for (std::int64_t c : counts) {
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      bits += static_cast<double>(c) * -std::log2(p);
    }
  }
  rep.bits_per_sec_entropy = bits / rep.total_seconds;
  return rep;
}

double rate_of(const BitrateReport& report, RateKind kind) {
  return kind == RateKind::fixed ? report.bits_per_sec_fixed
                                 : report.bits_per_sec_entropy;
}

CalibrationResult calibrate_lambda(const std::vector<FeatureSequence>& corpus,
                                   const Codebook& cb, double target_bits_per_sec,
                                   RateKind kind, double rel_tol, int max_evals,
                                   double prune_fraction) {
  if (!(target_bits_per_sec > 0.0)) {
    throw Error(ErrorCategory::BadArgument, "target bitrate must be > 0");
  }
  if (max_evals < 2) {
    throw Error(ErrorCategory::BadArgument, "max_evals must be >= 2");
  }

  CalibrationResult result;
  const auto within = [&](double rate) {
    return std::abs(rate - target_bits_per_sec) <= rel_tol * target_bits_per_sec;
  };

  // Track the smallest lambda seen within tolerance, and the closest probe
  // overall as the fallback when the discrete curve jumps over the target.
  bool found = false;
  Probe best{0.0, {}};
  Probe closest{0.0, {}};
  double closest_gap = std::numeric_limits<double>::infinity();
  const auto consider = [&](const Probe& p) {
    const double rate = rate_of(p.report, kind);
    const double gap = std::abs(rate - target_bits_per_sec);
    if (gap < closest_gap || (gap == closest_gap && p.lambda < closest.lambda)) {
      closest_gap = gap;
      closest = p;
    }
    if (within(rate) && (!found || p.lambda < best.lambda)) {
      found = true;
      best = p;
    }
  };

  Probe lo = encode_probe(corpus, cb, 0.0, prune_fraction);
  result.evals = 1;
  const double full_rate = rate_of(lo.report, kind);
  if (target_bits_per_sec > full_rate && !within(full_rate)) {
    throw Error(ErrorCategory::Unreachable,
                "target bitrate " + std::to_string(target_bits_per_sec) +
                    " is above the lambda=0 bitrate " + std::to_string(full_rate));
  }
  consider(lo);
  if (within(full_rate)) {
    // lambda=0 already hits the target; nothing smaller exists.
    result.lambda = 0.0;
    result.achieved = lo.report;
    return result;
  }

  // Grow the bracket until the bitrate falls at or below the target.
  Probe hi = encode_probe(corpus, cb, 1.0, prune_fraction);
  ++result.evals;
  consider(hi);
  while (rate_of(hi.report, kind) > target_bits_per_sec && result.evals < max_evals) {
    lo = hi;
    hi = encode_probe(corpus, cb, hi.lambda * 2.0, prune_fraction);
    ++result.evals;
    consider(hi);
    if (hi.lambda > 1e18) break;
  }

  while (result.evals < max_evals) {
    const double mid_lambda = 0.5 * (lo.lambda + hi.lambda);
    if (mid_lambda <= lo.lambda || mid_lambda >= hi.lambda) break;
    Probe mid = encode_probe(corpus, cb, mid_lambda, prune_fraction);
    ++result.evals;
    consider(mid);
    if (rate_of(mid.report, kind) >= target_bits_per_sec) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  if (found) {
    result.lambda = best.lambda;
    result.achieved = best.report;
    result.converged = true;
  } else {
    result.lambda = closest.lambda;
    result.achieved = closest.report;
    result.converged = false;
  }
  return result;
}

std::vector<SweepPoint> sweep(const std::vector<FeatureSequence>& corpus,
                              const Codebook& cb, int n_points, RateKind kind,
                              double rel_tol, int max_evals, double prune_fraction) {
  if (n_points < 1) {
    throw Error(ErrorCategory::BadArgument, "n_points must be >= 1");
  }
  std::vector<SweepPoint> points;
  const Probe full = encode_probe(corpus, cb, 0.0, prune_fraction);
  points.push_back({0.0, full.report, true});
  if (n_points == 1) return points;

  const double full_rate = rate_of(full.report, kind);
  for (int i = 1; i < n_points; ++i) {
    const double frac = 1.0 - 0.5 * static_cast<double>(i) / static_cast<double>(n_points - 1);
    const double target = full_rate * frac;
    const auto cal =
        calibrate_lambda(corpus, cb, target, kind, rel_tol, max_evals, prune_fraction);
    points.push_back({cal.lambda, cal.achieved, cal.converged});
  }
  return points;
}

}  // namespace dpslm
