#include "dpslm/dtw.hpp"

#include <algorithm>
#include <cmath>

#include "dpslm/dpdp.hpp"
#include "dpslm/kmeans.hpp"

namespace dpslm {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool elementwise_equal(std::span<const float> a, std::span<const float> b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

double angular(std::span<const float> a, std::span<const float> b) {
  if (elementwise_equal(a, b)) return 0.0;
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    dot += x * y;
    na2 += x * x;
    nb2 += y * y;
  }
  if (na2 == 0.0 || nb2 == 0.0) {
    // Angle undefined for a zero vector; fall back for this step.
    return squared_distance(a, b);
  }
  const double c = std::clamp(dot / std::sqrt(na2 * nb2), -1.0, 1.0);
  return std::acos(c) / kPi;
}

}  // namespace

double local_distance(std::span<const float> a, std::span<const float> b,
                      std::int32_t code_a, std::int32_t code_b, LocalDistance kind) {
  switch (kind) {
    case LocalDistance::angular: return angular(a, b);
    case LocalDistance::squared_euclidean: return squared_distance(a, b);
    case LocalDistance::code_mismatch: return code_a == code_b ? 0.0 : 1.0;
  }
  return 0.0;
}

double dtw_cost(const SegmentRepr& a, const SegmentRepr& b, const DtwConfig& cfg) {
  if (a.n_steps == 0 || b.n_steps == 0) {
    throw Error(ErrorCategory::BadArgument, "empty segment");
  }
  if (a.dim != b.dim) {
    throw Error(ErrorCategory::DimMismatch, "segment dimension mismatch");
  }

  const std::size_t n = a.n_steps;
  const std::size_t m = b.n_steps;

  // Two rolling rows of (accumulated cost, path length). Ties in cost pick
  // the shorter path so the normalized value is well defined.
  struct Cell {
    double cost;
    std::int64_t len;
  };
  const auto better = [](const Cell& x, const Cell& y) {
    return x.cost < y.cost || (x.cost == y.cost && x.len < y.len);
  };

  std::vector<Cell> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d =
          local_distance(a.step(i), b.step(j), a.codes[i], b.codes[j], cfg.local_distance);
      Cell best;
      if (i == 0 && j == 0) {
        best = {0.0, 0};
      } else if (i == 0) {
        best = cur[j - 1];
      } else if (j == 0) {
        best = prev[j];
      } else {
        best = prev[j - 1];  // diagonal
        if (better(prev[j], best)) best = prev[j];
        if (better(cur[j - 1], best)) best = cur[j - 1];
      }
      cur[j] = {best.cost + d, best.len + 1};
    }
    std::swap(prev, cur);
  }
  const Cell& end = prev[m - 1];
  return end.cost / static_cast<double>(end.len);
}

SegmentRepr make_segment(const Item& item, const EncodedUtterance& enc,
                         const Codebook& cb, bool per_frame) {
  validate(item);
  if (item.offset > enc.total_frames) {
    throw Error(ErrorCategory::Invariant,
                "item [" + std::to_string(item.onset) + ", " + std::to_string(item.offset) +
                    ") exceeds the " + std::to_string(enc.total_frames) + " frames of '" +
                    enc.utt_id + "'");
  }
  const std::vector<std::int32_t>& codes =
      enc.frame_codes.empty() ? expand_units(enc.units, enc.durations) : enc.frame_codes;
  std::span<const std::int32_t> slice(codes.data() + item.onset,
                                      static_cast<std::size_t>(item.offset - item.onset));

  SegmentRepr seg;
  seg.utt_id = item.utt_id;
  seg.label = item.label;
  seg.speaker = item.speaker;
  seg.onset = item.onset;
  seg.offset = item.offset;
  seg.dim = cb.dim;

  if (per_frame) {
    seg.codes.assign(slice.begin(), slice.end());
  } else {
    seg.codes = deduplicate(slice).first;
  }
  seg.n_steps = seg.codes.size();
  seg.steps.resize(seg.n_steps * cb.dim);
  for (std::size_t i = 0; i < seg.n_steps; ++i) {
    const std::int32_t code = seg.codes[i];
    if (code < 0 || static_cast<std::size_t>(code) >= cb.size) {
      throw Error(ErrorCategory::BadArgument,
                  "unit id " + std::to_string(code) + " out of range for K=" +
                      std::to_string(cb.size) + " in '" + enc.utt_id + "'");
    }
    const auto c = cb.centroid(static_cast<std::size_t>(code));
    std::copy(c.begin(), c.end(), seg.steps.begin() + i * cb.dim);
  }
  return seg;
}

}  // namespace dpslm
