#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpslm/types.hpp"

namespace dpslm {

struct KMeansConfig {
  std::size_t k = 100;
  int max_iters = 300;
  int n_restarts = 1;
  std::uint64_t seed = 0;
  double sample_fraction = 1.0;   // fraction of pooled frames used for training
  double convergence_tol = 0.0;   // 0 = run all iterations
};

struct KMeansReport {
  std::vector<double> inertia_per_iter;  // cost after each assignment step
  int reseeds = 0;                       // empty-cluster re-seed count
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Codebook codebook;
  KMeansReport report;
};

// Lloyd's algorithm with k-means++ seeding over frames pooled across the
// corpus in utterance order. Deterministic given cfg.seed; the best-inertia
// restart wins (ties to the lowest restart index). Empty clusters are
// re-seeded to the point farthest from its nearest centroid.
KMeansResult train_codebook(const std::vector<FeatureSequence>& corpus,
                            const KMeansConfig& cfg);

double squared_distance(std::span<const float> a, std::span<const float> b);

// Nearest centroid by squared Euclidean distance, ties to the lowest index.
std::int32_t nearest_code(std::span<const float> frame, const Codebook& cb);

std::vector<std::int32_t> assign_nearest(const FeatureSequence& seq,
                                         const Codebook& cb);

// Exact top-m candidate codes sorted by ascending distance, ties by index.
// Position 0 always equals nearest_code.
std::vector<std::int32_t> top_m_candidates(std::span<const float> frame,
                                           const Codebook& cb, std::size_t m);

}  // namespace dpslm
