#include "dpslm/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dpslm/parallel.hpp"
#include "dpslm/rng.hpp"

namespace dpslm {

namespace {

struct Pool {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<float> data;  // n * dim

  std::span<const float> frame(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
};

Pool sample_pool(const std::vector<FeatureSequence>& corpus, double fraction, Rng& rng) {
  std::size_t total = 0;
  const std::size_t dim = corpus.front().dim;
  for (const auto& seq : corpus) {
    if (seq.dim != dim) {
      throw Error(ErrorCategory::DimMismatch,
                  "utterance '" + seq.utt_id + "' has dimension " +
                      std::to_string(seq.dim) + ", expected " + std::to_string(dim));
    }
    total += seq.num_frames;
  }

  std::size_t n = total;
  if (fraction < 1.0) {
    n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
    n = std::clamp<std::size_t>(n, 1, total);
  }

  std::vector<std::size_t> picked;
  if (n == total) {
    picked.resize(total);
    std::iota(picked.begin(), picked.end(), std::size_t{0});
  } else {
    picked = rng.sample_indices(total, n);
    std::sort(picked.begin(), picked.end());  // keep pooled (utterance) order
  }

  // Flatten the corpus lazily: prefix sums of frame counts per utterance.
  std::vector<std::size_t> offsets(corpus.size() + 1, 0);
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    offsets[u + 1] = offsets[u] + corpus[u].num_frames;
  }

  Pool pool;
  pool.n = n;
  pool.dim = dim;
  pool.data.resize(n * dim);
  std::size_t u = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = picked[i];
    while (offsets[u + 1] <= g) ++u;
    const auto src = corpus[u].frame(g - offsets[u]);
    std::copy(src.begin(), src.end(), pool.data.begin() + i * dim);
  }
  return pool;
}

struct LloydState {
  std::vector<float> centroids;  // k * dim
  std::vector<std::int32_t> assignment;
  std::vector<double> dist2;  // squared distance to assigned centroid
  std::vector<double> inertia_per_iter;
  int reseeds = 0;
};

void seed_kmeanspp(const Pool& pool, std::size_t k, Rng& rng, std::vector<float>& centroids) {
  const std::size_t dim = pool.dim;
  centroids.resize(k * dim);
  const std::size_t first = rng.uniform_index(pool.n);
  std::copy_n(pool.frame(first).data(), dim, centroids.begin());

  std::vector<double> dist2(pool.n);
  for (std::size_t i = 0; i < pool.n; ++i) {
    dist2[i] = squared_distance(pool.frame(i), {centroids.data(), dim});
  }

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : dist2) total += d;
    std::size_t chosen;
    if (total <= 0.0) {
      // All points coincide with existing centroids.
      chosen = rng.uniform_index(pool.n);
    } else {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      chosen = pool.n - 1;
      for (std::size_t i = 0; i < pool.n; ++i) {
        cum += dist2[i];
        if (cum > u) {
          chosen = i;
          break;
        }
      }
    }
    float* dst = centroids.data() + c * dim;
    std::copy_n(pool.frame(chosen).data(), dim, dst);
    for (std::size_t i = 0; i < pool.n; ++i) {
      const double d = squared_distance(pool.frame(i), {dst, dim});
      if (d < dist2[i]) dist2[i] = d;
    }
  }
}

// Assigns every pooled frame to its nearest centroid and returns the inertia.
// Parallel across fixed blocks; block partial sums are combined in order so
// the result is independent of the worker count.
double assign_step(const Pool& pool, std::size_t k, LloydState& st) {
  const std::size_t dim = pool.dim;
  std::vector<double> block_inertia(n_blocks_for(pool.n), 0.0);
  parallel_blocks(pool.n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto x = pool.frame(i);
      std::int32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(x, {st.centroids.data() + c * dim, dim});
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::int32_t>(c);
        }
      }
      st.assignment[i] = best;
      st.dist2[i] = best_d;
      acc += best_d;
    }
    block_inertia[b] = acc;
  });
  double inertia = 0.0;
  for (double v : block_inertia) inertia += v;
  return inertia;
}

void update_step(const Pool& pool, std::size_t k, LloydState& st) {
  const std::size_t dim = pool.dim;
  std::vector<double> sums(k * dim, 0.0);
  std::vector<std::int64_t> counts(k, 0);
  for (std::size_t i = 0; i < pool.n; ++i) {
    const auto x = pool.frame(i);
    double* s = sums.data() + static_cast<std::size_t>(st.assignment[i]) * dim;
    for (std::size_t j = 0; j < dim; ++j) s[j] += x[j];
    ++counts[static_cast<std::size_t>(st.assignment[i])];
  }

  std::vector<char> used(pool.n, 0);
  for (std::size_t c = 0; c < k; ++c) {
    float* dst = st.centroids.data() + c * dim;
    if (counts[c] > 0) {
      const double* s = sums.data() + c * dim;
      for (std::size_t j = 0; j < dim; ++j) {
        dst[j] = static_cast<float>(s[j] / static_cast<double>(counts[c]));
      }
    } else {
      // Re-seed to the point farthest from its nearest centroid, skipping
      // points already consumed by another re-seed this iteration.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < pool.n; ++i) {
        if (used[i]) continue;
        if (st.dist2[i] > far_d) {
          far_d = st.dist2[i];
          far = i;
        }
      }
      used[far] = 1;
      std::copy_n(pool.frame(far).data(), dim, dst);
      ++st.reseeds;
    }
  }
}

LloydState run_lloyd(const Pool& pool, const KMeansConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  LloydState st;
  st.assignment.resize(pool.n);
  st.dist2.resize(pool.n);
  seed_kmeanspp(pool, cfg.k, rng, st.centroids);

  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const double inertia = assign_step(pool, cfg.k, st);
    st.inertia_per_iter.push_back(inertia);
    if (iter > 0 && prev - inertia < cfg.convergence_tol * prev) break;
    prev = inertia;
    update_step(pool, cfg.k, st);
  }
  return st;
}

}  // namespace

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

KMeansResult train_codebook(const std::vector<FeatureSequence>& corpus,
                            const KMeansConfig& cfg) {
  if (corpus.empty()) {
    throw Error(ErrorCategory::BadArgument, "empty corpus");
  }
  if (cfg.k < 1) throw Error(ErrorCategory::BadArgument, "K must be >= 1");
  if (cfg.max_iters < 0) throw Error(ErrorCategory::BadArgument, "max_iters must be >= 0");
  if (cfg.n_restarts < 1) throw Error(ErrorCategory::BadArgument, "n_restarts must be >= 1");
  if (!(cfg.sample_fraction > 0.0) || cfg.sample_fraction > 1.0) {
    throw Error(ErrorCategory::BadArgument, "sample_fraction must be in (0, 1]");
  }
  if (cfg.convergence_tol < 0.0) {
    throw Error(ErrorCategory::BadArgument, "convergence_tol must be >= 0");
  }

  Rng sample_rng(split_seed(cfg.seed, 0));
  const Pool pool = sample_pool(corpus, cfg.sample_fraction, sample_rng);
  if (pool.n < cfg.k) {
    throw Error(ErrorCategory::BadArgument,
                "K=" + std::to_string(cfg.k) + " exceeds the " +
                    std::to_string(pool.n) + " sampled frames");
  }

  LloydState best;
  double best_final = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    LloydState st = run_lloyd(pool, cfg, split_seed(cfg.seed, 1 + static_cast<std::uint64_t>(r)));
    // Compare restarts by the returned codebook's true cost.
    const double final_inertia = assign_step(pool, cfg.k, st);
    if (!have_best || final_inertia < best_final) {
      best = std::move(st);
      best_final = final_inertia;
      have_best = true;
    }
  }

  KMeansResult result;
  result.codebook.size = cfg.k;
  result.codebook.dim = pool.dim;
  result.codebook.centroids = std::move(best.centroids);
  result.report.inertia_per_iter = std::move(best.inertia_per_iter);
  result.report.reseeds = best.reseeds;
  result.report.seed = cfg.seed;
  validate(result.codebook);
  return result;
}

std::int32_t nearest_code(std::span<const float> frame, const Codebook& cb) {
  if (frame.size() != cb.dim) {
    throw Error(ErrorCategory::DimMismatch,
                "frame dimension " + std::to_string(frame.size()) +
                    " does not match codebook dimension " + std::to_string(cb.dim));
  }
  std::int32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cb.size; ++c) {
    const double d = squared_distance(frame, cb.centroid(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::int32_t>(c);
    }
  }
  return best;
}

std::vector<std::int32_t> assign_nearest(const FeatureSequence& seq, const Codebook& cb) {
  if (seq.dim != cb.dim) {
    throw Error(ErrorCategory::DimMismatch,
                "utterance '" + seq.utt_id + "' dimension " + std::to_string(seq.dim) +
                    " does not match codebook dimension " + std::to_string(cb.dim));
  }
  std::vector<std::int32_t> codes(seq.num_frames);
  parallel_blocks(seq.num_frames, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      codes[t] = nearest_code(seq.frame(t), cb);
    }
  });
  return codes;
}

std::vector<std::int32_t> top_m_candidates(std::span<const float> frame,
                                           const Codebook& cb, std::size_t m) {
  if (m < 1 || m > cb.size) {
    throw Error(ErrorCategory::BadArgument,
                "m=" + std::to_string(m) + " out of range [1, " +
                    std::to_string(cb.size) + "]");
  }
  if (frame.size() != cb.dim) {
    throw Error(ErrorCategory::DimMismatch, "frame/codebook dimension mismatch");
  }
  std::vector<double> dist(cb.size);
  for (std::size_t c = 0; c < cb.size; ++c) {
    dist[c] = squared_distance(frame, cb.centroid(c));
  }
  std::vector<std::int32_t> order(cb.size);
  std::iota(order.begin(), order.end(), 0);
  const auto by_distance = [&](std::int32_t a, std::int32_t b) {
    if (dist[static_cast<std::size_t>(a)] != dist[static_cast<std::size_t>(b)]) {
      return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
    }
    return a < b;
  };
  if (m < cb.size) {
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m),
                      order.end(), by_distance);
  } else {
    std::sort(order.begin(), order.end(), by_distance);
  }
  order.resize(m);
  return order;
}

}  // namespace dpslm
