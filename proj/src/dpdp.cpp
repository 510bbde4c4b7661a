#include "dpslm/dpdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpslm/io.hpp"
#include "dpslm/kmeans.hpp"
#include "dpslm/parallel.hpp"

namespace dpslm {

namespace {

void check_config(const DpdpConfig& cfg) {
  if (!std::isfinite(cfg.lambda) || cfg.lambda < 0.0) {
    throw Error(ErrorCategory::BadArgument, "lambda must be finite and >= 0");
  }
  if (!(cfg.prune_fraction > 0.0) || cfg.prune_fraction > 1.0) {
    throw Error(ErrorCategory::BadArgument, "prune_fraction must be in (0, 1]");
  }
}

std::size_t candidates_per_frame(const DpdpConfig& cfg, std::size_t k) {
  const auto m = static_cast<std::size_t>(
      std::ceil(cfg.prune_fraction * static_cast<double>(k)));
  return std::clamp<std::size_t>(m, 1, k);
}

}  // namespace

DpdpResult dpdp_encode(const FeatureSequence& seq, const Codebook& cb,
                       const DpdpConfig& cfg) {
  check_config(cfg);
  validate(seq);
  if (seq.dim != cb.dim) {
    throw Error(ErrorCategory::DimMismatch,
                "utterance '" + seq.utt_id + "' dimension " + std::to_string(seq.dim) +
                    " does not match codebook dimension " + std::to_string(cb.dim));
  }

  const std::size_t T = seq.num_frames;
  const std::size_t K = cb.size;
  const std::size_t m = candidates_per_frame(cfg, K);

  // Per-frame candidate sets, each sorted by ascending distance. Distances
  // are carried along so the DP never recomputes them.
  std::vector<std::int32_t> cand(T * m);
  std::vector<double> cand_dist(T * m);
  parallel_blocks(T, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const auto top = top_m_candidates(seq.frame(t), cb, m);
      for (std::size_t i = 0; i < m; ++i) {
        cand[t * m + i] = top[i];
        cand_dist[t * m + i] = squared_distance(seq.frame(t), cb.centroid(top[i]));
      }
    }
  });

  // alpha over the current frame's candidates; pos_of[k] maps a code to its
  // slot in the previous frame's candidate list (stamped to avoid clearing).
  std::vector<double> alpha_prev(m), alpha_cur(m);
  std::vector<std::int32_t> pos_of(K, -1);
  std::vector<std::int32_t> stamp(K, -1);
  // Backtrace table: predecessor slot in the previous frame's candidate list.
  std::vector<std::int32_t> back(T * m, -1);

  for (std::size_t i = 0; i < m; ++i) alpha_prev[i] = cand_dist[i];

  for (std::size_t t = 1; t < T; ++t) {
    // Best previous value with the lowest code index among ties.
    std::size_t best_prev = 0;
    for (std::size_t j = 1; j < m; ++j) {
      const bool better = alpha_prev[j] < alpha_prev[best_prev] ||
                          (alpha_prev[j] == alpha_prev[best_prev] &&
                           cand[(t - 1) * m + j] < cand[(t - 1) * m + best_prev]);
      if (better) best_prev = j;
    }
    const double switch_cost = alpha_prev[best_prev];

    for (std::size_t j = 0; j < m; ++j) {
      const std::int32_t code = cand[(t - 1) * m + j];
      pos_of[static_cast<std::size_t>(code)] = static_cast<std::int32_t>(j);
      stamp[static_cast<std::size_t>(code)] = static_cast<std::int32_t>(t);
    }

    for (std::size_t i = 0; i < m; ++i) {
      const std::int32_t code = cand[t * m + i];
      std::int32_t pred = static_cast<std::int32_t>(best_prev);
      double trans = switch_cost;
      if (stamp[static_cast<std::size_t>(code)] == static_cast<std::int32_t>(t)) {
        const std::int32_t stay_slot = pos_of[static_cast<std::size_t>(code)];
        const double stay_cost = alpha_prev[static_cast<std::size_t>(stay_slot)] - cfg.lambda;
        // Prefer staying on the same code when costs tie.
        if (stay_cost <= trans) {
          trans = stay_cost;
          pred = stay_slot;
        }
      }
      alpha_cur[i] = cand_dist[t * m + i] + trans;
      back[t * m + i] = pred;
    }
    std::swap(alpha_prev, alpha_cur);
  }

  // Final frame: minimal alpha, ties to the lowest code index.
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i) {
    const bool better = alpha_prev[i] < alpha_prev[best] ||
                        (alpha_prev[i] == alpha_prev[best] &&
                         cand[(T - 1) * m + i] < cand[(T - 1) * m + best]);
    if (better) best = i;
  }

  DpdpResult result;
  result.objective_value = alpha_prev[best];
  result.pruned = m < K;

  std::vector<std::int32_t> codes(T);
  std::size_t slot = best;
  for (std::size_t t = T; t-- > 0;) {
    codes[t] = cand[t * m + slot];
    if (t > 0) slot = static_cast<std::size_t>(back[t * m + slot]);
  }

  auto [units, durations] = deduplicate(codes);
  result.encoded.utt_id = seq.utt_id;
  result.encoded.frame_codes = std::move(codes);
  result.encoded.units = std::move(units);
  result.encoded.durations = std::move(durations);
  result.encoded.total_frames = static_cast<std::int64_t>(T);
  result.encoded.frame_rate_hz = static_cast<double>(seq.frame_rate_hz);
  return result;
}

std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> deduplicate(
    std::span<const std::int32_t> frame_codes) {
  if (frame_codes.empty()) {
    throw Error(ErrorCategory::BadArgument, "cannot deduplicate an empty code sequence");
  }
  std::vector<std::int32_t> units;
  std::vector<std::int32_t> durations;
  units.push_back(frame_codes[0]);
  durations.push_back(1);
  for (std::size_t t = 1; t < frame_codes.size(); ++t) {
    if (frame_codes[t] == units.back()) {
      ++durations.back();
    } else {
      units.push_back(frame_codes[t]);
      durations.push_back(1);
    }
  }
  return {std::move(units), std::move(durations)};
}

double assignment_objective(const FeatureSequence& seq, const Codebook& cb,
                            std::span<const std::int32_t> frame_codes,
                            double lambda) {
  if (frame_codes.size() != seq.num_frames) {
    throw Error(ErrorCategory::BadArgument, "assignment length != frame count");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < frame_codes.size(); ++t) {
    total += squared_distance(seq.frame(t),
                              cb.centroid(static_cast<std::size_t>(frame_codes[t])));
    if (t > 0 && frame_codes[t] == frame_codes[t - 1]) total -= lambda;
  }
  return total;
}

std::vector<DpdpResult> encode_corpus(const std::vector<FeatureSequence>& corpus,
                                      const Codebook& cb, const DpdpConfig& cfg) {
  check_config(cfg);
  if (corpus.empty()) {
    throw Error(ErrorCategory::BadArgument, "empty corpus");
  }
  std::vector<DpdpResult> results(corpus.size());
  parallel_blocks(corpus.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      results[i] = dpdp_encode(corpus[i], cb, cfg);
    }
  });
  return results;
}

EncodeSummary summarize(std::span<const DpdpResult> results) {
  EncodeSummary s;
  for (const auto& r : results) {
    s.total_units += static_cast<std::int64_t>(r.encoded.units.size());
    s.total_frames += r.encoded.total_frames;
    s.total_seconds += static_cast<double>(r.encoded.total_frames) / r.encoded.frame_rate_hz;
  }
  s.units_per_sec =
      s.total_seconds > 0.0 ? static_cast<double>(s.total_units) / s.total_seconds : 0.0;
  return s;
}

EncodeSummary encode_corpus_to_file(const CorpusManifest& manifest,
                                    const std::filesystem::path& base_dir,
                                    const Codebook& cb, const DpdpConfig& cfg,
                                    const std::filesystem::path& out_units) {
  if (manifest.utterances.empty()) {
    throw Error(ErrorCategory::BadArgument, "empty corpus");
  }
  const auto corpus = load_corpus(manifest, base_dir);
  std::vector<DpdpResult> results;
  try {
    results = encode_corpus(corpus, cb, cfg);
  } catch (const Error&) {
    // Re-run sequentially to attribute the failure to an utterance.
    for (const auto& seq : corpus) {
      try {
        dpdp_encode(seq, cb, cfg);
      } catch (const Error& e) {
        throw Error(e.category(), "utterance '" + seq.utt_id + "': " + e.what());
      }
    }
    throw;
  }
  std::vector<EncodedUtterance> encoded;
  encoded.reserve(results.size());
  for (auto& r : results) encoded.push_back(std::move(r.encoded));
  store_units(encoded, out_units);
  for (std::size_t i = 0; i < encoded.size(); ++i) results[i].encoded = std::move(encoded[i]);
  return summarize(results);
}

}  // namespace dpslm
