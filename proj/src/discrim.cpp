#include "dpslm/discrim.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "dpslm/parallel.hpp"

namespace dpslm {

namespace {

std::vector<SegmentRepr> build_segments(const ItemList& items,
                                        const std::vector<EncodedUtterance>& units,
                                        const Codebook& cb, bool per_frame) {
  if (items.empty()) {
    throw Error(ErrorCategory::BadArgument, "empty item list");
  }
  std::unordered_map<std::string, const EncodedUtterance*> by_id;
  for (const auto& enc : units) by_id[enc.utt_id] = &enc;

  std::vector<SegmentRepr> segments(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto it = by_id.find(items[i].utt_id);
    if (it == by_id.end()) {
      throw Error(ErrorCategory::BadArgument,
                  "item references unknown utt_id '" + items[i].utt_id + "'");
    }
    segments[i] = make_segment(items[i], *it->second, cb, per_frame);
  }
  return segments;
}

// Symmetric DTW cost table for the given segment indices, parallel over pairs.
std::vector<double> pairwise_costs(const std::vector<SegmentRepr>& segments,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                   const DtwConfig& cfg) {
  std::vector<double> costs(pairs.size());
  parallel_blocks(pairs.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      costs[p] = dtw_cost(segments[pairs[p].first], segments[pairs[p].second], cfg);
    }
  });
  return costs;
}

}  // namespace

AbxReport abx_score(const ItemList& items, const std::vector<EncodedUtterance>& units,
                    const Codebook& cb, const DtwConfig& dtw_cfg, bool per_frame) {
  const auto segments = build_segments(items, units, cb, per_frame);

  // speaker -> label -> item indices, ordered for a fixed aggregation order.
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) {
    groups[items[i].speaker][items[i].label].push_back(i);
  }

  AbxReport report;
  double speaker_sum = 0.0;
  std::size_t n_speakers = 0;

  for (const auto& [speaker, by_label] : groups) {
    // All within-speaker pair costs, cached in a local index.
    std::vector<std::size_t> members;
    for (const auto& [label, idxs] : by_label) {
      members.insert(members.end(), idxs.begin(), idxs.end());
    }
    std::unordered_map<std::size_t, std::size_t> local;
    for (std::size_t i = 0; i < members.size(); ++i) local[members[i]] = i;

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(members.size() * (members.size() - 1) / 2);
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        pairs.emplace_back(members[i], members[j]);
      }
    }
    const auto costs = pairwise_costs(segments, pairs, dtw_cfg);
    const std::size_t width = members.size();
    std::vector<double> table(width * width, 0.0);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const std::size_t i = local[pairs[p].first];
      const std::size_t j = local[pairs[p].second];
      table[i * width + j] = costs[p];
      table[j * width + i] = costs[p];
    }
    const auto cost_of = [&](std::size_t g1, std::size_t g2) {
      return table[local.at(g1) * width + local.at(g2)];
    };

    double cell_sum = 0.0;
    std::size_t n_cells = 0;
    for (const auto& [label_a, as] : by_label) {
      if (as.size() < 2) continue;
      for (const auto& [label_b, bs] : by_label) {
        if (label_b == label_a) continue;
        // Triple scores are multiples of 0.5, so the sum is exact and the
        // cell score does not depend on enumeration order.
        double triple_sum = 0.0;
        std::int64_t n_triples = 0;
        for (std::size_t x : as) {
          for (std::size_t a : as) {
            if (a == x) continue;
            const double dax = cost_of(a, x);
            for (std::size_t b : bs) {
              const double dbx = cost_of(b, x);
              if (dax < dbx) {
                triple_sum += 1.0;
              } else if (dax == dbx) {
                triple_sum += 0.5;
              }
              ++n_triples;
            }
          }
        }
        AbxCell cell;
        cell.speaker = speaker;
        cell.label_a = label_a;
        cell.label_b = label_b;
        cell.n_triples = n_triples;
        cell.score = triple_sum / static_cast<double>(n_triples);
        cell_sum += cell.score;
        ++n_cells;
        report.cells.push_back(std::move(cell));
      }
    }
    if (n_cells > 0) {
      speaker_sum += cell_sum / static_cast<double>(n_cells);
      ++n_speakers;
    }
  }

  if (n_speakers == 0) {
    throw Error(ErrorCategory::Degenerate,
                "no speaker has a valid ABX cell (need >= 2 instances of one label "
                "and >= 1 of another)");
  }
  report.error = 1.0 - speaker_sum / static_cast<double>(n_speakers);
  return report;
}

double average_precision(std::span<const char> ranked_positives,
                         std::vector<std::pair<double, double>>* pr_curve) {
  std::int64_t total_positives = 0;
  for (char c : ranked_positives) total_positives += c ? 1 : 0;
  if (total_positives == 0) {
    throw Error(ErrorCategory::Degenerate, "no positive pairs");
  }
  double ap = 0.0;
  std::int64_t hits = 0;
  for (std::size_t n = 0; n < ranked_positives.size(); ++n) {
    if (ranked_positives[n]) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(n + 1) /
            static_cast<double>(total_positives);
    }
    if (pr_curve) {
      pr_curve->emplace_back(
          static_cast<double>(hits) / static_cast<double>(total_positives),
          static_cast<double>(hits) / static_cast<double>(n + 1));
    }
  }
  return ap;
}

SameDiffReport same_different_ap(const ItemList& items,
                                 const std::vector<EncodedUtterance>& units,
                                 const Codebook& cb, const DtwConfig& dtw_cfg,
                                 const SameDiffConfig& sd_cfg, bool per_frame) {
  const auto segments = build_segments(items, units, cb, per_frame);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      if (sd_cfg.pairing == Pairing::across_speaker_only &&
          items[i].speaker == items[j].speaker) {
        continue;
      }
      pairs.emplace_back(i, j);
    }
  }
  if (pairs.empty()) {
    throw Error(ErrorCategory::Degenerate, "no item pairs after pairing filter");
  }

  const auto costs = pairwise_costs(segments, pairs, dtw_cfg);

  std::int64_t n_pos = 0;
  for (const auto& [i, j] : pairs) {
    if (items[i].label == items[j].label) ++n_pos;
  }
  if (n_pos == 0 || n_pos == static_cast<std::int64_t>(pairs.size())) {
    throw Error(ErrorCategory::Degenerate,
                "need at least one same-word and one different-word pair");
  }

  // Rank ascending by cost; stable sort keeps enumeration order on ties.
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return costs[x] < costs[y]; });

  std::vector<char> ranked(pairs.size());
  std::int64_t n_ties = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& [i, j] = pairs[order[r]];
    ranked[r] = items[i].label == items[j].label ? 1 : 0;
    if (r > 0 && costs[order[r]] == costs[order[r - 1]]) ++n_ties;
  }

  SameDiffReport report;
  report.n_pairs = static_cast<std::int64_t>(pairs.size());
  report.n_ties = n_ties;
  report.ap = average_precision(ranked, &report.pr_curve);
  return report;
}

}  // namespace dpslm
