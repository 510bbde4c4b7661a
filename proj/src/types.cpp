#include "dpslm/types.hpp"

#include <cmath>
#include <unordered_set>

namespace dpslm {

void validate(const FeatureSequence& seq) {
  if (seq.num_frames < 1 || seq.dim < 1) {
    throw Error(ErrorCategory::Invariant,
                "feature sequence '" + seq.utt_id + "' must have T >= 1 and D >= 1");
  }
  if (seq.data.size() != seq.num_frames * seq.dim) {
    throw Error(ErrorCategory::Invariant,
                "feature sequence '" + seq.utt_id + "' has " +
                    std::to_string(seq.data.size()) + " values, expected " +
                    std::to_string(seq.num_frames * seq.dim));
  }
  if (!(seq.frame_rate_hz > 0.0f)) {
    throw Error(ErrorCategory::Invariant,
                "feature sequence '" + seq.utt_id + "' frame_rate_hz must be > 0");
  }
  for (float v : seq.data) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCategory::NonFinite,
                  "feature sequence '" + seq.utt_id + "' contains a non-finite value");
    }
  }
}

void validate(const Codebook& cb) {
  if (cb.size < 1 || cb.dim < 1) {
    throw Error(ErrorCategory::Invariant, "codebook must have K >= 1 and D >= 1");
  }
  if (cb.centroids.size() != cb.size * cb.dim) {
    throw Error(ErrorCategory::Invariant,
                "codebook has " + std::to_string(cb.centroids.size()) +
                    " values, expected " + std::to_string(cb.size * cb.dim));
  }
  for (float v : cb.centroids) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCategory::NonFinite, "codebook contains a non-finite value");
    }
  }
}

void validate(const EncodedUtterance& enc) {
  const std::string who = "encoded utterance '" + enc.utt_id + "'";
  if (enc.units.size() != enc.durations.size()) {
    throw Error(ErrorCategory::Invariant, who + ": units/durations length mismatch");
  }
  if (enc.units.empty()) {
    throw Error(ErrorCategory::Invariant, who + ": empty unit sequence");
  }
  std::int64_t total = 0;
  for (std::size_t i = 0; i < enc.units.size(); ++i) {
    if (enc.units[i] < 0) {
      throw Error(ErrorCategory::Invariant, who + ": negative unit id");
    }
    if (enc.durations[i] < 1) {
      throw Error(ErrorCategory::Invariant, who + ": duration < 1");
    }
    if (i > 0 && enc.units[i] == enc.units[i - 1]) {
      throw Error(ErrorCategory::Invariant, who + ": consecutive duplicate units");
    }
    total += enc.durations[i];
  }
  if (total != enc.total_frames) {
    throw Error(ErrorCategory::Invariant,
                who + ": durations sum to " + std::to_string(total) +
                    " but total_frames is " + std::to_string(enc.total_frames));
  }
  if (!(enc.frame_rate_hz > 0.0)) {
    throw Error(ErrorCategory::Invariant, who + ": frame_rate_hz must be > 0");
  }
  if (!enc.frame_codes.empty()) {
    if (static_cast<std::int64_t>(enc.frame_codes.size()) != enc.total_frames) {
      throw Error(ErrorCategory::Invariant, who + ": frame_codes length != total_frames");
    }
    const auto expanded = expand_units(enc.units, enc.durations);
    if (expanded != enc.frame_codes) {
      throw Error(ErrorCategory::Invariant,
                  who + ": frame_codes do not collapse to (units, durations)");
    }
  }
}

void validate(const Item& item) {
  if (item.onset < 0 || item.onset >= item.offset) {
    throw Error(ErrorCategory::Invariant,
                "item in '" + item.utt_id + "': need 0 <= onset < offset");
  }
  if (item.label.empty() || item.speaker.empty()) {
    throw Error(ErrorCategory::Invariant,
                "item in '" + item.utt_id + "': label and speaker must be non-empty");
  }
  if (item.utt_id.empty()) {
    throw Error(ErrorCategory::Invariant, "item with empty utt_id");
  }
}

void validate(const CorpusManifest& manifest) {
  std::unordered_set<std::string> seen;
  for (const auto& e : manifest.utterances) {
    if (e.utt_id.empty()) {
      throw Error(ErrorCategory::Invariant, "manifest entry with empty utt_id");
    }
    if (e.path.empty()) {
      throw Error(ErrorCategory::Invariant,
                  "manifest entry '" + e.utt_id + "' with empty path");
    }
    if (!seen.insert(e.utt_id).second) {
      throw Error(ErrorCategory::Invariant,
                  "duplicate utt_id '" + e.utt_id + "' in manifest");
    }
  }
}

std::vector<std::int32_t> expand_units(std::span<const std::int32_t> units,
                                       std::span<const std::int32_t> durations) {
  std::vector<std::int32_t> codes;
  std::size_t total = 0;
  for (std::int32_t d : durations) total += static_cast<std::size_t>(d);
  codes.reserve(total);
  for (std::size_t i = 0; i < units.size(); ++i) {
    codes.insert(codes.end(), static_cast<std::size_t>(durations[i]), units[i]);
  }
  return codes;
}

}  // namespace dpslm
