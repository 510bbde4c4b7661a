#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpslm/error.hpp"

namespace dpslm {

// A T x D matrix of framewise features at a fixed frame rate.
struct FeatureSequence {
  std::string utt_id;
  std::size_t num_frames = 0;  // T
  std::size_t dim = 0;         // D
  float frame_rate_hz = 50.0f;
  std::vector<float> data;  // row-major, num_frames * dim

  std::span<const float> frame(std::size_t t) const {
    return {data.data() + t * dim, dim};
  }
};

// K x D matrix of centroids.
struct Codebook {
  std::size_t size = 0;  // K
  std::size_t dim = 0;   // D
  std::vector<float> centroids;  // row-major, size * dim

  std::span<const float> centroid(std::size_t k) const {
    return {centroids.data() + k * dim, dim};
  }
};

// Per-frame code assignments plus their run-length-collapsed form.
struct EncodedUtterance {
  std::string utt_id;
  std::vector<std::int32_t> frame_codes;
  std::vector<std::int32_t> units;
  std::vector<std::int32_t> durations;
  std::int64_t total_frames = 0;
  double frame_rate_hz = 50.0;
  // Whether frame_codes are written on store (preserved from the source file
  // so that load followed by store is byte-identical).
  bool store_frame_codes = true;
};

// One labeled time span inside an utterance, [onset, offset) in frames.
struct Item {
  std::string utt_id;
  std::int64_t onset = 0;
  std::int64_t offset = 0;
  std::string label;
  std::string speaker;
};

using ItemList = std::vector<Item>;

struct ManifestEntry {
  std::string utt_id;
  std::string path;
  std::string split;  // optional, empty when absent
};

struct CorpusManifest {
  std::vector<ManifestEntry> utterances;
};

void validate(const FeatureSequence& seq);
void validate(const Codebook& cb);
void validate(const EncodedUtterance& enc);
void validate(const Item& item);
void validate(const CorpusManifest& manifest);

// Expands (units, durations) back to one code per frame.
std::vector<std::int32_t> expand_units(std::span<const std::int32_t> units,
                                       std::span<const std::int32_t> durations);

}  // namespace dpslm
