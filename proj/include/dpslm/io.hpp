#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dpslm/types.hpp"

namespace dpslm {

// Binary feature file: magic "DPFT", u32 version=1, u32 T, u32 D,
// f32 frame_rate_hz, then T*D f32 row-major, all little-endian.
FeatureSequence load_features(const std::filesystem::path& path,
                              std::string utt_id = "");
void store_features(const FeatureSequence& seq,
                    const std::filesystem::path& path);

// Binary codebook file: magic "DPCB", u32 version=1, u32 K, u32 D,
// then K*D f32 row-major little-endian.
Codebook load_codebook(const std::filesystem::path& path);
void store_codebook(const Codebook& cb, const std::filesystem::path& path);

// UTF-8 JSONL, one object per utterance.
std::vector<EncodedUtterance> load_units(const std::filesystem::path& path);
void store_units(std::span<const EncodedUtterance> units,
                 const std::filesystem::path& path);

// UTF-8 TSV with header: utt_id onset offset label speaker.
ItemList load_items(const std::filesystem::path& path);
void store_items(const ItemList& items, const std::filesystem::path& path);

// JSON {"utterances":[{"utt_id","path","split"?}...]}.
CorpusManifest load_manifest(const std::filesystem::path& path);
void store_manifest(const CorpusManifest& manifest,
                    const std::filesystem::path& path);

// Loads every feature file in the manifest. Relative paths resolve against
// base_dir (callers typically pass the manifest's directory).
std::vector<FeatureSequence> load_corpus(
    const CorpusManifest& manifest, const std::filesystem::path& base_dir);

// Shortest round-trip decimal formatting, used for deterministic reports.
std::string format_double(double v);

}  // namespace dpslm
