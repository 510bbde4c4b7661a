#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dpslm/types.hpp"

namespace dpslm {

enum class Normalization { sum, per_token };

struct NgramConfig {
  int order = 5;
  double discount = 0.75;  // absolute discount in (0, 1)
};

// Interpolated absolute-discounting n-gram model over unit ids 0..K-1 plus a
// scored end-of-sequence symbol. Sequences are padded with order-1 begin
// symbols; the begin symbol only ever appears in contexts.
class NgramModel {
 public:
  static NgramModel train(const std::vector<std::vector<std::int32_t>>& sequences,
                          std::size_t vocab_size, const NgramConfig& cfg,
                          std::string corpus_id = "");
  static NgramModel train(std::span<const EncodedUtterance> units,
                          std::size_t vocab_size, const NgramConfig& cfg,
                          std::string corpus_id = "");

  // P(symbol | context), where context holds the most recent symbol last and
  // may be shorter than order-1. symbol may be a unit id or eos_symbol().
  double prob(std::span<const std::int32_t> context, std::int32_t symbol) const;

  // Natural-log likelihood of a unit sequence including the end symbol.
  // Per-token normalization divides by (length + 1).
  double score_sequence(std::span<const std::int32_t> units,
                        Normalization normalization) const;

  void save(const std::filesystem::path& path) const;
  static NgramModel load(const std::filesystem::path& path);

  int order() const { return order_; }
  std::size_t vocab_size() const { return vocab_size_; }
  double discount() const { return discount_; }
  const std::string& corpus_id() const { return corpus_id_; }
  std::int32_t eos_symbol() const { return static_cast<std::int32_t>(vocab_size_); }
  std::int32_t bos_symbol() const { return static_cast<std::int32_t>(vocab_size_) + 1; }
  // Number of predictable symbols: the units plus the end symbol.
  std::size_t n_predictable() const { return vocab_size_ + 1; }

 private:
  struct ContextCounts {
    std::int64_t total = 0;
    std::map<std::int32_t, std::int64_t> counts;
  };
  // One table per order; the key is the (order-1)-symbol context.
  using Table = std::map<std::vector<std::int32_t>, ContextCounts>;

  NgramModel() = default;
  void count_sequence(std::span<const std::int32_t> units);

  int order_ = 1;
  std::size_t vocab_size_ = 0;
  double discount_ = 0.75;
  std::string corpus_id_;
  std::vector<Table> tables_;  // index o-1 holds the order-o table
};

// exp of the mean negative log likelihood per predicted symbol.
double corpus_perplexity(const NgramModel& model,
                         const std::vector<std::vector<std::int32_t>>& sequences);

struct PairRef {
  std::string pair_id;
  std::string real_utt_id;
  std::string fake_utt_id;
};

// TSV with header: pair_id real_utt_id fake_utt_id.
std::vector<PairRef> load_pairs(const std::filesystem::path& path);
void store_pairs(std::span<const PairRef> pairs, const std::filesystem::path& path);

enum class PairOutcome { real_wins, fake_wins, tie };

struct ScoredPair {
  std::string pair_id;
  double score_real = 0.0;
  double score_fake = 0.0;
  Normalization normalization = Normalization::per_token;
  PairOutcome outcome = PairOutcome::tie;  // consistent with the scores above
};

struct PairEvalReport {
  double accuracy = 0.0;  // (#real wins + 0.5 * #ties) / #pairs
  std::int64_t n_pairs = 0;
  std::int64_t n_ties = 0;
  std::vector<ScoredPair> pairs;
};

PairEvalReport discriminate_pairs(const NgramModel& model,
                                  std::span<const PairRef> pairs,
                                  const std::vector<EncodedUtterance>& units,
                                  Normalization normalization);

}  // namespace dpslm
