#include "dpslm/ngram.hpp"

#include <zlib.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace dpslm {

using nlohmann::json;

namespace {

void check_config(const NgramConfig& cfg) {
  if (cfg.order < 1) {
    throw Error(ErrorCategory::BadArgument, "order must be >= 1");
  }
  if (!(cfg.discount > 0.0) || !(cfg.discount < 1.0)) {
    throw Error(ErrorCategory::BadArgument, "discount must be in (0, 1)");
  }
}

// Reads a whole text file, transparently inflating gzip.
std::string read_text_auto(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) {
    throw Error(ErrorCategory::Io, "cannot open for read: " + path.string());
  }
  std::string content;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) {
    content.append(buf, static_cast<std::size_t>(n));
  }
  const bool bad = n < 0;
  gzclose(f);
  if (bad) {
    throw Error(ErrorCategory::Io, "read failed: " + path.string());
  }
  return content;
}

std::int64_t parse_i64(std::string_view s, const std::string& where) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCategory::Invariant, where + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

void NgramModel::count_sequence(std::span<const std::int32_t> units) {
  for (std::int32_t u : units) {
    if (u < 0 || static_cast<std::size_t>(u) >= vocab_size_) {
      throw Error(ErrorCategory::BadArgument,
                  "unit id " + std::to_string(u) + " out of range for vocab size " +
                      std::to_string(vocab_size_));
    }
  }
  std::vector<std::int32_t> padded;
  padded.reserve(units.size() + static_cast<std::size_t>(order_));
  padded.assign(static_cast<std::size_t>(order_ - 1), bos_symbol());
  padded.insert(padded.end(), units.begin(), units.end());
  padded.push_back(eos_symbol());

  for (std::size_t t = static_cast<std::size_t>(order_ - 1); t < padded.size(); ++t) {
    const std::int32_t symbol = padded[t];
    for (int o = 1; o <= order_; ++o) {
      std::vector<std::int32_t> ctx(padded.begin() + t - static_cast<std::size_t>(o - 1),
                                    padded.begin() + t);
      auto& cc = tables_[static_cast<std::size_t>(o - 1)][std::move(ctx)];
      ++cc.total;
      ++cc.counts[symbol];
    }
  }
}

NgramModel NgramModel::train(const std::vector<std::vector<std::int32_t>>& sequences,
                             std::size_t vocab_size, const NgramConfig& cfg,
                             std::string corpus_id) {
  check_config(cfg);
  if (sequences.empty()) {
    throw Error(ErrorCategory::BadArgument, "empty corpus");
  }
  if (vocab_size < 1) {
    throw Error(ErrorCategory::BadArgument, "vocab size must be >= 1");
  }
  NgramModel model;
  model.order_ = cfg.order;
  model.vocab_size_ = vocab_size;
  model.discount_ = cfg.discount;
  model.corpus_id_ = std::move(corpus_id);
  model.tables_.resize(static_cast<std::size_t>(cfg.order));
  for (const auto& seq : sequences) model.count_sequence(seq);
  return model;
}

NgramModel NgramModel::train(std::span<const EncodedUtterance> units,
                             std::size_t vocab_size, const NgramConfig& cfg,
                             std::string corpus_id) {
  std::vector<std::vector<std::int32_t>> sequences;
  sequences.reserve(units.size());
  for (const auto& enc : units) sequences.push_back(enc.units);
  return train(sequences, vocab_size, cfg, std::move(corpus_id));
}

double NgramModel::prob(std::span<const std::int32_t> context, std::int32_t symbol) const {
  if (symbol < 0 || symbol > eos_symbol()) {
    throw Error(ErrorCategory::BadArgument,
                "symbol " + std::to_string(symbol) + " is not predictable");
  }
  // Interpolate upward from the uniform distribution over units + EOS.
  double p = 1.0 / static_cast<double>(n_predictable());
  const int max_order =
      std::min<int>(order_, static_cast<int>(context.size()) + 1);
  for (int o = 1; o <= max_order; ++o) {
    const std::vector<std::int32_t> ctx(context.end() - (o - 1), context.end());
    const auto& table = tables_[static_cast<std::size_t>(o - 1)];
    const auto it = table.find(ctx);
    if (it == table.end() || it->second.total == 0) continue;  // back off entirely
    const auto& cc = it->second;
    const auto cit = cc.counts.find(symbol);
    const double c = cit == cc.counts.end() ? 0.0 : static_cast<double>(cit->second);
    const double total = static_cast<double>(cc.total);
    const double n1plus = static_cast<double>(cc.counts.size());
    p = std::max(c - discount_, 0.0) / total + (discount_ * n1plus / total) * p;
  }
  return p;
}

double NgramModel::score_sequence(std::span<const std::int32_t> units,
                                  Normalization normalization) const {
  for (std::int32_t u : units) {
    if (u < 0 || static_cast<std::size_t>(u) >= vocab_size_) {
      throw Error(ErrorCategory::BadArgument,
                  "unit id " + std::to_string(u) + " out of vocabulary (K=" +
                      std::to_string(vocab_size_) + ")");
    }
  }
  std::vector<std::int32_t> padded;
  padded.assign(static_cast<std::size_t>(order_ - 1), bos_symbol());
  padded.insert(padded.end(), units.begin(), units.end());
  padded.push_back(eos_symbol());

  double log_prob = 0.0;
  for (std::size_t t = static_cast<std::size_t>(order_ - 1); t < padded.size(); ++t) {
    const std::span<const std::int32_t> ctx(padded.data() + t - static_cast<std::size_t>(order_ - 1),
                                            static_cast<std::size_t>(order_ - 1));
    log_prob += std::log(prob(ctx, padded[t]));
  }
  if (normalization == Normalization::per_token) {
    log_prob /= static_cast<double>(units.size() + 1);
  }
  return log_prob;
}

void NgramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCategory::Io, "cannot open for write: " + path.string());
  }
  json header;
  header["order"] = order_;
  header["K"] = vocab_size_;
  header["discount"] = discount_;
  header["corpus"] = corpus_id_;
  out << header.dump() << '\n';
  for (const auto& table : tables_) {
    for (const auto& [ctx, cc] : table) {
      std::string ctx_str;
      for (std::size_t i = 0; i < ctx.size(); ++i) {
        if (i > 0) ctx_str += ' ';
        ctx_str += std::to_string(ctx[i]);
      }
      for (const auto& [symbol, count] : cc.counts) {
        out << ctx_str << '\t' << symbol << '\t' << count << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

NgramModel NgramModel::load(const std::filesystem::path& path) {
  const std::string content = read_text_auto(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCategory::Truncated, "empty model file: " + path.string());
  }
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::Invariant, path.string() + ": bad header: " + e.what());
  }
  for (const char* key : {"order", "K", "discount"}) {
    if (!header.contains(key)) {
      throw Error(ErrorCategory::Invariant,
                  path.string() + ": header missing '" + std::string(key) + "'");
    }
  }

  NgramModel model;
  model.order_ = header["order"].get<int>();
  model.vocab_size_ = header["K"].get<std::size_t>();
  model.discount_ = header["discount"].get<double>();
  if (header.contains("corpus")) model.corpus_id_ = header["corpus"].get<std::string>();
  if (model.order_ < 1 || !(model.discount_ > 0.0) || !(model.discount_ < 1.0)) {
    throw Error(ErrorCategory::Invariant, path.string() + ": invalid header values");
  }
  model.tables_.resize(static_cast<std::size_t>(model.order_));

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                       : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos) {
      throw Error(ErrorCategory::Invariant, where + ": expected context<TAB>unit<TAB>count");
    }
    std::vector<std::int32_t> ctx;
    const std::string_view ctx_str(line.data(), tab1);
    std::size_t start = 0;
    while (start < ctx_str.size()) {
      std::size_t space = ctx_str.find(' ', start);
      if (space == std::string_view::npos) space = ctx_str.size();
      ctx.push_back(static_cast<std::int32_t>(
          parse_i64(ctx_str.substr(start, space - start), where)));
      start = space + 1;
    }
    if (ctx.size() >= static_cast<std::size_t>(model.order_)) {
      throw Error(ErrorCategory::Invariant, where + ": context longer than order-1");
    }
    const auto symbol = static_cast<std::int32_t>(
        parse_i64(std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1), where));
    const std::int64_t count =
        parse_i64(std::string_view(line).substr(tab2 + 1), where);
    if (count < 1) {
      throw Error(ErrorCategory::Invariant, where + ": count must be >= 1");
    }
    auto& cc = model.tables_[ctx.size()][std::move(ctx)];
    cc.total += count;
    cc.counts[symbol] += count;
  }
  return model;
}

double corpus_perplexity(const NgramModel& model,
                         const std::vector<std::vector<std::int32_t>>& sequences) {
  double log_prob = 0.0;
  std::int64_t events = 0;
  for (const auto& seq : sequences) {
    log_prob += model.score_sequence(seq, Normalization::sum);
    events += static_cast<std::int64_t>(seq.size()) + 1;
  }
  if (events == 0) {
    throw Error(ErrorCategory::Degenerate, "no events to score");
  }
  return std::exp(-log_prob / static_cast<double>(events));
}

std::vector<PairRef> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCategory::Io, "cannot open for read: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCategory::Truncated, "empty pairs file: " + path.string());
  }
  if (line != "pair_id\treal_utt_id\tfake_utt_id") {
    throw Error(ErrorCategory::Invariant, "bad pairs header in " + path.string());
  }
  std::vector<PairRef> pairs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                       : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos) {
      throw Error(ErrorCategory::Invariant, where + ": expected 3 tab-separated fields");
    }
    PairRef p;
    p.pair_id = line.substr(0, tab1);
    p.real_utt_id = line.substr(tab1 + 1, tab2 - tab1 - 1);
    p.fake_utt_id = line.substr(tab2 + 1);
    if (p.pair_id.empty() || p.real_utt_id.empty() || p.fake_utt_id.empty()) {
      throw Error(ErrorCategory::Invariant, where + ": empty field");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void store_pairs(std::span<const PairRef> pairs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCategory::Io, "cannot open for write: " + path.string());
  }
  out << "pair_id\treal_utt_id\tfake_utt_id\n";
  for (const auto& p : pairs) {
    out << p.pair_id << '\t' << p.real_utt_id << '\t' << p.fake_utt_id << '\n';
  }
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

PairEvalReport discriminate_pairs(const NgramModel& model,
                                  std::span<const PairRef> pairs,
                                  const std::vector<EncodedUtterance>& units,
                                  Normalization normalization) {
  if (pairs.empty()) {
    throw Error(ErrorCategory::BadArgument, "empty pairs file");
  }
  std::map<std::string, const EncodedUtterance*> by_id;
  for (const auto& enc : units) by_id[enc.utt_id] = &enc;
  const auto lookup = [&](const std::string& utt_id) -> const EncodedUtterance& {
    const auto it = by_id.find(utt_id);
    if (it == by_id.end()) {
      throw Error(ErrorCategory::BadArgument,
                  "pair references unknown utt_id '" + utt_id + "'");
    }
    return *it->second;
  };

  PairEvalReport report;
  report.n_pairs = static_cast<std::int64_t>(pairs.size());
  double wins = 0.0;
  for (const auto& p : pairs) {
    ScoredPair scored;
    scored.pair_id = p.pair_id;
    scored.normalization = normalization;
    scored.score_real = model.score_sequence(lookup(p.real_utt_id).units, normalization);
    scored.score_fake = model.score_sequence(lookup(p.fake_utt_id).units, normalization);
    if (scored.score_real > scored.score_fake) {
      scored.outcome = PairOutcome::real_wins;
      wins += 1.0;
    } else if (scored.score_real < scored.score_fake) {
      scored.outcome = PairOutcome::fake_wins;
    } else {
      scored.outcome = PairOutcome::tie;
      wins += 0.5;
      ++report.n_ties;
    }
    report.pairs.push_back(std::move(scored));
  }
  report.accuracy = wins / static_cast<double>(report.n_pairs);
  return report;
}

}  // namespace dpslm
