// dpslm: duration-penalized speech unit pipeline.
//
// One binary, subcommand style. Every subcommand writes its JSON (or TSV)
// report to --out plus a run manifest at <out>.run.json. All randomness flows
// from --seed; --threads never changes output bytes.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "dpslm/discrim.hpp"
#include "dpslm/dpdp.hpp"
#include "dpslm/io.hpp"
#include "dpslm/kmeans.hpp"
#include "dpslm/ngram.hpp"
#include "dpslm/parallel.hpp"
#include "dpslm/rate.hpp"
#include "dpslm/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpslm;

namespace {

// ---------------------------------------------------------------------------
// Logging, gated by DPSLM_LOG (quiet|info|debug; default quiet).

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("DPSLM_LOG");
    if (env == nullptr) return 0;
    const std::string v(env);
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[dpslm] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// Run configuration: JSON document mirroring every module config. Flags
// override config values; paths in the file resolve relative to it.

struct RunConfig {
  RunConfig() { kmeans.k = 0; }  // unset until given by flag or config

  std::uint64_t seed = 0;
  unsigned threads = 0;

  std::string manifest, features_dir, codebook, units, items, pairs, model, out;

  KMeansConfig kmeans;
  DpdpConfig dpdp;

  double target_bitrate = 0.0;
  RateKind rate_kind = RateKind::fixed;
  double rate_tol = 0.02;
  int max_evals = 40;
  int points = 6;

  DtwConfig dtw;
  bool per_frame = false;
  SameDiffConfig samediff;

  NgramConfig ngram;
  Normalization normalization = Normalization::per_token;
};

RateKind parse_rate_kind(const std::string& v) {
  if (v == "fixed") return RateKind::fixed;
  if (v == "entropy") return RateKind::entropy;
  throw Error(ErrorCategory::Config, "rate_kind must be 'fixed' or 'entropy', got '" + v + "'");
}

LocalDistance parse_local_distance(const std::string& v) {
  if (v == "angular") return LocalDistance::angular;
  if (v == "squared-euclidean") return LocalDistance::squared_euclidean;
  if (v == "code-mismatch") return LocalDistance::code_mismatch;
  throw Error(ErrorCategory::Config,
              "local_distance must be angular|squared-euclidean|code-mismatch, got '" + v + "'");
}

Pairing parse_pairing(const std::string& v) {
  if (v == "all-pairs") return Pairing::all_pairs;
  if (v == "across-speaker-only") return Pairing::across_speaker_only;
  throw Error(ErrorCategory::Config,
              "pairing must be all-pairs|across-speaker-only, got '" + v + "'");
}

Normalization parse_normalization(const std::string& v) {
  if (v == "sum") return Normalization::sum;
  if (v == "per-token") return Normalization::per_token;
  throw Error(ErrorCategory::Config, "normalization must be sum|per-token, got '" + v + "'");
}

// Collects every unknown key so config errors report all offenders at once.
void collect_unknown_keys(const json& obj, const std::string& prefix,
                          std::initializer_list<const char*> known,
                          std::vector<std::string>& offenders) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) offenders.push_back(prefix + key);
  }
}

std::string resolve_against(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  return path.is_relative() ? (base / path).string() : p;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::Io, "cannot open config: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::Config, path.string() + ": " + e.what());
  }

  std::vector<std::string> offenders;
  collect_unknown_keys(doc, "",
                       {"seed", "threads", "paths", "kmeans", "dpdp", "rate", "dtw",
                        "samediff", "ngram"},
                       offenders);
  if (doc.contains("paths")) {
    collect_unknown_keys(doc["paths"], "paths.",
                         {"manifest", "features_dir", "codebook", "units", "items",
                          "pairs", "model", "out"},
                         offenders);
  }
  if (doc.contains("kmeans")) {
    collect_unknown_keys(doc["kmeans"], "kmeans.",
                         {"k", "max_iters", "n_restarts", "sample_fraction",
                          "convergence_tol"},
                         offenders);
  }
  if (doc.contains("dpdp")) {
    collect_unknown_keys(doc["dpdp"], "dpdp.", {"lambda", "prune_fraction"}, offenders);
  }
  if (doc.contains("rate")) {
    collect_unknown_keys(doc["rate"], "rate.",
                         {"target_bitrate", "rate_kind", "tol", "max_evals", "points"},
                         offenders);
  }
  if (doc.contains("dtw")) {
    collect_unknown_keys(doc["dtw"], "dtw.", {"local_distance", "per_frame"}, offenders);
  }
  if (doc.contains("samediff")) {
    collect_unknown_keys(doc["samediff"], "samediff.", {"pairing"}, offenders);
  }
  if (doc.contains("ngram")) {
    collect_unknown_keys(doc["ngram"], "ngram.", {"order", "discount", "normalization"},
                         offenders);
  }
  if (!offenders.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : offenders) msg += " " + k;
    throw Error(ErrorCategory::Config, msg);
  }

  RunConfig cfg;
  const fs::path base = path.parent_path();
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("threads")) cfg.threads = doc["threads"].get<unsigned>();
  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    const auto get = [&](const char* key) {
      return p.contains(key) ? resolve_against(base, p[key].get<std::string>())
                             : std::string();
    };
    cfg.manifest = get("manifest");
    cfg.features_dir = get("features_dir");
    cfg.codebook = get("codebook");
    cfg.units = get("units");
    cfg.items = get("items");
    cfg.pairs = get("pairs");
    cfg.model = get("model");
    cfg.out = get("out");
  }
  if (doc.contains("kmeans")) {
    const auto& k = doc["kmeans"];
    if (k.contains("k")) cfg.kmeans.k = k["k"].get<std::size_t>();
    if (k.contains("max_iters")) cfg.kmeans.max_iters = k["max_iters"].get<int>();
    if (k.contains("n_restarts")) cfg.kmeans.n_restarts = k["n_restarts"].get<int>();
    if (k.contains("sample_fraction")) {
      cfg.kmeans.sample_fraction = k["sample_fraction"].get<double>();
    }
    if (k.contains("convergence_tol")) {
      cfg.kmeans.convergence_tol = k["convergence_tol"].get<double>();
    }
  }
  if (doc.contains("dpdp")) {
    const auto& d = doc["dpdp"];
    if (d.contains("lambda")) cfg.dpdp.lambda = d["lambda"].get<double>();
    if (d.contains("prune_fraction")) {
      cfg.dpdp.prune_fraction = d["prune_fraction"].get<double>();
    }
  }
  if (doc.contains("rate")) {
    const auto& r = doc["rate"];
    if (r.contains("target_bitrate")) cfg.target_bitrate = r["target_bitrate"].get<double>();
    if (r.contains("rate_kind")) cfg.rate_kind = parse_rate_kind(r["rate_kind"].get<std::string>());
    if (r.contains("tol")) cfg.rate_tol = r["tol"].get<double>();
    if (r.contains("max_evals")) cfg.max_evals = r["max_evals"].get<int>();
    if (r.contains("points")) cfg.points = r["points"].get<int>();
  }
  if (doc.contains("dtw")) {
    const auto& d = doc["dtw"];
    if (d.contains("local_distance")) {
      cfg.dtw.local_distance = parse_local_distance(d["local_distance"].get<std::string>());
    }
    if (d.contains("per_frame")) cfg.per_frame = d["per_frame"].get<bool>();
  }
  if (doc.contains("samediff")) {
    const auto& s = doc["samediff"];
    if (s.contains("pairing")) {
      cfg.samediff.pairing = parse_pairing(s["pairing"].get<std::string>());
    }
  }
  if (doc.contains("ngram")) {
    const auto& n = doc["ngram"];
    if (n.contains("order")) cfg.ngram.order = n["order"].get<int>();
    if (n.contains("discount")) cfg.ngram.discount = n["discount"].get<double>();
    if (n.contains("normalization")) {
      cfg.normalization = parse_normalization(n["normalization"].get<std::string>());
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Flag plumbing: every flag is optional and overrides the config when given.

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> manifest, features_dir, codebook, units, items, pairs,
      model, out, codebooks, per_pair;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::size_t> k;
  std::optional<int> max_iters, n_restarts, order, points, max_evals;
  std::optional<double> sample_fraction, convergence_tol, lambda, prune_frac,
      target_bitrate, tol, discount;
  std::optional<std::string> rate_kind, local_distance, pairing, normalization;
  bool per_frame = false;
};

RunConfig effective_config(const Flags& f) {
  RunConfig cfg;
  if (f.config) cfg = load_run_config(*f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (f.manifest) cfg.manifest = *f.manifest;
  if (f.features_dir) cfg.features_dir = *f.features_dir;
  if (f.codebook) cfg.codebook = *f.codebook;
  if (f.units) cfg.units = *f.units;
  if (f.items) cfg.items = *f.items;
  if (f.pairs) cfg.pairs = *f.pairs;
  if (f.model) cfg.model = *f.model;
  if (f.out) cfg.out = *f.out;
  if (f.k) cfg.kmeans.k = *f.k;
  if (f.max_iters) cfg.kmeans.max_iters = *f.max_iters;
  if (f.n_restarts) cfg.kmeans.n_restarts = *f.n_restarts;
  if (f.sample_fraction) cfg.kmeans.sample_fraction = *f.sample_fraction;
  if (f.convergence_tol) cfg.kmeans.convergence_tol = *f.convergence_tol;
  if (f.lambda) cfg.dpdp.lambda = *f.lambda;
  if (f.prune_frac) cfg.dpdp.prune_fraction = *f.prune_frac;
  if (f.target_bitrate) cfg.target_bitrate = *f.target_bitrate;
  if (f.rate_kind) cfg.rate_kind = parse_rate_kind(*f.rate_kind);
  if (f.tol) cfg.rate_tol = *f.tol;
  if (f.max_evals) cfg.max_evals = *f.max_evals;
  if (f.points) cfg.points = *f.points;
  if (f.local_distance) cfg.dtw.local_distance = parse_local_distance(*f.local_distance);
  if (f.per_frame) cfg.per_frame = true;
  if (f.pairing) cfg.samediff.pairing = parse_pairing(*f.pairing);
  if (f.order) cfg.ngram.order = *f.order;
  if (f.discount) cfg.ngram.discount = *f.discount;
  if (f.normalization) cfg.normalization = parse_normalization(*f.normalization);
  cfg.kmeans.seed = cfg.seed;
  return cfg;
}

void require(const std::string& value, const char* what) {
  if (value.empty()) {
    throw Error(ErrorCategory::BadArgument,
                std::string("missing required ") + what + " (flag or config)");
  }
}

// ---------------------------------------------------------------------------
// Report + run-manifest output.

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json config_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["paths"] = {{"manifest", cfg.manifest},   {"features_dir", cfg.features_dir},
                {"codebook", cfg.codebook},   {"units", cfg.units},
                {"items", cfg.items},         {"pairs", cfg.pairs},
                {"model", cfg.model},         {"out", cfg.out}};
  j["kmeans"] = {{"k", cfg.kmeans.k},
                 {"max_iters", cfg.kmeans.max_iters},
                 {"n_restarts", cfg.kmeans.n_restarts},
                 {"sample_fraction", cfg.kmeans.sample_fraction},
                 {"convergence_tol", cfg.kmeans.convergence_tol}};
  j["dpdp"] = {{"lambda", cfg.dpdp.lambda}, {"prune_fraction", cfg.dpdp.prune_fraction}};
  j["rate"] = {{"target_bitrate", cfg.target_bitrate},
               {"rate_kind", cfg.rate_kind == RateKind::fixed ? "fixed" : "entropy"},
               {"tol", cfg.rate_tol},
               {"max_evals", cfg.max_evals},
               {"points", cfg.points}};
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::Io, "cannot open for write: " + path.string());
  out << text;
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

void write_report(const fs::path& path, const json& report) {
  write_text(path, report.dump(2) + "\n");
}

void write_run_manifest(const std::string& subcommand, const RunConfig& cfg) {
  if (cfg.out.empty()) return;
  char buf[64];
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);

  json manifest;
  manifest["subcommand"] = subcommand;
  std::ostringstream hash;
  hash << std::hex << fnv1a64(config_json(cfg).dump());
  manifest["config_hash"] = hash.str();
  manifest["seed"] = cfg.seed;
  manifest["version"] = kVersion;
  manifest["timestamp_utc"] = buf;  // the only nondeterministic field
  write_report(fs::path(cfg.out + ".run.json"), manifest);
}

json bitrate_json(const BitrateReport& r) {
  return {{"units_per_sec", r.units_per_sec},
          {"bits_per_sec_fixed", r.bits_per_sec_fixed},
          {"bits_per_sec_entropy", r.bits_per_sec_entropy},
          {"total_units", r.total_units},
          {"total_seconds", r.total_seconds}};
}

// ---------------------------------------------------------------------------
// Shared loading helpers.

fs::path features_base(const RunConfig& cfg) {
  if (!cfg.features_dir.empty()) return cfg.features_dir;
  return fs::path(cfg.manifest).parent_path();
}

std::vector<FeatureSequence> load_manifest_corpus(const RunConfig& cfg) {
  require(cfg.manifest, "--manifest");
  const auto manifest = load_manifest(cfg.manifest);
  if (manifest.utterances.empty()) {
    throw Error(ErrorCategory::BadArgument, "empty corpus");
  }
  return load_corpus(manifest, features_base(cfg));
}

// ---------------------------------------------------------------------------
// Subcommands.

void run_train_kmeans(const RunConfig& cfg) {
  require(cfg.out, "--out");
  if (cfg.kmeans.k < 1) throw Error(ErrorCategory::BadArgument, "missing --k");
  const auto corpus = load_manifest_corpus(cfg);
  log_info("training K-means, K=" + std::to_string(cfg.kmeans.k));
  const auto result = train_codebook(corpus, cfg.kmeans);
  store_codebook(result.codebook, cfg.out);
  json report;
  report["inertia_per_iter"] = result.report.inertia_per_iter;
  report["reseeds"] = result.report.reseeds;
  report["seed"] = result.report.seed;
  write_report(cfg.out + ".report.json", report);
}

void run_encode(const RunConfig& cfg) {
  require(cfg.codebook, "--codebook");
  require(cfg.out, "--out");
  require(cfg.manifest, "--manifest");
  const auto cb = load_codebook(cfg.codebook);
  const auto manifest = load_manifest(cfg.manifest);
  const auto summary =
      encode_corpus_to_file(manifest, features_base(cfg), cb, cfg.dpdp, cfg.out);
  json report;
  report["total_units"] = summary.total_units;
  report["total_frames"] = summary.total_frames;
  report["total_seconds"] = summary.total_seconds;
  report["units_per_sec"] = summary.units_per_sec;
  write_report(cfg.out + ".report.json", report);
}

void run_bitrate(const RunConfig& cfg) {
  require(cfg.units, "--units");
  require(cfg.out, "--out");
  if (cfg.kmeans.k < 1) throw Error(ErrorCategory::BadArgument, "missing --k");
  const auto units = load_units(cfg.units);
  write_report(cfg.out, bitrate_json(bitrate(units, cfg.kmeans.k)));
}

void run_calibrate(const RunConfig& cfg) {
  require(cfg.codebook, "--codebook");
  require(cfg.out, "--out");
  if (!(cfg.target_bitrate > 0.0)) {
    throw Error(ErrorCategory::BadArgument, "missing --target-bitrate");
  }
  const auto corpus = load_manifest_corpus(cfg);
  const auto cb = load_codebook(cfg.codebook);
  const auto result =
      calibrate_lambda(corpus, cb, cfg.target_bitrate, cfg.rate_kind, cfg.rate_tol,
                       cfg.max_evals, cfg.dpdp.prune_fraction);
  json report;
  report["lambda"] = result.lambda;
  report["converged"] = result.converged;
  report["evals"] = result.evals;
  report["achieved"] = bitrate_json(result.achieved);
  write_report(cfg.out, report);
}

json sweep_json(const std::vector<SweepPoint>& points) {
  json arr = json::array();
  for (const auto& p : points) {
    arr.push_back({{"lambda", p.lambda},
                   {"units_per_sec", p.report.units_per_sec},
                   {"bits_per_sec_fixed", p.report.bits_per_sec_fixed},
                   {"bits_per_sec_entropy", p.report.bits_per_sec_entropy}});
  }
  return arr;
}

void run_sweep(const RunConfig& cfg) {
  require(cfg.codebook, "--codebook");
  require(cfg.out, "--out");
  const auto corpus = load_manifest_corpus(cfg);
  const auto cb = load_codebook(cfg.codebook);
  const auto points = sweep(corpus, cb, cfg.points, cfg.rate_kind, cfg.rate_tol,
                            cfg.max_evals, cfg.dpdp.prune_fraction);
  write_report(cfg.out, sweep_json(points));
}

void run_eval_abx(const RunConfig& cfg) {
  require(cfg.items, "--items");
  require(cfg.units, "--units");
  require(cfg.codebook, "--codebook");
  require(cfg.out, "--out");
  const auto items = load_items(cfg.items);
  const auto units = load_units(cfg.units);
  const auto cb = load_codebook(cfg.codebook);
  const auto report = abx_score(items, units, cb, cfg.dtw, cfg.per_frame);
  json out;
  out["abx_error"] = report.error;
  out["cells"] = json::array();
  for (const auto& cell : report.cells) {
    out["cells"].push_back({{"speaker", cell.speaker},
                            {"label_a", cell.label_a},
                            {"label_b", cell.label_b},
                            {"score", cell.score},
                            {"n_triples", cell.n_triples}});
  }
  write_report(cfg.out, out);
}

void run_eval_same_diff(const RunConfig& cfg) {
  require(cfg.items, "--items");
  require(cfg.units, "--units");
  require(cfg.codebook, "--codebook");
  require(cfg.out, "--out");
  const auto items = load_items(cfg.items);
  const auto units = load_units(cfg.units);
  const auto cb = load_codebook(cfg.codebook);
  const auto report =
      same_different_ap(items, units, cb, cfg.dtw, cfg.samediff, cfg.per_frame);
  json out;
  out["ap"] = report.ap;
  out["n_pairs"] = report.n_pairs;
  out["n_ties"] = report.n_ties;
  out["pr_curve"] = json::array();
  for (const auto& [recall, precision] : report.pr_curve) {
    out["pr_curve"].push_back({recall, precision});
  }
  write_report(cfg.out, out);
}

void run_ulm_train(const RunConfig& cfg) {
  require(cfg.units, "--units");
  require(cfg.out, "--out");
  if (cfg.kmeans.k < 1) throw Error(ErrorCategory::BadArgument, "missing --k");
  const auto units = load_units(cfg.units);
  const auto model = NgramModel::train(units, cfg.kmeans.k, cfg.ngram, cfg.units);
  model.save(cfg.out);
  json report;
  report["order"] = model.order();
  report["K"] = model.vocab_size();
  report["discount"] = model.discount();
  report["n_sequences"] = units.size();
  write_report(cfg.out + ".report.json", report);
}

void run_ulm_score_pairs(const RunConfig& cfg, const std::optional<std::string>& per_pair) {
  require(cfg.model, "--model");
  require(cfg.pairs, "--pairs");
  require(cfg.units, "--units");
  require(cfg.out, "--out");
  const auto model = NgramModel::load(cfg.model);
  const auto pairs = load_pairs(cfg.pairs);
  const auto units = load_units(cfg.units);
  const auto report = discriminate_pairs(model, pairs, units, cfg.normalization);
  json out;
  out["accuracy"] = report.accuracy;
  out["n_pairs"] = report.n_pairs;
  out["n_ties"] = report.n_ties;
  write_report(cfg.out, out);
  if (per_pair) {
    std::string tsv = "pair_id\tscore_real\tscore_fake\toutcome\n";
    for (const auto& p : report.pairs) {
      const char* outcome = p.outcome == PairOutcome::real_wins   ? "real-wins"
                            : p.outcome == PairOutcome::fake_wins ? "fake-wins"
                                                                  : "tie";
      tsv += p.pair_id + "\t" + format_double(p.score_real) + "\t" +
             format_double(p.score_fake) + "\t" + outcome + "\n";
    }
    write_text(*per_pair, tsv);
  }
}

void run_grid(const RunConfig& cfg, const std::string& codebooks_arg) {
  require(cfg.items, "--items");
  require(cfg.out, "--out");
  if (codebooks_arg.empty()) {
    throw Error(ErrorCategory::BadArgument, "missing --codebooks (comma-separated paths)");
  }
  std::vector<std::string> codebook_paths;
  std::size_t start = 0;
  while (start <= codebooks_arg.size()) {
    std::size_t comma = codebooks_arg.find(',', start);
    if (comma == std::string::npos) comma = codebooks_arg.size();
    if (comma > start) codebook_paths.push_back(codebooks_arg.substr(start, comma - start));
    start = comma + 1;
  }
  if (codebook_paths.empty()) {
    throw Error(ErrorCategory::BadArgument, "no codebooks given");
  }

  const auto corpus = load_manifest_corpus(cfg);
  const auto items = load_items(cfg.items);

  std::string tsv = "K\tlambda\tbitrate\tabx_error\tap\n";
  for (const auto& cb_path : codebook_paths) {
    const auto cb = load_codebook(cb_path);
    log_info("grid: codebook " + cb_path + " (K=" + std::to_string(cb.size) + ")");
    const auto points = sweep(corpus, cb, cfg.points, cfg.rate_kind, cfg.rate_tol,
                              cfg.max_evals, cfg.dpdp.prune_fraction);
    for (const auto& point : points) {
      DpdpConfig dp;
      dp.lambda = point.lambda;
      dp.prune_fraction = cfg.dpdp.prune_fraction;
      const auto results = encode_corpus(corpus, cb, dp);
      std::vector<EncodedUtterance> encoded;
      encoded.reserve(results.size());
      for (const auto& r : results) encoded.push_back(r.encoded);

      const auto abx = abx_score(items, encoded, cb, cfg.dtw, cfg.per_frame);
      const auto sd =
          same_different_ap(items, encoded, cb, cfg.dtw, cfg.samediff, cfg.per_frame);
      tsv += std::to_string(cb.size) + "\t" + format_double(point.lambda) + "\t" +
             format_double(rate_of(point.report, cfg.rate_kind)) + "\t" +
             format_double(abx.error) + "\t" + format_double(sd.ap) + "\n";
    }
  }
  write_text(cfg.out, tsv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Duration-penalized discrete speech unit pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Flags f;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", f.config, "JSON run configuration");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--threads", f.threads, "worker pool cap (0 = all cores)");
    cmd->add_option("--out", f.out, "output path");
  };

  auto* train_kmeans = app.add_subcommand("train-kmeans", "train a K-means codebook");
  add_common(train_kmeans);
  train_kmeans->add_option("--manifest", f.manifest, "corpus manifest");
  train_kmeans->add_option("--features-dir", f.features_dir, "base dir for feature paths");
  train_kmeans->add_option("--k", f.k, "codebook size");
  train_kmeans->add_option("--max-iters", f.max_iters, "Lloyd iterations");
  train_kmeans->add_option("--restarts", f.n_restarts, "number of restarts");
  train_kmeans->add_option("--sample-fraction", f.sample_fraction, "fraction of frames");
  train_kmeans->add_option("--convergence-tol", f.convergence_tol, "relative tolerance");

  auto* encode = app.add_subcommand("encode", "encode a corpus into units");
  add_common(encode);
  encode->add_option("--manifest", f.manifest, "corpus manifest");
  encode->add_option("--features-dir", f.features_dir, "base dir for feature paths");
  encode->add_option("--codebook", f.codebook, "codebook file");
  encode->add_option("--lambda", f.lambda, "duration reward");
  encode->add_option("--prune-frac", f.prune_frac, "candidate fraction in (0,1]");

  auto* bitrate_cmd = app.add_subcommand("bitrate", "bitrate of a units file");
  add_common(bitrate_cmd);
  bitrate_cmd->add_option("--units", f.units, "units file");
  bitrate_cmd->add_option("--k", f.k, "codebook size");

  auto* calibrate = app.add_subcommand("calibrate", "find lambda for a target bitrate");
  add_common(calibrate);
  calibrate->add_option("--manifest", f.manifest, "corpus manifest");
  calibrate->add_option("--features-dir", f.features_dir, "base dir for feature paths");
  calibrate->add_option("--codebook", f.codebook, "codebook file");
  calibrate->add_option("--target-bitrate", f.target_bitrate, "bits per second");
  calibrate->add_option("--rate-kind", f.rate_kind, "fixed|entropy");
  calibrate->add_option("--tol", f.tol, "relative tolerance");
  calibrate->add_option("--max-evals", f.max_evals, "encoding probes");
  calibrate->add_option("--prune-frac", f.prune_frac, "candidate fraction");

  auto* sweep_cmd = app.add_subcommand("sweep", "bitrate sweep from full to half rate");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--manifest", f.manifest, "corpus manifest");
  sweep_cmd->add_option("--features-dir", f.features_dir, "base dir for feature paths");
  sweep_cmd->add_option("--codebook", f.codebook, "codebook file");
  sweep_cmd->add_option("--points", f.points, "number of sweep points");
  sweep_cmd->add_option("--rate-kind", f.rate_kind, "fixed|entropy");
  sweep_cmd->add_option("--tol", f.tol, "relative tolerance");
  sweep_cmd->add_option("--max-evals", f.max_evals, "encoding probes per point");
  sweep_cmd->add_option("--prune-frac", f.prune_frac, "candidate fraction");

  auto* eval = app.add_subcommand("eval", "discrimination evaluations");
  eval->require_subcommand(1);
  auto* abx = eval->add_subcommand("abx", "any-context within-speaker ABX");
  add_common(abx);
  abx->add_option("--items", f.items, "item list TSV");
  abx->add_option("--units", f.units, "units file");
  abx->add_option("--codebook", f.codebook, "codebook file");
  abx->add_option("--local-distance", f.local_distance,
                  "angular|squared-euclidean|code-mismatch");
  abx->add_flag("--per-frame", f.per_frame, "use per-frame centroid steps");

  auto* same_diff = eval->add_subcommand("same-diff", "same-different word discrimination");
  add_common(same_diff);
  same_diff->add_option("--items", f.items, "item list TSV");
  same_diff->add_option("--units", f.units, "units file");
  same_diff->add_option("--codebook", f.codebook, "codebook file");
  same_diff->add_option("--local-distance", f.local_distance,
                        "angular|squared-euclidean|code-mismatch");
  same_diff->add_flag("--per-frame", f.per_frame, "use per-frame centroid steps");
  same_diff->add_option("--pairing", f.pairing, "all-pairs|across-speaker-only");

  auto* ulm = app.add_subcommand("ulm", "unit language model");
  ulm->require_subcommand(1);
  auto* ulm_train = ulm->add_subcommand("train", "train an n-gram unit LM");
  add_common(ulm_train);
  ulm_train->add_option("--units", f.units, "units file");
  ulm_train->add_option("--k", f.k, "unit vocabulary size");
  ulm_train->add_option("--order", f.order, "n-gram order");
  ulm_train->add_option("--discount", f.discount, "absolute discount in (0,1)");

  auto* ulm_score = ulm->add_subcommand("score-pairs", "pair discrimination accuracy");
  add_common(ulm_score);
  ulm_score->add_option("--model", f.model, "model file");
  ulm_score->add_option("--pairs", f.pairs, "pairs TSV");
  ulm_score->add_option("--units", f.units, "units file with real/fake sequences");
  ulm_score->add_option("--normalization", f.normalization, "sum|per-token");
  ulm_score->add_option("--per-pair", f.per_pair, "optional per-pair TSV output");

  auto* grid = app.add_subcommand("grid", "sweep + evaluate per codebook");
  add_common(grid);
  grid->add_option("--manifest", f.manifest, "corpus manifest");
  grid->add_option("--features-dir", f.features_dir, "base dir for feature paths");
  grid->add_option("--codebooks", f.codebooks, "comma-separated codebook files");
  grid->add_option("--items", f.items, "item list TSV");
  grid->add_option("--points", f.points, "sweep points per codebook");
  grid->add_option("--rate-kind", f.rate_kind, "fixed|entropy");
  grid->add_option("--tol", f.tol, "relative tolerance");
  grid->add_option("--max-evals", f.max_evals, "encoding probes per point");
  grid->add_option("--prune-frac", f.prune_frac, "candidate fraction");
  grid->add_option("--local-distance", f.local_distance,
                   "angular|squared-euclidean|code-mismatch");
  grid->add_flag("--per-frame", f.per_frame, "use per-frame centroid steps");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = effective_config(f);
    set_worker_threads(cfg.threads);

    std::string name;
    if (train_kmeans->parsed()) {
      name = "train-kmeans";
      run_train_kmeans(cfg);
    } else if (encode->parsed()) {
      name = "encode";
      run_encode(cfg);
    } else if (bitrate_cmd->parsed()) {
      name = "bitrate";
      run_bitrate(cfg);
    } else if (calibrate->parsed()) {
      name = "calibrate";
      run_calibrate(cfg);
    } else if (sweep_cmd->parsed()) {
      name = "sweep";
      run_sweep(cfg);
    } else if (eval->parsed() && abx->parsed()) {
      name = "eval abx";
      run_eval_abx(cfg);
    } else if (eval->parsed() && same_diff->parsed()) {
      name = "eval same-diff";
      run_eval_same_diff(cfg);
    } else if (ulm->parsed() && ulm_train->parsed()) {
      name = "ulm train";
      run_ulm_train(cfg);
    } else if (ulm->parsed() && ulm_score->parsed()) {
      name = "ulm score-pairs";
      run_ulm_score_pairs(cfg, f.per_pair);
    } else if (grid->parsed()) {
      name = "grid";
      run_grid(cfg, f.codebooks.value_or(""));
    }
    write_run_manifest(name, cfg);
  } catch (const Error& e) {
    json err;
    err["error"] = {{"category", std::string(to_string(e.category()))},
                    {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"category", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  return 0;
}
