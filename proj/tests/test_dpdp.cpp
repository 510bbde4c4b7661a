#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "dpslm/dpdp.hpp"
#include "dpslm/io.hpp"
#include "dpslm/kmeans.hpp"
#include "dpslm/parallel.hpp"
#include "dpslm/rng.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace dpslm;
using testsupport::brute_force_dpdp;

TEST_CASE("dpdp: hand example, lambda 0 and 0.5") {
  const auto seq = testsupport::sequence_1d({0.0f, 0.6f, 0.0f});
  const auto cb = testsupport::codebook_1d({0.0f, 1.0f});

  DpdpConfig cfg;
  cfg.prune_fraction = 1.0;

  SUBCASE("lambda=0 follows the nearest codes") {
    const auto brute = brute_force_dpdp(seq, cb, 0.0);
    CHECK(brute.objective == doctest::Approx(0.16).epsilon(1e-6));
    CHECK(brute.codes == std::vector<std::int32_t>{0, 1, 0});

    const auto result = dpdp_encode(seq, cb, cfg);
    CHECK(result.encoded.frame_codes == std::vector<std::int32_t>{0, 1, 0});
    CHECK(result.encoded.units == std::vector<std::int32_t>{0, 1, 0});
    CHECK(result.objective_value == doctest::Approx(0.16).epsilon(1e-6));
    CHECK(!result.pruned);
  }
  SUBCASE("lambda=0.5 collapses to one unit") {
    const auto brute = brute_force_dpdp(seq, cb, 0.5);
    CHECK(brute.objective == doctest::Approx(-0.64).epsilon(1e-6));
    CHECK(brute.codes == std::vector<std::int32_t>{0, 0, 0});

    cfg.lambda = 0.5;
    const auto result = dpdp_encode(seq, cb, cfg);
    CHECK(result.encoded.frame_codes == std::vector<std::int32_t>{0, 0, 0});
    CHECK(result.encoded.units == std::vector<std::int32_t>{0});
    CHECK(result.encoded.durations == std::vector<std::int32_t>{3});
    CHECK(result.objective_value == doctest::Approx(-0.64).epsilon(1e-6));
  }
}

TEST_CASE("dpdp: optimality oracle on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t t = 1 + rng.uniform_index(6);
    const std::size_t k = 1 + rng.uniform_index(4);
    const std::size_t d = 1 + rng.uniform_index(3);
    const double lambda = rng.uniform(0.0, 2.0);
    const auto cb = testsupport::random_codebook(rng, k, d);
    const auto seq = testsupport::random_sequence(rng, t, d);

    DpdpConfig cfg;
    cfg.lambda = lambda;
    cfg.prune_fraction = 1.0;
    const auto result = dpdp_encode(seq, cb, cfg);
    const auto brute = brute_force_dpdp(seq, cb, lambda);

    const double scale = std::max(1.0, std::abs(brute.objective));
    CHECK(std::abs(result.objective_value - brute.objective) <= 1e-9 * scale);
    // The returned assignment attains the DP's claimed objective.
    const double recomputed =
        assignment_objective(seq, cb, result.encoded.frame_codes, lambda);
    CHECK(std::abs(recomputed - result.objective_value) <= 1e-9 * scale);
  }
}

TEST_CASE("dpdp: lambda=0 with full search equals assign_nearest") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(4);
    const auto cb = testsupport::random_codebook(rng, 2 + rng.uniform_index(8), d);
    const auto seq = testsupport::random_sequence(rng, 1 + rng.uniform_index(40), d);
    DpdpConfig cfg;
    cfg.prune_fraction = 1.0;
    const auto result = dpdp_encode(seq, cb, cfg);
    CHECK(result.encoded.frame_codes == assign_nearest(seq, cb));
  }
}

TEST_CASE("dpdp: unit count is non-increasing in lambda") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto cb = testsupport::random_codebook(rng, 6, 2);
    const auto seq = testsupport::smooth_sequence(rng, 60, 2);
    DpdpConfig cfg;
    cfg.prune_fraction = 1.0;
    std::size_t prev_units = SIZE_MAX;
    for (double lambda : {0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0}) {
      cfg.lambda = lambda;
      const auto result = dpdp_encode(seq, cb, cfg);
      CHECK(result.encoded.units.size() <= prev_units);
      prev_units = result.encoded.units.size();
    }
  }
}

TEST_CASE("dpdp: pruning is sound and prune=1 matches full search") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const auto cb = testsupport::random_codebook(rng, 20, 3);
    const auto seq = testsupport::smooth_sequence(rng, 40, 3);
    DpdpConfig full;
    full.lambda = 0.4;
    full.prune_fraction = 1.0;
    DpdpConfig pruned = full;
    pruned.prune_fraction = 0.1;  // 2 of 20 candidates

    const auto r_full = dpdp_encode(seq, cb, full);
    const auto r_pruned = dpdp_encode(seq, cb, pruned);
    CHECK(r_pruned.pruned);
    CHECK(r_pruned.objective_value >= r_full.objective_value - 1e-12);

    // Restricting to the full candidate set must reproduce full search exactly.
    DpdpConfig also_full = full;
    also_full.prune_fraction = 0.999;  // still ceil = 20
    const auto r_again = dpdp_encode(seq, cb, also_full);
    CHECK(r_again.encoded.frame_codes == r_full.encoded.frame_codes);
    CHECK(r_again.objective_value == r_full.objective_value);
  }
}

TEST_CASE("dpdp: candidate restriction is honored when pruning") {
  Rng rng(13);
  const auto cb = testsupport::random_codebook(rng, 10, 2);
  const auto seq = testsupport::random_sequence(rng, 30, 2);
  DpdpConfig cfg;
  cfg.lambda = 1.0;
  cfg.prune_fraction = 0.3;  // 3 candidates per frame
  const auto result = dpdp_encode(seq, cb, cfg);
  for (std::size_t t = 0; t < seq.num_frames; ++t) {
    const auto top = top_m_candidates(seq.frame(t), cb, 3);
    CHECK(std::find(top.begin(), top.end(), result.encoded.frame_codes[t]) != top.end());
  }
}

TEST_CASE("deduplicate: run-length encoding") {
  CHECK(deduplicate(std::vector<std::int32_t>{5, 5, 5}) ==
        std::pair(std::vector<std::int32_t>{5}, std::vector<std::int32_t>{3}));
  CHECK(deduplicate(std::vector<std::int32_t>{0, 1, 0}) ==
        std::pair(std::vector<std::int32_t>{0, 1, 0}, std::vector<std::int32_t>{1, 1, 1}));
  CHECK(deduplicate(std::vector<std::int32_t>{7, 7, 2, 2, 2, 7}) ==
        std::pair(std::vector<std::int32_t>{7, 2, 7}, std::vector<std::int32_t>{2, 3, 1}));
  CHECK_THROWS_AS(deduplicate(std::vector<std::int32_t>{}), Error);

  SUBCASE("expansion inverts deduplication") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::int32_t> codes(1 + rng.uniform_index(30));
      for (auto& c : codes) c = static_cast<std::int32_t>(rng.uniform_index(4));
      const auto [units, durations] = deduplicate(codes);
      CHECK(expand_units(units, durations) == codes);
      for (std::size_t i = 1; i < units.size(); ++i) CHECK(units[i] != units[i - 1]);
    }
  }
}

TEST_CASE("encode_corpus: summary, order, and failure attribution") {
  Rng rng(8);
  std::vector<FeatureSequence> corpus = {
      testsupport::smooth_sequence(rng, 50, 2, "first"),
      testsupport::smooth_sequence(rng, 30, 2, "second"),
  };
  const auto cb = testsupport::random_codebook(rng, 5, 2);

  SUBCASE("lambda=0 summary equals assign_nearest + deduplicate") {
    DpdpConfig cfg;
    cfg.prune_fraction = 1.0;
    const auto results = encode_corpus(corpus, cb, cfg);
    REQUIRE(results.size() == 2);
    CHECK(results[0].encoded.utt_id == "first");
    CHECK(results[1].encoded.utt_id == "second");

    std::int64_t expected_units = 0;
    for (const auto& seq : corpus) {
      const auto codes = assign_nearest(seq, cb);
      expected_units += static_cast<std::int64_t>(deduplicate(codes).first.size());
    }
    const auto summary = summarize(results);
    CHECK(summary.total_units == expected_units);
    CHECK(summary.total_frames == 80);
    CHECK(summary.total_seconds == doctest::Approx(80.0 / 50.0));
    CHECK(summary.units_per_sec ==
          doctest::Approx(static_cast<double>(expected_units) / (80.0 / 50.0)));
  }
  SUBCASE("huge lambda collapses every utterance to one unit") {
    DpdpConfig cfg;
    cfg.prune_fraction = 1.0;
    cfg.lambda = 1e7;
    const auto results = encode_corpus(corpus, cb, cfg);
    for (const auto& r : results) CHECK(r.encoded.units.size() == 1);
    CHECK(summarize(results).total_units == 2);
  }
  SUBCASE("collapse is brute-force optimal on tiny inputs") {
    // lambda above the quantization-cost spread makes one run optimal.
    Rng rng(91);
    for (int trial = 0; trial < 10; ++trial) {
      const auto tiny_cb = testsupport::random_codebook(rng, 2, 1);
      const auto tiny = testsupport::random_sequence(rng, 4, 1);
      DpdpConfig cfg;
      cfg.prune_fraction = 1.0;
      cfg.lambda = 50.0;
      const auto result = dpdp_encode(tiny, tiny_cb, cfg);
      const auto brute = brute_force_dpdp(tiny, tiny_cb, cfg.lambda);
      CHECK(result.encoded.units.size() == 1);
      CHECK(result.encoded.frame_codes == brute.codes);
      CHECK(result.objective_value ==
            doctest::Approx(brute.objective).epsilon(1e-12));
    }
  }
  SUBCASE("empty corpus") {
    CHECK_THROWS_WITH_AS(encode_corpus({}, cb, DpdpConfig{}),
                         doctest::Contains("empty corpus"), Error);
  }
  SUBCASE("manifest-driven failure names the utterance") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "dpslm_encode_test";
    fs::create_directories(dir);
    store_features(corpus[0], dir / "first.dpft");
    CorpusManifest manifest;
    manifest.utterances = {{"first", "first.dpft", ""}, {"second", "missing.dpft", ""}};
    CHECK_THROWS_WITH_AS(
        encode_corpus_to_file(manifest, dir, cb, DpdpConfig{}, dir / "units.jsonl"),
        doctest::Contains("second"), Error);
  }
}

TEST_CASE("dpdp: self-consistency of the reported objective") {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cb = testsupport::random_codebook(rng, 8, 3);
    const auto seq = testsupport::smooth_sequence(rng, 35, 3);
    DpdpConfig cfg;
    cfg.lambda = rng.uniform(0.0, 3.0);
    cfg.prune_fraction = trial % 2 == 0 ? 1.0 : 0.25;
    const auto result = dpdp_encode(seq, cb, cfg);
    const double recomputed =
        assignment_objective(seq, cb, result.encoded.frame_codes, cfg.lambda);
    const double scale = std::max(1.0, std::abs(recomputed));
    CHECK(std::abs(result.objective_value - recomputed) <= 1e-9 * scale);
  }
}

TEST_CASE("dpdp: outputs are identical across worker counts") {
  Rng rng(66);
  auto corpus = testsupport::smooth_corpus(66, 6, 40, 3);
  const auto cb = testsupport::random_codebook(rng, 12, 3);
  DpdpConfig cfg;
  cfg.lambda = 0.7;
  cfg.prune_fraction = 0.5;

  set_worker_threads(1);
  const auto single = encode_corpus(corpus, cb, cfg);
  set_worker_threads(4);
  const auto multi = encode_corpus(corpus, cb, cfg);
  set_worker_threads(0);

  REQUIRE(single.size() == multi.size());
  for (std::size_t i = 0; i < single.size(); ++i) {
    CHECK(single[i].encoded.frame_codes == multi[i].encoded.frame_codes);
    CHECK(single[i].objective_value == multi[i].objective_value);
  }
}
