#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dpslm/rate.hpp"
#include "dpslm/rng.hpp"
#include "support/synthetic.hpp"

using namespace dpslm;

namespace {

EncodedUtterance make_encoded(std::string utt_id, std::vector<std::int32_t> units,
                              std::vector<std::int32_t> durations, double rate = 50.0) {
  EncodedUtterance enc;
  enc.utt_id = std::move(utt_id);
  enc.units = std::move(units);
  enc.durations = std::move(durations);
  for (std::int32_t d : enc.durations) enc.total_frames += d;
  enc.frame_codes = expand_units(enc.units, enc.durations);
  enc.frame_rate_hz = rate;
  return enc;
}

}  // namespace

TEST_CASE("bitrate: hand arithmetic") {
  SUBCASE("one unit over one second at K=2 is 1 bit/s") {
    const std::vector<EncodedUtterance> units = {make_encoded("u", {0}, {50})};
    const auto rep = bitrate(units, 2);
    CHECK(rep.units_per_sec == doctest::Approx(1.0));
    CHECK(rep.bits_per_sec_fixed == doctest::Approx(1.0));
    CHECK(rep.total_units == 1);
    CHECK(rep.total_seconds == doctest::Approx(1.0));
  }
  SUBCASE("[0,1,0] over 3 frames at 50 Hz") {
    const std::vector<EncodedUtterance> units = {make_encoded("u", {0, 1, 0}, {1, 1, 1})};
    const auto rep = bitrate(units, 2);
    CHECK(rep.units_per_sec == doctest::Approx(50.0));
    CHECK(rep.bits_per_sec_fixed == doctest::Approx(50.0));
  }
  SUBCASE("single repeated code has zero entropy rate") {
    const std::vector<EncodedUtterance> units = {make_encoded("a", {3}, {25}),
                                                 make_encoded("b", {3}, {25})};
    const auto rep = bitrate(units, 4);
    CHECK(rep.bits_per_sec_entropy == 0.0);
    CHECK(rep.bits_per_sec_fixed > 0.0);
  }
  SUBCASE("unit id at or above K is rejected") {
    const std::vector<EncodedUtterance> units = {make_encoded("u", {2}, {10})};
    CHECK_THROWS_AS(bitrate(units, 2), Error);
  }
  SUBCASE("empty corpus is rejected") {
    CHECK_THROWS_AS(bitrate(std::vector<EncodedUtterance>{}, 2), Error);
  }
}

TEST_CASE("bitrate: entropy rate never exceeds the fixed rate") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(10);
    std::vector<EncodedUtterance> corpus;
    for (int u = 0; u < 5; ++u) {
      std::vector<std::int32_t> units;
      std::vector<std::int32_t> durations;
      std::int32_t prev = -1;
      const std::size_t n = 1 + rng.uniform_index(12);
      for (std::size_t i = 0; i < n; ++i) {
        std::int32_t c;
        do {
          c = static_cast<std::int32_t>(rng.uniform_index(k));
        } while (c == prev);
        prev = c;
        units.push_back(c);
        durations.push_back(static_cast<std::int32_t>(1 + rng.uniform_index(3)));
      }
      corpus.push_back(make_encoded("u" + std::to_string(u), units, durations));
    }
    const auto rep = bitrate(corpus, k);
    CHECK(rep.bits_per_sec_entropy <= rep.bits_per_sec_fixed + 1e-9);
    CHECK(rep.bits_per_sec_fixed ==
          doctest::Approx(rep.units_per_sec * std::log2(static_cast<double>(k))));

    // Permuting code labels leaves the entropy rate unchanged.
    std::vector<std::int32_t> perm(k);
    for (std::size_t i = 0; i < k; ++i) perm[i] = static_cast<std::int32_t>(i);
    for (std::size_t i = k; i > 1; --i) {
      std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    }
    auto permuted = corpus;
    for (auto& enc : permuted) {
      for (auto& u : enc.units) u = perm[static_cast<std::size_t>(u)];
      enc.frame_codes = expand_units(enc.units, enc.durations);
      // Relabeling can create consecutive duplicates only if perm is not a
      // bijection; it is, so the invariant still holds.
    }
    const auto rep2 = bitrate(permuted, k);
    CHECK(rep2.bits_per_sec_entropy == doctest::Approx(rep.bits_per_sec_entropy));
  }
}

TEST_CASE("calibrate_lambda: endpoints and unreachable targets") {
  auto corpus = testsupport::smooth_corpus(42, 8, 80, 3);
  Rng rng(42);
  const auto cb = testsupport::random_codebook(rng, 8, 3);

  DpdpConfig zero;
  zero.prune_fraction = 1.0;
  const auto at_zero = encode_corpus(corpus, cb, zero);
  std::vector<EncodedUtterance> encoded;
  for (const auto& r : at_zero) encoded.push_back(r.encoded);
  const auto b0 = bitrate(encoded, cb.size);

  SUBCASE("target equal to the lambda=0 bitrate returns lambda=0") {
    const auto cal = calibrate_lambda(corpus, cb, b0.bits_per_sec_fixed, RateKind::fixed,
                                      0.02, 40, 1.0);
    CHECK(cal.lambda == 0.0);
    CHECK(cal.converged);
  }
  SUBCASE("half the full bitrate is reached within tolerance") {
    const double target = 0.5 * b0.bits_per_sec_fixed;
    const auto cal = calibrate_lambda(corpus, cb, target, RateKind::fixed, 0.02, 60, 1.0);
    CHECK(cal.converged);
    CHECK(std::abs(cal.achieved.bits_per_sec_fixed - target) <= 0.02 * target);

    // Re-encoding at the returned lambda reproduces the achieved bitrate.
    DpdpConfig cfg;
    cfg.lambda = cal.lambda;
    cfg.prune_fraction = 1.0;
    const auto re = encode_corpus(corpus, cb, cfg);
    std::vector<EncodedUtterance> re_encoded;
    for (const auto& r : re) re_encoded.push_back(r.encoded);
    const auto re_rep = bitrate(re_encoded, cb.size);
    CHECK(re_rep.bits_per_sec_fixed == doctest::Approx(cal.achieved.bits_per_sec_fixed));
  }
  SUBCASE("ten times the full bitrate is unreachable") {
    try {
      calibrate_lambda(corpus, cb, 10.0 * b0.bits_per_sec_fixed, RateKind::fixed, 0.02,
                       40, 1.0);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::Unreachable);
    }
  }
  SUBCASE("nonpositive target is rejected") {
    CHECK_THROWS_AS(calibrate_lambda(corpus, cb, 0.0, RateKind::fixed, 0.02, 40, 1.0),
                    Error);
  }
}

TEST_CASE("sweep: endpoints, monotonicity, and errors") {
  auto corpus = testsupport::smooth_corpus(4242, 10, 80, 3);
  Rng rng(4242);
  const auto cb = testsupport::random_codebook(rng, 8, 3);

  SUBCASE("a single point is the lambda=0 bitrate") {
    const auto points = sweep(corpus, cb, 1, RateKind::fixed, 0.02, 40, 1.0);
    REQUIRE(points.size() == 1);
    CHECK(points[0].lambda == 0.0);
  }
  SUBCASE("six points descend to about half the full rate") {
    const auto points = sweep(corpus, cb, 6, RateKind::fixed, 0.02, 60, 1.0);
    REQUIRE(points.size() == 6);
    CHECK(points[0].lambda == 0.0);
    for (std::size_t i = 1; i < points.size(); ++i) {
      CHECK(points[i].lambda >= points[i - 1].lambda);
      CHECK(points[i].report.units_per_sec <= points[i - 1].report.units_per_sec + 1e-9);
    }
    const double first = points.front().report.bits_per_sec_fixed;
    const double last = points.back().report.bits_per_sec_fixed;
    CHECK(last <= 0.55 * first);
    CHECK(last >= 0.45 * first);
  }
  SUBCASE("zero points is an error") {
    CHECK_THROWS_AS(sweep(corpus, cb, 0, RateKind::fixed, 0.02, 40, 1.0), Error);
  }
}
