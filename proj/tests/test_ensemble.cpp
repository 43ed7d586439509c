#include <doctest.h>

#include <random>

#include "stereoconf/ensemble.hpp"
#include "stereoconf/errors.hpp"
#include "test_util.hpp"

using namespace stereoconf;
using namespace stereoconf::testing;
using ensemble::conf_guided_ensemble;

TEST_SUITE("ensemble") {

TEST_CASE("hand-ranked example") {
  DisparityMap primary(4, 1, {1, 2, 3, 4});
  DisparityMap baseline(4, 1, {10, 20, 30, 40});
  ConfidenceMap conf(4, 1, {0.9, 0.1, 0.5, 0.7});
  const auto out = conf_guided_ensemble(primary, conf, baseline, {0.5});
  CHECK(out == DisparityMap(4, 1, {1, 20, 30, 4}));
}

TEST_CASE("fraction endpoints") {
  std::mt19937_64 rng(1);
  auto primary = random_disparity(rng, 7, 5);
  primary.invalidate(3);
  const auto baseline = random_disparity(rng, 7, 5);
  const auto conf = random_confidence(rng, 7, 5);
  CHECK(conf_guided_ensemble(primary, conf, baseline, {0.0}) == primary);
  const auto all = conf_guided_ensemble(primary, conf, baseline, {1.0});
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (primary.valid(i)) {
      CHECK(all.value(i) == baseline.value(i));
    } else {
      CHECK_FALSE(all.valid(i));
    }
  }
}

TEST_CASE("default replaces floor(15%) of valid pixels") {
  std::mt19937_64 rng(2);
  const auto primary = random_disparity(rng, 10, 7);  // 70 pixels -> 10.5 -> 10
  const auto baseline = random_disparity(rng, 10, 7, 100.0, 200.0);
  const auto out = conf_guided_ensemble(primary, random_confidence(rng, 10, 7), baseline);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < out.size(); ++i) changed += out.value(i) != primary.value(i);
  CHECK(changed == 10);
}

TEST_CASE("ties resolve by row-major index") {
  DisparityMap primary(3, 1, {1, 2, 3});
  DisparityMap baseline(3, 1, {-1, -2, -3});
  const auto out = conf_guided_ensemble(primary, ConfidenceMap::constant(3, 1, 0.5), baseline, {0.34});
  CHECK(out == DisparityMap(3, 1, {-1, 2, 3}));
}

TEST_CASE("selection, count, idempotence and identity properties") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uq(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto primary = random_disparity(rng, 9, 6);
    if (trial % 3 == 0) primary.invalidate(trial % primary.size());
    const auto baseline = random_disparity(rng, 9, 6, 100.0, 200.0);
    const auto conf = random_confidence(rng, 9, 6);
    const double q = uq(rng);
    const auto once = conf_guided_ensemble(primary, conf, baseline, {q});

    std::size_t changed = 0;
    for (std::size_t i = 0; i < once.size(); ++i) {
      CHECK((once.value(i) == primary.value(i) || once.value(i) == baseline.value(i)));
      CHECK(once.valid(i) == primary.valid(i));
      changed += once.value(i) != primary.value(i);
    }
    const auto n_valid = static_cast<double>(primary.count_valid());
    CHECK(changed == static_cast<std::size_t>(std::floor(q * n_valid + 1e-9)));
    CHECK(conf_guided_ensemble(once, conf, baseline, {q}) == once);
    CHECK(conf_guided_ensemble(primary, conf, primary, {q}) == primary);
  }
}

TEST_CASE("errors") {
  DisparityMap a(2, 2);
  const auto conf = ConfidenceMap::constant(2, 2, 0.5);
  CHECK_THROWS_AS(conf_guided_ensemble(a, conf, DisparityMap(4, 1)), DimensionError);
  CHECK_THROWS_AS(conf_guided_ensemble(a, ConfidenceMap::constant(1, 4, 0.5), a), DimensionError);
  CHECK_THROWS_AS(conf_guided_ensemble(a, conf, a, {1.5}), DomainError);
  DisparityMap holes(2, 2, {0, 0, 0, 0}, {1, 0, 1, 1});
  CHECK_THROWS_AS(conf_guided_ensemble(a, conf, holes), DomainError);
}

}  // TEST_SUITE
