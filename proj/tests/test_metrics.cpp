#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "stereoconf/errors.hpp"
#include "stereoconf/metrics.hpp"
#include "test_util.hpp"

using namespace stereoconf;
using namespace stereoconf::testing;

namespace {

// Brute-force AUC for densities i/20: sort the error indicator by
// confidence, count wrong pixels in each integer prefix ceil(i n / 20), and
// integrate with long double.
long double brute_force_auc(const DisparityMap& pred, const DisparityMap& gt,
                            const ConfidenceMap& conf, double theta) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred.valid(i) && gt.valid(i)) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) {
    if (conf.value(l) != conf.value(r)) return conf.value(l) > conf.value(r);
    return l < r;
  });
  const std::size_t n = idx.size();
  std::vector<long> prefix(n + 1, 0);
  for (std::size_t j = 0; j < n; ++j) {
    prefix[j + 1] = prefix[j] + (std::abs(pred.value(idx[j]) - gt.value(idx[j])) > theta);
  }
  std::vector<long double> rate(21);
  for (std::size_t i = 1; i <= 20; ++i) {
    const std::size_t taken = std::max<std::size_t>(1, (i * n + 19) / 20);
    rate[i] = static_cast<long double>(prefix[taken]) / static_cast<long double>(taken);
  }
  long double area = rate[1] / 20.0L;
  for (std::size_t i = 2; i <= 20; ++i) area += (rate[i] + rate[i - 1]) / 40.0L;
  return area;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("epe") {
  DisparityMap gt(2, 2, {1, 2, 3, 4});
  CHECK(metrics::epe(gt, gt) == 0.0);
  CHECK(metrics::epe(DisparityMap(2, 2, {3.5, 4.5, 5.5, 6.5}), gt) == doctest::Approx(2.5));

  DisparityMap pred(2, 2, {2, 4, 9, 100}, {1, 1, 1, 0});
  CHECK(metrics::epe(pred, gt) == doctest::Approx(3.0));

  CHECK_THROWS_AS(metrics::epe(DisparityMap(2, 1), DisparityMap(1, 2)), DimensionError);
  CHECK_THROWS_AS(metrics::epe(DisparityMap(1, 1, {0.0}, {0}), DisparityMap(1, 1)), DomainError);
}

TEST_CASE("error_rate uses strict inequality") {
  DisparityMap gt(4, 1, {0, 0, 0, 0});
  DisparityMap pred(4, 1, {0.5, 1.5, -3.5, 0.0});
  CHECK(metrics::error_rate(gt, gt, 1.0) == 0.0);
  CHECK(metrics::error_rate(pred, gt, 1.0) == 0.5);
  CHECK(metrics::error_rate(pred, gt, 3.0) == 0.25);
  CHECK(metrics::error_rate(pred, gt, 3.5) == 0.0);
  CHECK_THROWS_AS(metrics::error_rate(pred, gt, 0.0), DomainError);
}

TEST_CASE("sparsification with no errors is flat zero") {
  std::mt19937_64 rng(1);
  const auto gt = random_disparity(rng, 8, 8);
  const auto curve = metrics::sparsification(gt, gt, random_confidence(rng, 8, 8));
  REQUIRE(curve.points.size() == 20);
  for (const auto& p : curve.points) CHECK(p.error_rate == 0.0);
  CHECK(curve.points.back().density == 1.0);
}

TEST_CASE("sparsification with the wrong pixels ranked last") {
  DisparityMap gt(10, 1, std::vector<double>(10, 0.0));
  std::vector<double> err(10, 0.1);
  err[3] = 5.0;
  err[7] = 2.0;
  DisparityMap pred(10, 1, err);
  std::vector<double> c(10, 0.9);
  c[3] = 0.1;
  c[7] = 0.2;
  const auto curve = metrics::sparsification(pred, gt, ConfidenceMap(10, 1, c));
  for (const auto& p : curve.points) {
    const auto taken = static_cast<std::size_t>(std::ceil(p.density * 10.0 - 1e-9));
    const double expected = taken <= 8 ? 0.0 : static_cast<double>(taken - 8) / taken;
    CAPTURE(p.density);
    CHECK(p.error_rate == doctest::Approx(expected).epsilon(1e-15));
  }
  CHECK(curve.points[15].error_rate == 0.0);                      // d = 0.80 -> 8 taken
  CHECK(curve.points[15].density == doctest::Approx(0.80));
  CHECK(curve.points[16].error_rate == doctest::Approx(1.0 / 9.0));  // d = 0.85 -> 9 taken
  CHECK(curve.points[17].error_rate == doctest::Approx(1.0 / 9.0));  // d = 0.90 -> 9 taken
  CHECK(curve.points[19].error_rate == doctest::Approx(0.2));
}

TEST_CASE("sparsification under random confidence averages to the full-density rate") {
  std::mt19937_64 rng(2024);
  const std::size_t w = 20, h = 20, n = w * h;
  const auto gt = random_disparity(rng, w, h);
  const auto pred = perturbed(rng, gt, 0.3);
  const double eps = metrics::error_rate(pred, gt, 1.0);
  const auto densities = metrics::default_densities();
  std::vector<double> mean(densities.size(), 0.0);
  constexpr int kResamples = 1000;
  for (int s = 0; s < kResamples; ++s) {
    const auto curve = metrics::sparsification(pred, gt, random_confidence(rng, w, h));
    for (std::size_t j = 0; j < densities.size(); ++j) mean[j] += curve.points[j].error_rate;
  }
  for (std::size_t j = 0; j < densities.size(); ++j) {
    mean[j] /= kResamples;
    const double m = static_cast<double>(metrics::top_count(densities[j], n));
    // Hypergeometric variance of the wrong share in a sample of m from n.
    const double var = eps * (1.0 - eps) / m * (n - m) / (n - 1.0);
    const double se = std::sqrt(var / kResamples);
    CAPTURE(densities[j]);
    CHECK(std::abs(mean[j] - eps) <= 3.0 * se + 1e-12);  // summation round-off at d = 1
  }
}

TEST_CASE("sparsification input validation") {
  DisparityMap gt(2, 1, {0.0, 0.0});
  const auto conf = ConfidenceMap::constant(2, 1, 0.5);
  const std::vector<double> unsorted = {0.5, 0.25, 1.0};
  const std::vector<double> zero = {0.0, 1.0};
  const std::vector<double> over = {0.5, 1.5};
  const std::vector<double> short_end = {0.25, 0.5};
  CHECK_THROWS_AS(metrics::sparsification(gt, gt, conf, 1.0, unsorted), DomainError);
  CHECK_THROWS_AS(metrics::sparsification(gt, gt, conf, 1.0, zero), DomainError);
  CHECK_THROWS_AS(metrics::sparsification(gt, gt, conf, 1.0, over), DomainError);
  CHECK_THROWS_AS(metrics::sparsification(gt, gt, conf, 1.0, short_end), DomainError);
  CHECK_THROWS_AS(metrics::sparsification(gt, DisparityMap(2, 1, {0, 0}, {0, 0}), conf), DomainError);
  CHECK_THROWS_AS(metrics::sparsification(gt, gt, ConfidenceMap::constant(1, 2, 0.5)), DimensionError);
}

TEST_CASE("auc examples") {
  metrics::SparsificationCurve zero;
  for (double d : metrics::default_densities()) zero.points.push_back({d, 0.0});
  CHECK(metrics::auc(zero) == 0.0);

  metrics::SparsificationCurve flat;
  for (double d : metrics::default_densities()) flat.points.push_back({d, 0.137});
  CHECK(metrics::auc(flat) == doctest::Approx(0.137).epsilon(1e-14));

  metrics::SparsificationCurve two{{{0.5, 0.0}, {1.0, 0.2}}, 1.0};
  CHECK(metrics::auc(two) == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("auc_opt closed form") {
  CHECK(metrics::auc_opt(0.0) == 0.0);
  CHECK(metrics::auc_opt(1.0) == 1.0);
  CHECK(std::abs(metrics::auc_opt(0.1337) - 0.0094) <= 5e-4);
  CHECK(std::abs(metrics::auc_opt(0.1420) - 0.0106) <= 5e-4);
  CHECK(std::abs(metrics::auc_opt(0.4402) - 0.1154) <= 5e-4);
  CHECK(metrics::auc_opt(1.0 - 1e-12) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(metrics::auc_opt(-0.01), DomainError);
  CHECK_THROWS_AS(metrics::auc_opt(1.01), DomainError);
}

TEST_CASE("evaluate on a perfect prediction") {
  std::mt19937_64 rng(4);
  const auto gt = random_disparity(rng, 6, 5);
  const auto conf = random_confidence(rng, 6, 5);
  const auto r = metrics::evaluate(gt, gt, &conf);
  CHECK(r.epe == 0.0);
  CHECK(r.error_rates.size() == 3);
  for (const auto& [t, rate] : r.error_rates) CHECK(rate == 0.0);
  CHECK(*r.auc == 0.0);
  CHECK(*r.auc_opt == 0.0);
  CHECK(*r.ratio == 0.0);
  CHECK(r.n_valid == 30);

  const auto no_conf = metrics::evaluate(gt, gt, nullptr);
  CHECK_FALSE(no_conf.auc.has_value());
  CHECK_FALSE(no_conf.ratio.has_value());
}

TEST_CASE("ratio is auc_opt over auc") {
  CHECK(std::abs(0.0094 / 0.0588 - 0.1599) <= 5e-4);
  std::mt19937_64 rng(6);
  const auto gt = random_disparity(rng, 16, 16);
  const auto pred = perturbed(rng, gt, 0.25);
  const auto conf = random_confidence(rng, 16, 16);
  const auto r = metrics::evaluate(pred, gt, &conf);
  CHECK(*r.ratio == *r.auc_opt / *r.auc);
}

TEST_CASE("evaluate matches brute-force values on a random 16x16 instance") {
  std::mt19937_64 rng(7);
  auto gt = random_disparity(rng, 16, 16);
  gt.invalidate(5);
  gt.invalidate(77);
  const auto pred = perturbed(rng, gt, 0.2);
  const auto conf = random_confidence(rng, 16, 16);
  const auto r = metrics::evaluate(pred, gt, &conf, 1.0);

  double sum = 0.0;
  std::size_t n = 0, over1 = 0, over3 = 0, over5 = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid(i)) continue;
    const double e = std::abs(pred.value(i) - gt.value(i));
    sum += e;
    ++n;
    over1 += e > 1.0;
    over3 += e > 3.0;
    over5 += e > 5.0;
  }
  CHECK(r.n_valid == n);
  CHECK(r.epe == doctest::Approx(sum / n).epsilon(1e-14));
  CHECK(r.error_rates.at(1.0) == static_cast<double>(over1) / n);
  CHECK(r.error_rates.at(3.0) == static_cast<double>(over3) / n);
  CHECK(r.error_rates.at(5.0) == static_cast<double>(over5) / n);
  const double eps = static_cast<double>(over1) / n;
  CHECK(*r.auc_opt == doctest::Approx(eps + (1 - eps) * std::log(1 - eps)).epsilon(1e-14));
  CHECK(std::abs(*r.auc - static_cast<double>(brute_force_auc(pred, gt, conf, 1.0))) < 1e-12);
}

TEST_CASE("aggregate") {
  std::mt19937_64 rng(8);
  const auto gt = random_disparity(rng, 8, 8);
  const auto pred = perturbed(rng, gt, 0.3);
  const auto conf = random_confidence(rng, 8, 8);
  const auto single = metrics::evaluate(pred, gt, &conf);
  const double eps = metrics::error_rate(pred, gt, 1.0);
  const std::vector<metrics::EvalReport> one = {single};
  const std::vector<double> one_eps = {eps};
  const auto agg = metrics::aggregate(one, one_eps);
  CHECK(agg.epe == doctest::Approx(single.epe).epsilon(1e-15));
  CHECK(*agg.auc == *single.auc);
  CHECK(*agg.auc_opt == doctest::Approx(*single.auc_opt).epsilon(1e-15));
  CHECK(*agg.ratio == doctest::Approx(*single.ratio).epsilon(1e-15));
  CHECK(agg.n_valid == single.n_valid);
  for (const auto& [t, rate] : single.error_rates) CHECK(agg.error_rates.at(t) == doctest::Approx(rate));

  metrics::EvalReport a, b;
  a.n_valid = b.n_valid = 100;
  a.error_rates[1.0] = 0.1;
  b.error_rates[1.0] = 0.2;
  a.auc = 0.05;
  b.auc = 0.07;
  const std::vector<metrics::EvalReport> two = {a, b};
  const std::vector<double> two_eps = {0.1, 0.2};
  const auto pair = metrics::aggregate(two, two_eps);
  CHECK(*pair.auc_opt == doctest::Approx(metrics::auc_opt(0.15)).epsilon(1e-14));
  CHECK(*pair.auc == doctest::Approx(0.06));
  CHECK(pair.error_rates.at(1.0) == doctest::Approx(0.15));

  // Dataset-level epsilon reproduces the tabulated optimal AUC.
  const std::vector<double> ref_eps = {0.1337};
  const std::vector<metrics::EvalReport> refs = {a};
  CHECK(std::abs(*metrics::aggregate(refs, ref_eps).auc_opt - 0.0094) <= 5e-4);

  CHECK_THROWS_AS(metrics::aggregate({}, {}), DomainError);
  metrics::EvalReport c = b;
  c.error_rates = {{3.0, 0.1}};
  const std::vector<metrics::EvalReport> mixed = {a, c};
  CHECK_THROWS_AS(metrics::aggregate(mixed, two_eps), DomainError);
}

TEST_CASE("full density point equals the error rate") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = random_disparity(rng, 9, 7);
    const auto pred = perturbed(rng, gt, 0.4);
    for (double theta : {0.5, 1.0, 3.0}) {
      const auto curve = metrics::sparsification(pred, gt, random_confidence(rng, 9, 7), theta);
      CHECK(curve.points.back().error_rate == metrics::error_rate(pred, gt, theta));
    }
  }
}

TEST_CASE("oracle confidence minimizes AUC over every permutation") {
  std::mt19937_64 rng(10);
  for (std::size_t n = 1; n <= 8; ++n) {
    const auto gt = random_disparity(rng, n, 1);
    const auto pred = perturbed(rng, gt, 0.4);
    const double best = metrics::auc(metrics::sparsification(pred, gt, oracle_confidence(pred, gt)));
    std::vector<double> levels(n);
    for (std::size_t i = 0; i < n; ++i) levels[i] = (i + 1.0) / static_cast<double>(n);
    std::sort(levels.begin(), levels.end());
    std::size_t perms = 0;
    do {
      const double a = metrics::auc(metrics::sparsification(pred, gt, ConfidenceMap(n, 1, levels)));
      CHECK(best <= a + 1e-15);
      ++perms;
    } while (std::next_permutation(levels.begin(), levels.end()));
    CHECK(perms == static_cast<std::size_t>(std::tgamma(n + 1) + 0.5));
  }
}

TEST_CASE("optimal AUC is approached by the oracle ranking as the grid refines") {
  std::mt19937_64 rng(12);
  const auto gt = random_disparity(rng, 100, 100);
  const auto pred = perturbed(rng, gt, 0.3);
  const auto oracle = oracle_confidence(pred, gt);
  const double opt = metrics::auc_opt(metrics::error_rate(pred, gt, 1.0));

  std::vector<double> fine(1000);
  for (std::size_t i = 0; i < fine.size(); ++i) fine[i] = (i + 1) / 1000.0;
  const double coarse_auc = metrics::auc(metrics::sparsification(pred, gt, oracle));
  const double fine_auc = metrics::auc(metrics::sparsification(pred, gt, oracle, 1.0, fine));
  CHECK(opt <= coarse_auc + 1e-3);
  CHECK(opt <= fine_auc + 1e-4);
  CHECK(std::abs(fine_auc - opt) < std::abs(coarse_auc - opt));
}

TEST_CASE("trapezoidal AUC equals the prefix-sum oracle") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = random_disparity(rng, 32, 32);
    const auto pred = perturbed(rng, gt, 0.05 + 0.02 * trial);
    const auto conf = random_confidence(rng, 32, 32);
    const double a = metrics::auc(metrics::sparsification(pred, gt, conf));
    CHECK(std::abs(a - static_cast<double>(brute_force_auc(pred, gt, conf, 1.0))) < 1e-12);
  }
}

TEST_CASE("strictly increasing transforms of confidence leave the curve unchanged") {
  std::mt19937_64 rng(14);
  const auto gt = random_disparity(rng, 12, 12);
  const auto pred = perturbed(rng, gt, 0.3);
  const auto conf = random_confidence(rng, 12, 12);
  std::vector<double> squashed(conf.size());
  for (std::size_t i = 0; i < conf.size(); ++i) squashed[i] = std::pow(conf.value(i), 3.0) * 0.5 + 0.25;
  const auto a = metrics::sparsification(pred, gt, conf);
  const auto b = metrics::sparsification(pred, gt, ConfidenceMap(12, 12, squashed));
  for (std::size_t j = 0; j < a.points.size(); ++j) CHECK(a.points[j].error_rate == b.points[j].error_rate);
}

TEST_CASE("invalid padding does not change any statistic") {
  std::mt19937_64 rng(15);
  const std::size_t w = 10, h = 9;
  const auto gt = random_disparity(rng, w, h);
  const auto pred = perturbed(rng, gt, 0.3);
  const auto conf = random_confidence(rng, w, h);

  // Two invalid columns on the right and one invalid row at the bottom.
  const std::size_t pw = w + 2, ph = h + 1;
  std::vector<double> gv(pw * ph, 0.0), pv(pw * ph, 0.0), cv(pw * ph, 0.999);
  std::vector<std::uint8_t> mask(pw * ph, 0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      gv[y * pw + x] = gt.at(x, y);
      pv[y * pw + x] = pred.at(x, y);
      cv[y * pw + x] = conf.value(y * w + x);
      mask[y * pw + x] = 1;
    }
  }
  std::uniform_real_distribution<double> junk(-100.0, 100.0);
  std::vector<double> pv_junk = pv;
  for (std::size_t i = 0; i < pv_junk.size(); ++i) {
    if (!mask[i]) pv_junk[i] = junk(rng);
  }
  DisparityMap gt_p(pw, ph, gv, mask);
  DisparityMap pred_p(pw, ph, pv_junk);  // fully valid; gt's mask excludes the padding
  ConfidenceMap conf_p(pw, ph, cv);
  CHECK(metrics::evaluate(pred_p, gt_p, &conf_p) == metrics::evaluate(pred, gt, &conf));
}

}  // TEST_SUITE
