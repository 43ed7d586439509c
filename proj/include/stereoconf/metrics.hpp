#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "stereoconf/maps.hpp"

namespace stereoconf::metrics {

struct SparsificationPoint {
  double density = 0.0;
  double error_rate = 0.0;
};

// Error rate of the most-confident fraction of pixels, as a function of that
// fraction. Densities are strictly increasing and end at 1.
struct SparsificationCurve {
  std::vector<SparsificationPoint> points;
  double theta = 1.0;
};

// Confidence fields are absent when no confidence map was supplied.
struct EvalReport {
  double epe = 0.0;
  std::map<double, double> error_rates;  // threshold t (px) -> fraction with |err| > t
  std::optional<double> auc;
  std::optional<double> auc_opt;
  std::optional<double> ratio;
  std::size_t n_valid = 0;

  bool operator==(const EvalReport&) const = default;
};

// 0.05, 0.10, ..., 1.00
std::vector<double> default_densities();

// Number of pixels in the top `density` fraction of n: ceil(density * n),
// at least 1. A 1e-9 guard absorbs representation error in density * n.
std::size_t top_count(double density, std::size_t n);

double epe(const DisparityMap& pred, const DisparityMap& gt);

// Fraction of jointly valid pixels with |pred - gt| > t.
double error_rate(const DisparityMap& pred, const DisparityMap& gt, double t);

// Pixels are ranked by confidence, highest first, ties by row-major index.
SparsificationCurve sparsification(const DisparityMap& pred, const DisparityMap& gt,
                                   const ConfidenceMap& conf, double theta = 1.0,
                                   std::span<const double> densities = {});

// Trapezoidal area over [d_1, 1] plus the rectangle d_1 * e(d_1) for [0, d_1].
double auc(const SparsificationCurve& curve);

// Area under the sparsification curve of a perfect ranking for full-density
// error rate epsilon: epsilon + (1 - epsilon) ln(1 - epsilon).
double auc_opt(double epsilon);

// Metrics for one image. The optimal AUC uses the error rate at t = theta;
// ratio = auc_opt / auc, taken as 0 when auc is 0.
EvalReport evaluate(const DisparityMap& pred, const DisparityMap& gt,
                    const ConfidenceMap* conf, double theta = 1.0,
                    std::span<const double> thresholds = {});

// Dataset-level report. auc is the mean per-image AUC; epe and error rates
// are valid-pixel weighted; auc_opt is the closed form of the weighted mean
// of full_density_errors (one per report).
EvalReport aggregate(std::span<const EvalReport> reports,
                     std::span<const double> full_density_errors);

}  // namespace stereoconf::metrics
