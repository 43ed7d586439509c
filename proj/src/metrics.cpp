#include "stereoconf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stereoconf/errors.hpp"

namespace stereoconf::metrics {

namespace {

constexpr double kDefaultThresholds[] = {1.0, 3.0, 5.0};

// Absolute errors of the jointly valid pixels, in row-major order, paired
// with their flat index.
struct JointErrors {
  std::vector<std::size_t> index;
  std::vector<double> abs_error;
};

JointErrors joint_errors(const DisparityMap& pred, const DisparityMap& gt, const char* what) {
  require_same_shape(pred, gt, what);
  JointErrors out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.valid(i) || !gt.valid(i)) continue;
    out.index.push_back(i);
    out.abs_error.push_back(std::abs(pred.value(i) - gt.value(i)));
  }
  if (out.index.empty()) throw DomainError(std::string(what) + ": no jointly valid pixels");
  return out;
}

double fraction_above(std::span<const double> abs_error, double t) {
  const auto n = std::count_if(abs_error.begin(), abs_error.end(),
                               [t](double e) { return e > t; });
  return static_cast<double>(n) / static_cast<double>(abs_error.size());
}

void check_densities(std::span<const double> densities) {
  if (densities.empty()) throw DomainError("sparsification: empty density list");
  double prev = 0.0;
  for (double d : densities) {
    if (!(d > 0.0 && d <= 1.0)) throw DomainError("sparsification: density outside (0, 1]");
    if (!(d > prev)) throw DomainError("sparsification: densities must be strictly increasing");
    prev = d;
  }
  if (densities.back() != 1.0) throw DomainError("sparsification: last density must be 1");
}

}  // namespace

std::vector<double> default_densities() {
  std::vector<double> d(20);
  for (int i = 1; i <= 20; ++i) d[i - 1] = i / 20.0;
  return d;
}

std::size_t top_count(double density, std::size_t n) {
  const double raw = std::ceil(density * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n);
}

double epe(const DisparityMap& pred, const DisparityMap& gt) {
  const auto je = joint_errors(pred, gt, "epe");
  return std::accumulate(je.abs_error.begin(), je.abs_error.end(), 0.0) /
         static_cast<double>(je.abs_error.size());
}

double error_rate(const DisparityMap& pred, const DisparityMap& gt, double t) {
  if (!(t > 0.0)) throw DomainError("error_rate: threshold must be positive");
  const auto je = joint_errors(pred, gt, "error_rate");
  return fraction_above(je.abs_error, t);
}

SparsificationCurve sparsification(const DisparityMap& pred, const DisparityMap& gt,
                                   const ConfidenceMap& conf, double theta,
                                   std::span<const double> densities) {
  require_same_shape(pred, conf, "sparsification");
  if (!(theta > 0.0)) throw DomainError("sparsification: theta must be positive");
  const auto dflt = default_densities();
  if (densities.empty()) densities = dflt;
  check_densities(densities);

  const auto je = joint_errors(pred, gt, "sparsification");
  const std::size_t n = je.index.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // je.index is ascending, so a stable sort keeps row-major order on ties.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return conf.value(je.index[l]) > conf.value(je.index[r]);
  });

  std::vector<std::size_t> wrong_prefix(n + 1, 0);
  for (std::size_t j = 0; j < n; ++j) {
    wrong_prefix[j + 1] = wrong_prefix[j] + (je.abs_error[order[j]] > theta ? 1 : 0);
  }

  SparsificationCurve curve;
  curve.theta = theta;
  curve.points.reserve(densities.size());
  for (double d : densities) {
    const std::size_t taken = top_count(d, n);
    curve.points.push_back(
        {d, static_cast<double>(wrong_prefix[taken]) / static_cast<double>(taken)});
  }
  return curve;
}

double auc(const SparsificationCurve& curve) {
  if (curve.points.empty()) return 0.0;
  const auto& p = curve.points;
  double area = p.front().density * p.front().error_rate;
  for (std::size_t i = 1; i < p.size(); ++i) {
    area += (p[i].density - p[i - 1].density) * (p[i].error_rate + p[i - 1].error_rate) * 0.5;
  }
  return area;
}

double auc_opt(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("auc_opt: epsilon outside [0, 1]");
  if (epsilon == 0.0) return 0.0;
  if (epsilon == 1.0) return 1.0;
  return epsilon + (1.0 - epsilon) * std::log1p(-epsilon);
}

EvalReport evaluate(const DisparityMap& pred, const DisparityMap& gt, const ConfidenceMap* conf,
                    double theta, std::span<const double> thresholds) {
  if (thresholds.empty()) thresholds = kDefaultThresholds;
  const auto je = joint_errors(pred, gt, "evaluate");

  EvalReport report;
  report.n_valid = je.abs_error.size();
  report.epe = std::accumulate(je.abs_error.begin(), je.abs_error.end(), 0.0) /
               static_cast<double>(report.n_valid);
  for (double t : thresholds) {
    if (!(t > 0.0)) throw DomainError("evaluate: thresholds must be positive");
    report.error_rates[t] = fraction_above(je.abs_error, t);
  }

  if (conf != nullptr) {
    const auto curve = sparsification(pred, gt, *conf, theta);
    report.auc = auc(curve);
    report.auc_opt = auc_opt(fraction_above(je.abs_error, theta));
    report.ratio = *report.auc > 0.0 ? *report.auc_opt / *report.auc : 0.0;
  }
  return report;
}

EvalReport aggregate(std::span<const EvalReport> reports,
                     std::span<const double> full_density_errors) {
  if (reports.empty()) throw DomainError("aggregate: no reports");
  if (full_density_errors.size() != reports.size()) {
    throw DomainError("aggregate: need one full-density error per report");
  }

  EvalReport out;
  const bool with_conf = std::all_of(reports.begin(), reports.end(),
                                     [](const EvalReport& r) { return r.auc.has_value(); });
  double epe_sum = 0.0;
  double eps_sum = 0.0;
  double auc_sum = 0.0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (r.error_rates.size() != reports.front().error_rates.size()) {
      throw DomainError("aggregate: reports use different thresholds");
    }
    const double w = static_cast<double>(r.n_valid);
    out.n_valid += r.n_valid;
    epe_sum += w * r.epe;
    eps_sum += w * full_density_errors[i];
    for (const auto& [t, rate] : r.error_rates) {
      if (!reports.front().error_rates.contains(t)) {
        throw DomainError("aggregate: reports use different thresholds");
      }
      out.error_rates[t] += w * rate;
    }
    if (with_conf) auc_sum += *r.auc;
  }
  const double n = static_cast<double>(out.n_valid);
  out.epe = epe_sum / n;
  for (auto& [t, rate] : out.error_rates) rate /= n;

  if (with_conf) {
    out.auc = auc_sum / static_cast<double>(reports.size());
    out.auc_opt = auc_opt(std::clamp(eps_sum / n, 0.0, 1.0));
    out.ratio = *out.auc > 0.0 ? *out.auc_opt / *out.auc : 0.0;
  }
  return out;
}

}  // namespace stereoconf::metrics
