#include "stereoconf/loss.hpp"

#include <array>
#include <cmath>
#include <string>

#include "stereoconf/errors.hpp"

namespace stereoconf::loss {

void FocusedLossParams::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("loss: k must be positive");
  if (!(a >= k + 1.0) || !std::isfinite(a)) throw DomainError("loss: a must satisfy a >= k + 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("loss: gamma must be >= 0");
  if (!(c_min > 0.0 && c_min < 1.0)) throw DomainError("loss: c_min must lie in (0, 1)");
}

namespace {

void check_confidence(double c, const FocusedLossParams& params) {
  if (!(c >= params.c_min && c <= 1.0)) {
    throw DomainError("loss: confidence " + std::to_string(c) + " outside [c_min, 1]");
  }
}

// Loss without validation, for the solver's inner comparisons.
double total_unchecked(double r, double c, const FocusedLossParams& p) {
  const double b = p.scale(c);
  return r / b + std::log(b) - p.gamma * std::log(c);
}

}  // namespace

PixelLossTerms focused_loss_pixel(double residual, double c, const FocusedLossParams& params) {
  params.validate();
  check_confidence(c, params);
  const double b = params.scale(c);
  PixelLossTerms t;
  t.focused_term = std::abs(residual) / b;
  t.regularization_term = std::log(b) - params.gamma * std::log(c);
  t.total = t.focused_term + t.regularization_term;
  return t;
}

double plain_l1_pixel(double residual) { return std::abs(residual); }

MapLoss focused_loss_map(const DisparityMap& pred, const DisparityMap& gt,
                         const ConfidenceMap& conf, const FocusedLossParams& params) {
  require_same_shape(pred, gt, "focused_loss_map");
  require_same_shape(pred, conf, "focused_loss_map");
  params.validate();
  MapLoss out;
  out.per_pixel.resize(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred.valid(i) || !gt.valid(i)) continue;
    out.per_pixel[i] = focused_loss_pixel(gt.value(i) - pred.value(i), conf.value(i), params);
    sum += out.per_pixel[i].total;
    ++out.n_valid;
  }
  if (out.n_valid == 0) throw DomainError("focused_loss_map: no valid pixels");
  out.mean_total = sum / static_cast<double>(out.n_valid);
  return out;
}

LossGradient gradient_pixel(double residual, double c, const FocusedLossParams& params) {
  params.validate();
  check_confidence(c, params);
  const double b = params.scale(c);
  const double r = std::abs(residual);
  LossGradient g;
  // residual = gt - pred, so d|gt - pred|/dpred = -sign(gt - pred).
  if (residual > 0.0) {
    g.d_prediction = -1.0 / b;
  } else if (residual < 0.0) {
    g.d_prediction = 1.0 / b;
  }
  g.d_confidence = r * params.k / (b * b) - params.k / b - params.gamma / c;
  return g;
}

double optimal_confidence(double residual, const FocusedLossParams& params) {
  params.validate();
  const double r = std::abs(residual);
  const double k = params.k;
  const double a = params.a;
  const double g = params.gamma;

  std::array<double, 4> candidates{};
  std::size_t n = 0;
  const auto consider = [&](double c) {
    if (std::isfinite(c) && c > params.c_min && c < 1.0) candidates[n++] = c;
  };

  const double qa = k * k * (1.0 - g);
  const double qb = k * (r - a + 2.0 * g * a);
  const double qc = -g * a * a;
  if (qa == 0.0) {
    if (qb != 0.0) consider(-qc / qb);
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      // Cancellation-free pair of roots.
      const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
      if (q != 0.0) {
        consider(q / qa);
        consider(qc / q);
      } else {
        consider(0.0);
      }
    }
  }

  double best_c = 1.0;
  double best_loss = total_unchecked(r, 1.0, params);
  const auto compete = [&](double c) {
    const double l = total_unchecked(r, c, params);
    if (l < best_loss || (l == best_loss && c > best_c)) {
      best_loss = l;
      best_c = c;
    }
  };
  for (std::size_t i = 0; i < n; ++i) compete(candidates[i]);
  compete(params.c_min);
  return best_c;
}

std::vector<ScanPoint> loss_scan(double residual, const FocusedLossParams& params,
                                 std::size_t n_points) {
  params.validate();
  if (n_points < 2) throw DomainError("loss_scan: need at least 2 points");
  std::vector<ScanPoint> out(n_points);
  const double lo = params.c_min;
  const double step = (1.0 - lo) / static_cast<double>(n_points - 1);
  const double r = std::abs(residual);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double c = (i + 1 == n_points) ? 1.0 : lo + step * static_cast<double>(i);
    out[i] = {c, total_unchecked(r, c, params)};
  }
  return out;
}

}  // namespace stereoconf::loss
