#pragma once

#include <cstddef>
#include <vector>

#include "stereoconf/maps.hpp"

namespace stereoconf::loss {

// Parameters of the confidence-weighted Laplacian loss.
//
// The per-pixel Laplacian scale is b(c) = a - k*c, a linear decreasing
// function of confidence, and the confidence prior is p(c) ~ c^gamma.
// Requiring a >= k + 1 keeps b >= 1 on the whole unit interval, so a fully
// confident pixel is never weighted above the plain L1 loss.
struct FocusedLossParams {
  double k = 4.0;
  double a = 5.0;
  double gamma = 1.0;
  double c_min = kDefaultMinConfidence;

  // Throws DomainError when an invariant is violated.
  void validate() const;
  double scale(double c) const { return a - k * c; }
};

struct PixelLossTerms {
  double focused_term = 0.0;         // |r| / (a - k c)
  double regularization_term = 0.0;  // ln(a - k c) - gamma ln c
  double total = 0.0;
};

struct LossGradient {
  double d_prediction = 0.0;
  double d_confidence = 0.0;
};

// Loss of a single pixel. `residual` is gt - prediction; only |residual|
// matters. The additive constant (including the ln 2 of the Laplacian
// normalizer) is dropped. Throws DomainError for c outside [c_min, 1].
PixelLossTerms focused_loss_pixel(double residual, double c, const FocusedLossParams& params);

// |residual|: the unit-scale Laplacian negative log-likelihood up to a constant.
double plain_l1_pixel(double residual);

struct MapLoss {
  double mean_total = 0.0;
  std::vector<PixelLossTerms> per_pixel;  // zero terms on invalid pixels
  std::size_t n_valid = 0;
};

// Mean per-pixel total over pixels valid in both pred and gt.
MapLoss focused_loss_map(const DisparityMap& pred, const DisparityMap& gt,
                         const ConfidenceMap& conf, const FocusedLossParams& params);

// Analytic partial derivatives of the pixel total, with residual = gt - pred.
// At residual == 0 the L1 subgradient 0 is used for d_prediction.
LossGradient gradient_pixel(double residual, double c, const FocusedLossParams& params);

// Confidence in [c_min, 1] minimizing the pixel total for |residual|.
//
// Stationary points satisfy
//   k^2 (1 - gamma) c^2 + k (r - a + 2 gamma a) c - gamma a^2 = 0,
// which becomes linear at gamma == 1. Interior real roots and both interval
// endpoints are compared by loss value; ties go to the larger confidence.
double optimal_confidence(double residual, const FocusedLossParams& params);

struct ScanPoint {
  double c = 0.0;
  double total = 0.0;
};

// Pixel total sampled on n_points uniformly spaced confidences over [c_min, 1].
std::vector<ScanPoint> loss_scan(double residual, const FocusedLossParams& params,
                                 std::size_t n_points);

}  // namespace stereoconf::loss
