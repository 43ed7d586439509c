#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stereoconf/loss.hpp"
#include "stereoconf/maps.hpp"

namespace stereoconf::toy {

// Synthetic per-pixel regression problem. The last feature channel is a
// "difficulty" cue: the pixels with the largest cue values are the corrupted
// ones, so a model can learn to recognize them from its input the way a
// matcher can recognize occlusions or textureless regions.
struct ToyScene {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t feature_dim = 0;
  std::vector<double> features;               // pixel-major, feature_dim per pixel
  DisparityMap gt;                            // noise-free target, fully valid
  std::vector<std::uint8_t> corruption_mask;  // 1 where the observation is an outlier
  DisparityMap observed;                      // training target

  std::size_t size() const { return width * height; }
  std::span<const double> pixel_features(std::size_t i) const {
    return std::span<const double>(features).subspan(i * feature_dim, feature_dim);
  }
};

struct SceneConfig {
  std::uint64_t seed = 0;
  std::size_t width = 50;
  std::size_t height = 50;
  std::size_t feature_dim = 4;
  double outlier_frac = 0.2;
  double noise_sigma = 0.2;
  double outlier_magnitude = 10.0;
};

// Deterministic in the seed. Exactly round(outlier_frac * N) pixels are
// corrupted; each gets an extra offset of magnitude in [M, 2M], positive for
// 70% of them on average, on top of Gaussian noise.
ToyScene gen_synthetic_scene(const SceneConfig& cfg);

// Per-pixel MLP: feature_dim -> hidden -> hidden -> 2 with tanh hidden units.
// Output 0 is the disparity; output 1 passes through a logistic and is
// clamped to [c_min, 1] to give the confidence.
class ToyModel {
 public:
  ToyModel() = default;
  ToyModel(std::size_t feature_dim, std::size_t hidden, double c_min = kDefaultMinConfidence);

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  static ToyModel initialized(std::size_t feature_dim, std::size_t hidden, std::uint64_t seed,
                              double c_min = kDefaultMinConfidence);

  std::array<std::size_t, 4> layer_dims() const { return dims_; }
  double c_min() const { return c_min_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  // Offsets of each layer's weight matrix (row-major out x in) and bias.
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + dims_[layer + 1] * dims_[layer];
  }

  bool operator==(const ToyModel&) const = default;

 private:
  std::array<std::size_t, 4> dims_{};
  std::array<std::size_t, 3> offsets_{};
  std::vector<double> params_;
  double c_min_ = kDefaultMinConfidence;
};

struct PixelOutput {
  double disparity = 0.0;
  double confidence = 0.5;
};

PixelOutput forward_pixel(const ToyModel& model, std::span<const double> x);

// Applies the model to every pixel of a pixel-major feature grid.
std::pair<DisparityMap, ConfidenceMap> forward(const ToyModel& model,
                                               std::span<const double> features,
                                               std::size_t width, std::size_t height);

enum class LossMode { focused, plain_l1 };

struct Gradients {
  double loss = 0.0;  // data term mean plus weight penalty
  std::vector<double> params;
};

// Gradient of mean per-pixel loss over `pixels` (indices into the scene,
// repeats allowed) against the observed disparity, plus weight_decay * |w|
// over all parameters.
Gradients backward(const ToyModel& model, const ToyScene& scene, LossMode mode,
                   const loss::FocusedLossParams& loss_params, double weight_decay,
                   std::span<const std::size_t> pixels);
// Same over every pixel of the scene.
Gradients backward(const ToyModel& model, const ToyScene& scene, LossMode mode,
                   const loss::FocusedLossParams& loss_params, double weight_decay);

// Mean data loss over the whole scene, no weight penalty.
double scene_loss(const ToyModel& model, const ToyScene& scene, LossMode mode,
                  const loss::FocusedLossParams& loss_params);

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(std::span<double> params, AdamState& state, std::span<const double> grads,
               const AdamConfig& cfg);

struct TrainConfig {
  loss::FocusedLossParams loss_params;
  double weight_decay = 1e-4;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t iterations = 2000;
  std::size_t batch_pixels = 256;
  std::uint64_t seed = 0;
  std::size_t hidden = 16;
  // Learning rate halves at each of these fractions of the run.
  std::vector<double> lr_milestones = {0.5, 0.75, 0.9};
  std::size_t log_every = 100;
};

struct TrainReport {
  LossMode mode = LossMode::focused;
  std::size_t iterations = 0;
  std::vector<std::pair<std::size_t, double>> loss_trajectory;  // (iteration, scene loss)
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double clean_epe = 0.0;  // |pred - gt| averaged over uncorrupted pixels
  double mean_conf_clean = 0.0;
  double mean_conf_corrupted = 0.0;
  DisparityMap prediction;
  ConfidenceMap confidence;

  bool operator==(const TrainReport&) const = default;
};

struct TrainResult {
  ToyModel model;
  TrainReport report;
};

// Minibatch Adam over shuffled pixels. Throws DivergenceError when the loss
// becomes non-finite.
TrainResult train(const TrainConfig& cfg, const ToyScene& scene, LossMode mode);

std::string to_string(LossMode mode);
nlohmann::json to_json(const TrainReport& report);

}  // namespace stereoconf::toy
