#include "stereoconf/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stereoconf/errors.hpp"

namespace stereoconf::toy {

namespace {

// Outliers lean one way, as occluded pixels pick up background disparity,
// with the remainder scattered the other way.
constexpr double kPositiveOutlierShare = 0.7;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Smooth target as a function of the signal channels (all but the cue).
double target_disparity(std::span<const double> x) {
  const std::size_t signal = x.size() - 1;
  double d = 5.0 + 2.0 * x[0];
  for (std::size_t j = 1; j < signal; ++j) d += std::sin(2.0 * x[j]);
  if (signal >= 2) d += x[0] * x[1];
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scene

ToyScene gen_synthetic_scene(const SceneConfig& cfg) {
  if (cfg.width == 0 || cfg.height == 0) throw DomainError("scene: empty dimensions");
  if (cfg.feature_dim < 2) throw DomainError("scene: need a signal channel and a cue channel");
  if (!(cfg.outlier_frac >= 0.0 && cfg.outlier_frac <= 0.5)) {
    throw DomainError("scene: outlier_frac outside [0, 0.5]");
  }
  if (!(cfg.noise_sigma >= 0.0)) throw DomainError("scene: noise_sigma must be >= 0");
  if (!(cfg.outlier_magnitude >= 0.0)) throw DomainError("scene: outlier_magnitude must be >= 0");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  ToyScene s;
  s.width = cfg.width;
  s.height = cfg.height;
  s.feature_dim = cfg.feature_dim;
  const std::size_t n = s.size();
  s.features.resize(n * cfg.feature_dim);
  for (double& f : s.features) f = unit(rng);

  std::vector<double> gt(n);
  for (std::size_t i = 0; i < n; ++i) gt[i] = target_disparity(s.pixel_features(i));
  s.gt = DisparityMap(cfg.width, cfg.height, gt);

  const auto n_corrupt = static_cast<std::size_t>(std::llround(cfg.outlier_frac * static_cast<double>(n)));
  std::vector<std::size_t> by_cue(n);
  std::iota(by_cue.begin(), by_cue.end(), std::size_t{0});
  const std::size_t cue = cfg.feature_dim - 1;
  std::stable_sort(by_cue.begin(), by_cue.end(), [&](std::size_t l, std::size_t r) {
    return s.features[l * cfg.feature_dim + cue] > s.features[r * cfg.feature_dim + cue];
  });
  s.corruption_mask.assign(n, 0);
  for (std::size_t j = 0; j < n_corrupt; ++j) s.corruption_mask[by_cue[j]] = 1;

  std::uniform_real_distribution<double> extra(0.0, 1.0);
  std::vector<double> observed(n);
  for (std::size_t i = 0; i < n; ++i) {
    observed[i] = gt[i] + cfg.noise_sigma * noise(rng);
    if (s.corruption_mask[i]) {
      const double sign = extra(rng) < kPositiveOutlierShare ? 1.0 : -1.0;
      observed[i] += sign * cfg.outlier_magnitude * (1.0 + extra(rng));
    }
  }
  s.observed = DisparityMap(cfg.width, cfg.height, std::move(observed));
  return s;
}

// ---------------------------------------------------------------------------
// Model

ToyModel::ToyModel(std::size_t feature_dim, std::size_t hidden, double c_min)
    : dims_{feature_dim, hidden, hidden, 2}, c_min_(c_min) {
  if (feature_dim == 0 || hidden == 0) throw DomainError("model: empty layer");
  if (!(c_min > 0.0 && c_min < 1.0)) throw DomainError("model: c_min outside (0, 1)");
  std::size_t offset = 0;
  for (std::size_t l = 0; l < 3; ++l) {
    offsets_[l] = offset;
    offset += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  params_.assign(offset, 0.0);
}

ToyModel ToyModel::initialized(std::size_t feature_dim, std::size_t hidden, std::uint64_t seed,
                               double c_min) {
  ToyModel m(feature_dim, hidden, c_min);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < 3; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.dims_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    const std::size_t count = m.dims_[l + 1] * m.dims_[l] + m.dims_[l + 1];
    for (std::size_t j = 0; j < count; ++j) m.params_[m.offsets_[l] + j] = u(rng);
  }
  return m;
}

namespace {

// Activations of one forward pass, kept for the backward sweep.
struct Activations {
  std::vector<double> h1, h2;
  double out[2] = {0.0, 0.0};
  double sigmoid = 0.5;
  double confidence = 0.5;
  bool clamped = false;

  explicit Activations(std::size_t hidden) : h1(hidden), h2(hidden) {}
};

void dense(const ToyModel& m, std::size_t layer, std::span<const double> in, std::span<double> out) {
  const auto dims = m.layer_dims();
  const std::size_t n_in = dims[layer];
  const std::size_t n_out = dims[layer + 1];
  const double* w = m.params().data() + m.weight_offset(layer);
  const double* b = m.params().data() + m.bias_offset(layer);
  for (std::size_t o = 0; o < n_out; ++o) {
    double acc = b[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += w[o * n_in + i] * in[i];
    out[o] = acc;
  }
}

void run_forward(const ToyModel& m, std::span<const double> x, Activations& act) {
  dense(m, 0, x, act.h1);
  for (double& v : act.h1) v = std::tanh(v);
  dense(m, 1, act.h1, act.h2);
  for (double& v : act.h2) v = std::tanh(v);
  dense(m, 2, act.h2, act.out);
  act.sigmoid = logistic(act.out[1]);
  act.clamped = act.sigmoid < m.c_min();
  act.confidence = std::clamp(act.sigmoid, m.c_min(), 1.0);
}

void check_features(const ToyModel& m, std::size_t n_features) {
  if (n_features != m.layer_dims()[0]) throw DimensionError("model: feature dimension mismatch");
}

}  // namespace

PixelOutput forward_pixel(const ToyModel& model, std::span<const double> x) {
  check_features(model, x.size());
  Activations act(model.layer_dims()[1]);
  run_forward(model, x, act);
  return {act.out[0], act.confidence};
}

std::pair<DisparityMap, ConfidenceMap> forward(const ToyModel& model,
                                               std::span<const double> features,
                                               std::size_t width, std::size_t height) {
  const std::size_t f = model.layer_dims()[0];
  const std::size_t n = width * height;
  if (features.size() != n * f) throw DimensionError("forward: feature grid size mismatch");
  Activations act(model.layer_dims()[1]);
  std::vector<double> disp(n), conf(n);
  for (std::size_t i = 0; i < n; ++i) {
    run_forward(model, features.subspan(i * f, f), act);
    disp[i] = act.out[0];
    conf[i] = act.confidence;
  }
  return {DisparityMap(width, height, std::move(disp)),
          ConfidenceMap(width, height, std::move(conf), model.c_min())};
}

// ---------------------------------------------------------------------------
// Gradients

namespace {

struct PixelLoss {
  double value = 0.0;
  double d_disp = 0.0;
  double d_conf = 0.0;
};

PixelLoss pixel_loss(double residual, double c, LossMode mode, const loss::FocusedLossParams& p) {
  if (mode == LossMode::plain_l1) {
    return {loss::plain_l1_pixel(residual), residual > 0.0 ? -1.0 : (residual < 0.0 ? 1.0 : 0.0),
            0.0};
  }
  const auto terms = loss::focused_loss_pixel(residual, c, p);
  const auto grad = loss::gradient_pixel(residual, c, p);
  return {terms.total, grad.d_prediction, grad.d_confidence};
}

// Adds d(loss)/d(out) back through the network into `g`, scaled by `weight`.
void accumulate(const ToyModel& m, std::span<const double> x, const Activations& act,
                double d_out0, double d_out1, double weight, std::span<double> g,
                std::vector<double>& d_h2, std::vector<double>& d_h1) {
  const auto dims = m.layer_dims();
  const std::size_t hidden = dims[1];
  const std::span<const double> p = m.params();

  // Output layer.
  const double d_out[2] = {weight * d_out0, weight * d_out1};
  {
    const std::size_t w = m.weight_offset(2);
    const std::size_t b = m.bias_offset(2);
    std::fill(d_h2.begin(), d_h2.end(), 0.0);
    for (std::size_t o = 0; o < 2; ++o) {
      if (d_out[o] == 0.0) continue;
      for (std::size_t i = 0; i < hidden; ++i) {
        g[w + o * hidden + i] += d_out[o] * act.h2[i];
        d_h2[i] += d_out[o] * p[w + o * hidden + i];
      }
      g[b + o] += d_out[o];
    }
  }
  // Second hidden layer (tanh' = 1 - h^2).
  {
    const std::size_t w = m.weight_offset(1);
    const std::size_t b = m.bias_offset(1);
    std::fill(d_h1.begin(), d_h1.end(), 0.0);
    for (std::size_t o = 0; o < hidden; ++o) {
      const double da = d_h2[o] * (1.0 - act.h2[o] * act.h2[o]);
      for (std::size_t i = 0; i < hidden; ++i) {
        g[w + o * hidden + i] += da * act.h1[i];
        d_h1[i] += da * p[w + o * hidden + i];
      }
      g[b + o] += da;
    }
  }
  // First hidden layer.
  {
    const std::size_t n_in = dims[0];
    const std::size_t w = m.weight_offset(0);
    const std::size_t b = m.bias_offset(0);
    for (std::size_t o = 0; o < hidden; ++o) {
      const double da = d_h1[o] * (1.0 - act.h1[o] * act.h1[o]);
      for (std::size_t i = 0; i < n_in; ++i) g[w + o * n_in + i] += da * x[i];
      g[b + o] += da;
    }
  }
}

}  // namespace

Gradients backward(const ToyModel& model, const ToyScene& scene, LossMode mode,
                   const loss::FocusedLossParams& loss_params, double weight_decay,
                   std::span<const std::size_t> pixels) {
  check_features(model, scene.feature_dim);
  if (pixels.empty()) throw DomainError("backward: empty pixel set");
  loss_params.validate();

  const std::size_t hidden = model.layer_dims()[1];
  Activations act(hidden);
  std::vector<double> d_h2(hidden), d_h1(hidden);
  Gradients out;
  out.params.assign(model.param_count(), 0.0);
  const double weight = 1.0 / static_cast<double>(pixels.size());

  double sum = 0.0;
  for (std::size_t i : pixels) {
    const auto x = scene.pixel_features(i);
    run_forward(model, x, act);
    const double residual = scene.observed.value(i) - act.out[0];
    const PixelLoss pl = pixel_loss(residual, act.confidence, mode, loss_params);
    sum += pl.value;
    // Clamped confidence is constant in the logit.
    const double d_logit =
        act.clamped ? 0.0 : pl.d_conf * act.sigmoid * (1.0 - act.sigmoid);
    accumulate(model, x, act, pl.d_disp, d_logit, weight, out.params, d_h2, d_h1);
  }
  out.loss = sum * weight;

  if (weight_decay != 0.0) {
    const auto p = model.params();
    double l1 = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      l1 += std::abs(p[j]);
      if (p[j] > 0.0) out.params[j] += weight_decay;
      if (p[j] < 0.0) out.params[j] -= weight_decay;
    }
    out.loss += weight_decay * l1;
  }
  return out;
}

Gradients backward(const ToyModel& model, const ToyScene& scene, LossMode mode,
                   const loss::FocusedLossParams& loss_params, double weight_decay) {
  std::vector<std::size_t> all(scene.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return backward(model, scene, mode, loss_params, weight_decay, all);
}

double scene_loss(const ToyModel& model, const ToyScene& scene, LossMode mode,
                  const loss::FocusedLossParams& loss_params) {
  check_features(model, scene.feature_dim);
  Activations act(model.layer_dims()[1]);
  double sum = 0.0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    run_forward(model, scene.pixel_features(i), act);
    sum += pixel_loss(scene.observed.value(i) - act.out[0], act.confidence, mode, loss_params).value;
  }
  return sum / static_cast<double>(scene.size());
}

// ---------------------------------------------------------------------------
// Optimization

void adam_step(std::span<double> params, AdamState& state, std::span<const double> grads,
               const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError("adam_step: size mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t j = 0; j < params.size(); ++j) {
    state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * grads[j];
    state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * grads[j] * grads[j];
    const double m_hat = state.m[j] / bias1;
    const double v_hat = state.v[j] / bias2;
    params[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

namespace {

TrainReport summarize(const ToyModel& model, const ToyScene& scene) {
  TrainReport r;
  auto [pred, conf] = forward(model, scene.features, scene.width, scene.height);
  double epe_sum = 0.0, conf_clean = 0.0, conf_bad = 0.0;
  std::size_t n_clean = 0, n_bad = 0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (scene.corruption_mask[i]) {
      conf_bad += conf.value(i);
      ++n_bad;
    } else {
      epe_sum += std::abs(pred.value(i) - scene.gt.value(i));
      conf_clean += conf.value(i);
      ++n_clean;
    }
  }
  r.clean_epe = n_clean ? epe_sum / static_cast<double>(n_clean) : 0.0;
  r.mean_conf_clean = n_clean ? conf_clean / static_cast<double>(n_clean) : 0.0;
  r.mean_conf_corrupted = n_bad ? conf_bad / static_cast<double>(n_bad) : 0.0;
  r.prediction = std::move(pred);
  r.confidence = std::move(conf);
  return r;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ToyScene& scene, LossMode mode) {
  cfg.loss_params.validate();
  if (!(cfg.learning_rate > 0.0)) throw DomainError("train: learning_rate must be positive");
  if (!(cfg.weight_decay >= 0.0)) throw DomainError("train: weight_decay must be >= 0");
  if (!(cfg.adam_epsilon > 0.0)) throw DomainError("train: adam_epsilon must be positive");
  if (cfg.batch_pixels == 0) throw DomainError("train: batch_pixels must be positive");

  TrainResult result;
  result.model = ToyModel::initialized(scene.feature_dim, cfg.hidden, cfg.seed,
                                       cfg.loss_params.c_min);
  ToyModel& model = result.model;
  const auto& lp = cfg.loss_params;

  const auto checked_loss = [&](std::size_t it) {
    const double l = scene_loss(model, scene, mode, lp);
    if (!std::isfinite(l)) {
      throw DivergenceError("train: non-finite loss at iteration " + std::to_string(it));
    }
    return l;
  };

  std::vector<std::pair<std::size_t, double>> trajectory;
  const double initial = checked_loss(0);
  trajectory.emplace_back(0, initial);

  // Batch order stream, distinct from the initializer's.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(scene.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::vector<std::size_t> batch(std::min(cfg.batch_pixels, order.size()));

  AdamState state(model.param_count());
  AdamConfig adam{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon};
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    double lr = cfg.learning_rate;
    for (double milestone : cfg.lr_milestones) {
      if (static_cast<double>(it) > milestone * static_cast<double>(cfg.iterations)) lr *= 0.5;
    }
    adam.learning_rate = lr;

    for (auto& px : batch) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      px = order[cursor++];
    }
    const Gradients g = backward(model, scene, mode, lp, cfg.weight_decay, batch);
    if (!std::isfinite(g.loss)) {
      throw DivergenceError("train: non-finite loss at iteration " + std::to_string(it));
    }
    adam_step(model.params(), state, g.params, adam);

    if (it % std::max<std::size_t>(cfg.log_every, 1) == 0 || it == cfg.iterations) {
      trajectory.emplace_back(it, checked_loss(it));
    }
  }

  result.report = summarize(model, scene);
  result.report.mode = mode;
  result.report.iterations = cfg.iterations;
  result.report.initial_loss = initial;
  result.report.final_loss = trajectory.back().second;
  result.report.loss_trajectory = std::move(trajectory);
  return result;
}

std::string to_string(LossMode mode) { return mode == LossMode::focused ? "focused" : "l1"; }

nlohmann::json to_json(const TrainReport& report) {
  nlohmann::json j;
  j["loss_mode"] = to_string(report.mode);
  j["iterations"] = report.iterations;
  j["initial_loss"] = report.initial_loss;
  j["final_loss"] = report.final_loss;
  j["clean_epe"] = report.clean_epe;
  j["mean_conf_clean"] = report.mean_conf_clean;
  j["mean_conf_corrupted"] = report.mean_conf_corrupted;
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& [it, l] : report.loss_trajectory) traj.push_back({{"iteration", it}, {"loss", l}});
  j["loss_trajectory"] = traj;
  return j;
}

}  // namespace stereoconf::toy
