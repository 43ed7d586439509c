#include "stereoconf/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stereoconf/errors.hpp"

namespace stereoconf::ensemble {

DisparityMap conf_guided_ensemble(const DisparityMap& primary, const ConfidenceMap& conf,
                                  const DisparityMap& baseline, const EnsembleConfig& cfg) {
  require_same_shape(primary, conf, "ensemble");
  require_same_shape(primary, baseline, "ensemble");
  if (!(cfg.replace_fraction >= 0.0 && cfg.replace_fraction <= 1.0)) {
    throw DomainError("ensemble: replace_fraction outside [0, 1]");
  }

  std::vector<std::size_t> ranked;
  ranked.reserve(primary.size());
  for (std::size_t i = 0; i < primary.size(); ++i) {
    if (!primary.valid(i)) continue;
    if (!baseline.valid(i)) {
      throw DomainError("ensemble: baseline invalid at a pixel where primary is valid");
    }
    ranked.push_back(i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t l, std::size_t r) {
    return conf.value(l) < conf.value(r);
  });

  const double n = static_cast<double>(ranked.size());
  const auto replace = std::min(
      ranked.size(), static_cast<std::size_t>(std::floor(cfg.replace_fraction * n + 1e-9)));

  DisparityMap out = primary;
  for (std::size_t j = 0; j < replace; ++j) out.set(ranked[j], baseline.value(ranked[j]));
  return out;
}

}  // namespace stereoconf::ensemble
