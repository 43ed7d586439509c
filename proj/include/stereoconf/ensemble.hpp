#pragma once

#include "stereoconf/maps.hpp"

namespace stereoconf::ensemble {

struct EnsembleConfig {
  double replace_fraction = 0.15;
};

// Replaces the least-confident floor(replace_fraction * n_valid) valid pixels
// of `primary` with the `baseline` values at the same pixels. Ranking is by
// confidence ascending, ties by row-major index. The result keeps the
// primary's validity mask.
DisparityMap conf_guided_ensemble(const DisparityMap& primary, const ConfidenceMap& conf,
                                  const DisparityMap& baseline, const EnsembleConfig& cfg = {});

}  // namespace stereoconf::ensemble
