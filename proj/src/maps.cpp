#include "stereoconf/maps.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace stereoconf {

namespace {

void check_size(std::size_t width, std::size_t height, std::size_t n, const char* what) {
  if (width * height != n) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(width * height) +
                         " samples, got " + std::to_string(n));
  }
}

}  // namespace

DisparityMap::DisparityMap(std::size_t width, std::size_t height)
    : width_(width), height_(height), values_(width * height, 0.0),
      valid_(width * height, 1) {}

DisparityMap::DisparityMap(std::size_t width, std::size_t height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)),
      valid_(values_.size(), 1) {
  check_size(width, height, values_.size(), "DisparityMap");
}

DisparityMap::DisparityMap(std::size_t width, std::size_t height, std::vector<double> values,
                           std::vector<std::uint8_t> valid)
    : width_(width), height_(height), values_(std::move(values)), valid_(std::move(valid)) {
  check_size(width, height, values_.size(), "DisparityMap");
  check_size(width, height, valid_.size(), "DisparityMap mask");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!valid_[i]) values_[i] = 0.0;
    valid_[i] = valid_[i] ? 1 : 0;
  }
}

void DisparityMap::set(std::size_t i, double v) {
  values_[i] = v;
  valid_[i] = 1;
}

void DisparityMap::invalidate(std::size_t i) {
  values_[i] = 0.0;
  valid_[i] = 0;
}

std::size_t DisparityMap::count_valid() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

ConfidenceMap::ConfidenceMap(std::size_t width, std::size_t height, std::vector<double> values,
                             double c_min)
    : width_(width), height_(height), values_(std::move(values)) {
  check_size(width, height, values_.size(), "ConfidenceMap");
  for (double c : values_) {
    if (!(c >= c_min && c <= 1.0)) {
      throw DomainError("ConfidenceMap: value " + std::to_string(c) + " outside [c_min, 1]");
    }
  }
}

ConfidenceMap ConfidenceMap::clamped(std::size_t width, std::size_t height,
                                     std::vector<double> values, double c_min) {
  for (double& c : values) {
    if (!(c >= 0.0 && c <= 1.0)) {
      throw DomainError("ConfidenceMap: value " + std::to_string(c) + " outside [0, 1]");
    }
    c = std::max(c, c_min);
  }
  return ConfidenceMap(width, height, std::move(values), c_min);
}

ConfidenceMap ConfidenceMap::constant(std::size_t width, std::size_t height, double c) {
  return ConfidenceMap(width, height, std::vector<double>(width * height, c));
}

}  // namespace stereoconf
