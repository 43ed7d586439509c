#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stereoconf/errors.hpp"

namespace stereoconf {

inline constexpr double kDefaultMinConfidence = 1e-6;

// Dense disparity field with a validity mask, row-major, top row first.
// Invalid pixels hold 0 and are ignored by every statistic.
class DisparityMap {
 public:
  DisparityMap() = default;
  DisparityMap(std::size_t width, std::size_t height);
  DisparityMap(std::size_t width, std::size_t height, std::vector<double> values);
  DisparityMap(std::size_t width, std::size_t height, std::vector<double> values,
               std::vector<std::uint8_t> valid);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double value(std::size_t i) const { return values_[i]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  double at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }

  void set(std::size_t i, double v);
  void invalidate(std::size_t i);

  std::span<const double> values() const { return values_; }
  std::span<const std::uint8_t> mask() const { return valid_; }
  std::size_t count_valid() const;

  bool operator==(const DisparityMap&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
};

// Per-pixel confidence, every value in [c_min, 1].
class ConfidenceMap {
 public:
  ConfidenceMap() = default;
  // Throws DomainError if any value lies outside [c_min, 1].
  ConfidenceMap(std::size_t width, std::size_t height, std::vector<double> values,
                double c_min = kDefaultMinConfidence);

  // Accepts raw values in [0, 1] and lifts anything below c_min up to c_min.
  // NaN or values outside [0, 1] are rejected.
  static ConfidenceMap clamped(std::size_t width, std::size_t height,
                               std::vector<double> values,
                               double c_min = kDefaultMinConfidence);

  static ConfidenceMap constant(std::size_t width, std::size_t height, double c);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  double value(std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const ConfidenceMap&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> values_;
};

// Throws DimensionError unless both objects have identical width and height.
template <class A, class B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(std::string(what) + ": shape mismatch (" +
                         std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + ")");
  }
}

}  // namespace stereoconf
