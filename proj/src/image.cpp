#include "dfa/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace dfa {

namespace {

void require_same_shape(const ImageShape& a, const ImageShape& b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.str() +
                                " vs " + b.str());
  }
}

template <typename Diff>
double norm_of(std::size_t n, Diff diff, Norm norm) {
  double acc = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double v = std::abs(diff(p));
    switch (norm) {
      case Norm::L0: acc += (v != 0.0) ? 1.0 : 0.0; break;
      case Norm::L1: acc += v; break;
      case Norm::L2: acc += v * v; break;
      case Norm::LInf: acc = std::max(acc, v); break;
    }
  }
  return norm == Norm::L2 ? std::sqrt(acc) : acc;
}

// Round half away from zero.
int round_away(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

ImageShape::ImageShape(int w, int h, int ch) : width(w), height(h), channels(ch) {
  validate(*this);
}

std::string ImageShape::str() const {
  return std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(channels);
}

void validate(const ImageShape& shape) {
  if (shape.width < 1 || shape.height < 1) {
    throw std::invalid_argument("image shape " + shape.str() + ": width and height must be >= 1");
  }
  if (shape.channels != 1 && shape.channels != 3) {
    throw std::invalid_argument("image shape " + shape.str() + ": channels must be 1 or 3");
  }
}

IntegerImage::IntegerImage(ImageShape shape, std::uint8_t fill)
    : shape_(shape), values_(shape.size(), fill) {
  validate(shape_);
}

IntegerImage::IntegerImage(ImageShape shape, std::vector<std::uint8_t> values)
    : shape_(shape), values_(std::move(values)) {
  validate(shape_);
  if (values_.size() != shape_.size()) {
    throw std::invalid_argument("IntegerImage: " + std::to_string(values_.size()) +
                                " values for shape " + shape_.str());
  }
}

IntegerImage IntegerImage::from_ints(ImageShape shape, std::span<const int> values) {
  std::vector<std::uint8_t> bytes(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0 || values[i] > 255) {
      throw std::invalid_argument("IntegerImage: value " + std::to_string(values[i]) +
                                  " at " + std::to_string(i) + " outside [0, 255]");
    }
    bytes[i] = static_cast<std::uint8_t>(values[i]);
  }
  return IntegerImage(shape, std::move(bytes));
}

RealImage::RealImage(ImageShape shape, double fill) : shape_(shape), values_(shape.size(), fill) {
  validate(shape_);
  if (!std::isfinite(fill)) throw std::invalid_argument("RealImage: non-finite fill value");
}

RealImage::RealImage(ImageShape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  validate(shape_);
  if (values_.size() != shape_.size()) {
    throw std::invalid_argument("RealImage: " + std::to_string(values_.size()) +
                                " values for shape " + shape_.str());
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw std::invalid_argument("RealImage: non-finite value at " + std::to_string(i));
    }
  }
}

Perturbation::Perturbation(ImageShape shape, int budget)
    : shape_(shape), budget_(budget), values_(shape.size(), 0) {
  validate(shape_);
  if (budget_ < 1) throw std::invalid_argument("Perturbation: budget must be >= 1");
}

Perturbation::Perturbation(ImageShape shape, int budget, std::vector<int> values)
    : shape_(shape), budget_(budget), values_(std::move(values)) {
  validate(shape_);
  if (budget_ < 1) throw std::invalid_argument("Perturbation: budget must be >= 1");
  if (values_.size() != shape_.size()) {
    throw std::invalid_argument("Perturbation: " + std::to_string(values_.size()) +
                                " values for shape " + shape_.str());
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (std::abs(values_[i]) > budget_) {
      throw std::invalid_argument("Perturbation: value " + std::to_string(values_[i]) + " at " +
                                  std::to_string(i) + " exceeds budget " +
                                  std::to_string(budget_));
    }
  }
}

void Perturbation::set(std::size_t i, int value) {
  if (std::abs(value) > budget_) {
    throw std::invalid_argument("Perturbation: value " + std::to_string(value) +
                                " exceeds budget " + std::to_string(budget_));
  }
  values_.at(i) = value;
}

SearchSpace::SearchSpace(ImageShape shape, int budget)
    : shape_(shape), budget_(budget), low_(shape.size(), -budget), high_(shape.size(), budget) {
  validate(shape_);
  if (budget_ < 1) throw std::invalid_argument("SearchSpace: budget must be >= 1");
}

void SearchSpace::set_bounds(std::size_t p, int low, int high) {
  if (low < -budget_ || low > high || high > budget_) {
    throw std::invalid_argument("SearchSpace: invalid bounds [" + std::to_string(low) + ", " +
                                std::to_string(high) + "] at " + std::to_string(p));
  }
  low_.at(p) = low;
  high_.at(p) = high;
}

bool SearchSpace::contains(const Perturbation& delta) const {
  if (delta.shape() != shape_) return false;
  for (std::size_t p = 0; p < low_.size(); ++p) {
    if (delta[p] < low_[p] || delta[p] > high_[p]) return false;
  }
  return true;
}

Norm parse_norm(const std::string& text) {
  if (text == "0") return Norm::L0;
  if (text == "1") return Norm::L1;
  if (text == "2") return Norm::L2;
  if (text == "inf" || text == "Inf" || text == "INF") return Norm::LInf;
  throw std::invalid_argument("unknown norm order '" + text + "' (expected 0, 1, 2 or inf)");
}

IntegerImage apply_perturbation(const IntegerImage& d, const Perturbation& delta) {
  require_same_shape(d.shape(), delta.shape(), "apply_perturbation");
  std::vector<std::uint8_t> out(d.size());
  for (std::size_t p = 0; p < d.size(); ++p) {
    out[p] = static_cast<std::uint8_t>(std::clamp(int{d[p]} + delta[p], 0, 255));
  }
  return IntegerImage(d.shape(), std::move(out));
}

double distance_integer(const IntegerImage& a, const IntegerImage& b, Norm norm) {
  require_same_shape(a.shape(), b.shape(), "distance_integer");
  return norm_of(a.size(), [&](std::size_t p) { return double(int{a[p]} - int{b[p]}); }, norm);
}

double distance_real(const RealImage& a, const RealImage& b, Norm norm) {
  require_same_shape(a.shape(), b.shape(), "distance_real");
  return norm_of(a.size(), [&](std::size_t p) { return a[p] - b[p]; }, norm);
}

Perturbation upscale_perturbation(const Perturbation& reduced, const ImageShape& target) {
  validate(target);
  const ImageShape& src = reduced.shape();
  if (src.channels != target.channels) {
    throw std::invalid_argument("upscale_perturbation: channel mismatch " + src.str() + " -> " +
                                target.str());
  }
  if (src.width > target.width || src.height > target.height) {
    throw std::invalid_argument("upscale_perturbation: target " + target.str() +
                                " is smaller than " + src.str());
  }
  if (src == target) return reduced;

  auto source_pos = [](int i, int n_in, int n_out) {
    if (n_out == 1) return 0.0;
    return static_cast<double>(i) * (n_in - 1) / (n_out - 1);
  };

  const int eps = reduced.budget();
  std::vector<int> out(target.size());
  for (int y = 0; y < target.height; ++y) {
    const double sy = source_pos(y, src.height, target.height);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = sy - y0;
    for (int x = 0; x < target.width; ++x) {
      const double sx = source_pos(x, src.width, target.width);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = sx - x0;
      for (int c = 0; c < target.channels; ++c) {
        const double top = (1.0 - wx) * reduced[src.index(x0, y0, c)] + wx * reduced[src.index(x1, y0, c)];
        const double bottom = (1.0 - wx) * reduced[src.index(x0, y1, c)] + wx * reduced[src.index(x1, y1, c)];
        const double v = (1.0 - wy) * top + wy * bottom;
        out[target.index(x, y, c)] = std::clamp(round_away(v), -eps, eps);
      }
    }
  }
  return Perturbation(target, eps, std::move(out));
}

}  // namespace dfa
