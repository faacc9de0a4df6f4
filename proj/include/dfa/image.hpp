#ifndef DFA_IMAGE_HPP
#define DFA_IMAGE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dfa {

/// Image geometry. Pixel data everywhere in this library is stored row-major
/// with interleaved channels: index(x, y, c) = (y * width + x) * channels + c.
struct ImageShape {
  int width = 1;
  int height = 1;
  int channels = 1;

  ImageShape() = default;
  ImageShape(int w, int h, int ch);

  std::size_t size() const {
    return static_cast<std::size_t>(width) * height * channels;
  }
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::string str() const;

  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Throws std::invalid_argument unless width, height >= 1 and channels is 1 or 3.
void validate(const ImageShape& shape);

/// A valid image in the discrete pixel domain. The uint8_t storage makes the
/// [0, 255] range structural.
class IntegerImage {
 public:
  IntegerImage() = default;
  explicit IntegerImage(ImageShape shape, std::uint8_t fill = 0);
  IntegerImage(ImageShape shape, std::vector<std::uint8_t> values);
  /// Checked construction from wider integers; any value outside [0, 255]
  /// raises std::invalid_argument.
  static IntegerImage from_ints(ImageShape shape, std::span<const int> values);

  const ImageShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::span<const std::uint8_t> values() const { return values_; }
  std::span<std::uint8_t> values() { return values_; }
  std::uint8_t operator[](std::size_t i) const { return values_[i]; }
  std::uint8_t& operator[](std::size_t i) { return values_[i]; }

  friend bool operator==(const IntegerImage&, const IntegerImage&) = default;

 private:
  ImageShape shape_;
  std::vector<std::uint8_t> values_;
};

/// An image in a continuous (normalized) domain.
class RealImage {
 public:
  RealImage() = default;
  explicit RealImage(ImageShape shape, double fill = 0.0);
  /// Throws std::invalid_argument on length mismatch or non-finite values.
  RealImage(ImageShape shape, std::vector<double> values);

  const ImageShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const RealImage&, const RealImage&) = default;

 private:
  ImageShape shape_;
  std::vector<double> values_;
};

/// Integer offsets bounded by a budget: every value lies in [-budget, budget].
class Perturbation {
 public:
  Perturbation() = default;
  /// All-zero perturbation.
  Perturbation(ImageShape shape, int budget);
  Perturbation(ImageShape shape, int budget, std::vector<int> values);

  const ImageShape& shape() const { return shape_; }
  int budget() const { return budget_; }
  std::size_t size() const { return values_.size(); }
  std::span<const int> values() const { return values_; }
  int operator[](std::size_t i) const { return values_[i]; }
  /// Bounds-checked against the budget.
  void set(std::size_t i, int value);

  friend bool operator==(const Perturbation&, const Perturbation&) = default;

 private:
  ImageShape shape_;
  int budget_ = 0;
  std::vector<int> values_;
};

/// Per-coordinate integer intervals [low, high] inside [-budget, budget].
class SearchSpace {
 public:
  SearchSpace() = default;
  /// The full space: every interval is [-budget, budget].
  SearchSpace(ImageShape shape, int budget);

  const ImageShape& shape() const { return shape_; }
  int budget() const { return budget_; }
  std::size_t size() const { return low_.size(); }
  int low(std::size_t p) const { return low_[p]; }
  int high(std::size_t p) const { return high_[p]; }
  /// Throws std::invalid_argument unless -budget <= low <= high <= budget.
  void set_bounds(std::size_t p, int low, int high);
  void set_low(std::size_t p, int low) { set_bounds(p, low, high_[p]); }
  void set_high(std::size_t p, int high) { set_bounds(p, low_[p], high); }
  bool contains(const Perturbation& delta) const;

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;

 private:
  ImageShape shape_;
  int budget_ = 0;
  std::vector<int> low_;
  std::vector<int> high_;
};

enum class Norm { L0, L1, L2, LInf };

/// Parses "0", "1", "2", "inf".
Norm parse_norm(const std::string& text);

/// Clipped addition: result[p] = clamp(d[p] + delta[p], 0, 255).
IntegerImage apply_perturbation(const IntegerImage& d, const Perturbation& delta);

/// Distance between integer images in pixel units. L0, L1 and LInf are exact
/// integers widened to double.
double distance_integer(const IntegerImage& a, const IntegerImage& b, Norm norm);

/// Norm of the coordinatewise difference of two real images.
double distance_real(const RealImage& a, const RealImage& b, Norm norm);

/// Bilinear upscaling of a reduced-resolution perturbation, channel by channel.
///
/// Uses the align-corners convention: output sample i along an axis of
/// length n_out reads source position i * (n_in - 1) / (n_out - 1), so the
/// four corner samples coincide with the source corners. Interpolated values
/// are rounded half away from zero and clamped to [-budget, budget].
Perturbation upscale_perturbation(const Perturbation& reduced, const ImageShape& target);

}  // namespace dfa

#endif  // DFA_IMAGE_HPP
