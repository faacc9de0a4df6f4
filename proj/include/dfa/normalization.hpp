#ifndef DFA_NORMALIZATION_HPP
#define DFA_NORMALIZATION_HPP

#include <string>
#include <vector>

#include "dfa/image.hpp"

namespace dfa {

enum class NormalizationVariant {
  Unit,          // r = i / 255
  CenteredHalf,  // r = i / 255 - 0.5
  CenteredOne,   // r = 2i / 255 - 1
  MeanSubtract,  // r = i - mean[c]
  MeanStd,       // r = (i - mean[c]) / std[c]
};

enum class Rounding { NearestHalfAwayFromZero, Floor, Ceil };

/// An affine per-channel normalizer and its inverse.
///
/// Dataset-dependent variants with an extra scale factor or a variance
/// offset are expressed as MeanStd by folding the constants into std.
struct NormalizationScheme {
  NormalizationVariant variant = NormalizationVariant::Unit;
  std::vector<double> mean;
  std::vector<double> stddev;
  Rounding rounding = Rounding::NearestHalfAwayFromZero;

  static NormalizationScheme unit(Rounding r = Rounding::NearestHalfAwayFromZero);
  static NormalizationScheme centered_half(Rounding r = Rounding::NearestHalfAwayFromZero);
  static NormalizationScheme centered_one(Rounding r = Rounding::NearestHalfAwayFromZero);
  static NormalizationScheme mean_subtract(std::vector<double> mean,
                                           Rounding r = Rounding::NearestHalfAwayFromZero);
  static NormalizationScheme mean_std(std::vector<double> mean, std::vector<double> stddev,
                                      Rounding r = Rounding::NearestHalfAwayFromZero);

  /// Throws ConfigError if the parameters do not fit `channels`.
  void validate(int channels) const;

  /// Normalized value of pixel intensity `i` in channel `c`.
  double forward(double i, int c) const;
  /// Exact affine inverse (no rounding).
  double inverse(double r, int c) const;

  friend bool operator==(const NormalizationScheme&, const NormalizationScheme&) = default;
};

std::string to_string(NormalizationVariant v);
std::string to_string(Rounding r);
NormalizationVariant parse_variant(const std::string& name);
Rounding parse_rounding(const std::string& name);

/// Textual form shared by weight files and the CLI:
///   "<variant> [mean...] [std...] <rounding>"
/// with `channels` means for mean_subtract and `channels` means followed by
/// `channels` stds for mean_std.
std::string format_scheme(const NormalizationScheme& scheme);
NormalizationScheme parse_scheme(const std::string& text, int channels);

RealImage normalize(const IntegerImage& d, const NormalizationScheme& scheme);

/// Inverts the scheme, applies its rounding and clamps to [0, 255].
/// Throws std::invalid_argument on non-finite input.
IntegerImage denormalize(const RealImage& v, const NormalizationScheme& scheme);

/// max_p |normalize(denormalize(v))[p] - v[p]|, in normalized units.
double discretization_error(const RealImage& v, const NormalizationScheme& scheme);

}  // namespace dfa

#endif  // DFA_NORMALIZATION_HPP
