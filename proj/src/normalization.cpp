#include "dfa/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dfa/errors.hpp"

namespace dfa {

namespace {

// Affine inverses land a hair off the integer grid (51/255*255 may be
// 50.99999999999999). Within this tolerance a value is treated as the grid
// point itself so floor and ceil keep the round trip exact.
constexpr double kGridSnap = 1e-7;

double apply_rounding(double x, Rounding rounding) {
  const double nearest = std::round(x);  // half away from zero
  if (std::abs(x - nearest) <= kGridSnap) return nearest;
  switch (rounding) {
    case Rounding::NearestHalfAwayFromZero: return nearest;
    case Rounding::Floor: return std::floor(x);
    case Rounding::Ceil: return std::ceil(x);
  }
  return nearest;
}

}  // namespace

NormalizationScheme NormalizationScheme::unit(Rounding r) {
  return {NormalizationVariant::Unit, {}, {}, r};
}
NormalizationScheme NormalizationScheme::centered_half(Rounding r) {
  return {NormalizationVariant::CenteredHalf, {}, {}, r};
}
NormalizationScheme NormalizationScheme::centered_one(Rounding r) {
  return {NormalizationVariant::CenteredOne, {}, {}, r};
}
NormalizationScheme NormalizationScheme::mean_subtract(std::vector<double> mean, Rounding r) {
  return {NormalizationVariant::MeanSubtract, std::move(mean), {}, r};
}
NormalizationScheme NormalizationScheme::mean_std(std::vector<double> mean,
                                                  std::vector<double> stddev, Rounding r) {
  return {NormalizationVariant::MeanStd, std::move(mean), std::move(stddev), r};
}

void NormalizationScheme::validate(int channels) const {
  const auto n = static_cast<std::size_t>(channels);
  const bool needs_mean = variant == NormalizationVariant::MeanSubtract ||
                          variant == NormalizationVariant::MeanStd;
  const bool needs_std = variant == NormalizationVariant::MeanStd;
  if (needs_mean && mean.size() != n) {
    throw ConfigError("normalization " + to_string(variant) + " needs " + std::to_string(n) +
                      " per-channel means, got " + std::to_string(mean.size()));
  }
  if (needs_std && stddev.size() != n) {
    throw ConfigError("normalization " + to_string(variant) + " needs " + std::to_string(n) +
                      " per-channel stds, got " + std::to_string(stddev.size()));
  }
  for (double m : mean) {
    if (!std::isfinite(m)) throw ConfigError("normalization mean must be finite");
  }
  for (double s : stddev) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ConfigError("normalization std must be finite and strictly positive");
    }
  }
}

double NormalizationScheme::forward(double i, int c) const {
  switch (variant) {
    case NormalizationVariant::Unit: return i / 255.0;
    case NormalizationVariant::CenteredHalf: return i / 255.0 - 0.5;
    case NormalizationVariant::CenteredOne: return 2.0 * i / 255.0 - 1.0;
    case NormalizationVariant::MeanSubtract: return i - mean[c];
    case NormalizationVariant::MeanStd: return (i - mean[c]) / stddev[c];
  }
  return i;
}

double NormalizationScheme::inverse(double r, int c) const {
  switch (variant) {
    case NormalizationVariant::Unit: return r * 255.0;
    case NormalizationVariant::CenteredHalf: return (r + 0.5) * 255.0;
    case NormalizationVariant::CenteredOne: return (r + 1.0) * 255.0 / 2.0;
    case NormalizationVariant::MeanSubtract: return r + mean[c];
    case NormalizationVariant::MeanStd: return r * stddev[c] + mean[c];
  }
  return r;
}

std::string to_string(NormalizationVariant v) {
  switch (v) {
    case NormalizationVariant::Unit: return "unit";
    case NormalizationVariant::CenteredHalf: return "centered_half";
    case NormalizationVariant::CenteredOne: return "centered_one";
    case NormalizationVariant::MeanSubtract: return "mean_subtract";
    case NormalizationVariant::MeanStd: return "mean_std";
  }
  return "?";
}

std::string to_string(Rounding r) {
  switch (r) {
    case Rounding::NearestHalfAwayFromZero: return "nearest";
    case Rounding::Floor: return "floor";
    case Rounding::Ceil: return "ceil";
  }
  return "?";
}

NormalizationVariant parse_variant(const std::string& name) {
  for (auto v : {NormalizationVariant::Unit, NormalizationVariant::CenteredHalf,
                 NormalizationVariant::CenteredOne, NormalizationVariant::MeanSubtract,
                 NormalizationVariant::MeanStd}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown normalization variant '" + name + "'");
}

Rounding parse_rounding(const std::string& name) {
  for (auto r : {Rounding::NearestHalfAwayFromZero, Rounding::Floor, Rounding::Ceil}) {
    if (to_string(r) == name) return r;
  }
  throw ConfigError("unknown rounding mode '" + name + "' (expected nearest, floor or ceil)");
}

std::string format_scheme(const NormalizationScheme& scheme) {
  std::ostringstream out;
  out.precision(17);
  out << to_string(scheme.variant);
  for (double m : scheme.mean) out << ' ' << m;
  for (double s : scheme.stddev) out << ' ' << s;
  out << ' ' << to_string(scheme.rounding);
  return out.str();
}

NormalizationScheme parse_scheme(const std::string& text, int channels) {
  std::istringstream in(text);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  if (tokens.empty()) throw ConfigError("empty normalization specification");

  NormalizationScheme scheme;
  scheme.variant = parse_variant(tokens.front());
  std::size_t expected_numbers = 0;
  if (scheme.variant == NormalizationVariant::MeanSubtract) expected_numbers = channels;
  if (scheme.variant == NormalizationVariant::MeanStd) expected_numbers = 2 * channels;

  const std::size_t numbers = tokens.size() - 1;
  std::size_t n_numeric = numbers;
  // Trailing rounding token is optional.
  if (numbers > 0) {
    const std::string& last = tokens.back();
    if (last == "nearest" || last == "floor" || last == "ceil") {
      scheme.rounding = parse_rounding(last);
      n_numeric = numbers - 1;
    }
  }
  if (n_numeric != expected_numbers) {
    throw ConfigError("normalization '" + text + "': expected " +
                      std::to_string(expected_numbers) + " numeric parameters for " +
                      std::to_string(channels) + " channel(s), got " + std::to_string(n_numeric));
  }
  std::vector<double> values;
  for (std::size_t i = 1; i <= n_numeric; ++i) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(tokens[i], &used));
      if (used != tokens[i].size()) throw std::invalid_argument(tokens[i]);
    } catch (const std::exception&) {
      throw ConfigError("normalization '" + text + "': bad number '" + tokens[i] + "'");
    }
  }
  const auto ch = static_cast<std::size_t>(channels);
  if (scheme.variant == NormalizationVariant::MeanSubtract) {
    scheme.mean = values;
  } else if (scheme.variant == NormalizationVariant::MeanStd) {
    scheme.mean.assign(values.begin(), values.begin() + ch);
    scheme.stddev.assign(values.begin() + ch, values.end());
  }
  scheme.validate(channels);
  return scheme;
}

RealImage normalize(const IntegerImage& d, const NormalizationScheme& scheme) {
  const ImageShape& shape = d.shape();
  scheme.validate(shape.channels);
  std::vector<double> out(d.size());
  for (std::size_t p = 0; p < d.size(); ++p) {
    out[p] = scheme.forward(d[p], static_cast<int>(p % shape.channels));
  }
  return RealImage(shape, std::move(out));
}

IntegerImage denormalize(const RealImage& v, const NormalizationScheme& scheme) {
  const ImageShape& shape = v.shape();
  scheme.validate(shape.channels);
  std::vector<std::uint8_t> out(v.size());
  for (std::size_t p = 0; p < v.size(); ++p) {
    if (!std::isfinite(v[p])) {
      throw std::invalid_argument("denormalize: non-finite value at " + std::to_string(p));
    }
    const double pixel = scheme.inverse(v[p], static_cast<int>(p % shape.channels));
    const double rounded = std::clamp(apply_rounding(pixel, scheme.rounding), 0.0, 255.0);
    out[p] = static_cast<std::uint8_t>(rounded);
  }
  return IntegerImage(shape, std::move(out));
}

double discretization_error(const RealImage& v, const NormalizationScheme& scheme) {
  const RealImage back = normalize(denormalize(v, scheme), scheme);
  double worst = 0.0;
  for (std::size_t p = 0; p < v.size(); ++p) worst = std::max(worst, std::abs(back[p] - v[p]));
  return worst;
}

}  // namespace dfa
