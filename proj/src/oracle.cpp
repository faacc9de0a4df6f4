#include "dfa/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dfa/errors.hpp"

namespace dfa {

ProbabilityVector::ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw std::invalid_argument("probability vector needs at least 2 classes");
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("probability vector entry must be finite and nonnegative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw std::invalid_argument("probability vector sums to " + std::to_string(sum));
  }
}

RankedClass top_j(const ProbabilityVector& p, std::size_t j) {
  if (j < 1 || j > p.size()) {
    throw std::invalid_argument("top_j: rank " + std::to_string(j) + " outside [1, " +
                                std::to_string(p.size()) + "]");
  }
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  const std::size_t label = order[j - 1];
  return {label, p[label]};
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

void require_input_shape(const ImageShape& expected, const ImageShape& actual) {
  if (expected != actual) {
    throw std::invalid_argument("oracle expects " + expected.str() + " input, got " +
                                actual.str());
  }
}

ProbabilityVector QueryCounter::predict(const IntegerImage& d) const {
  require_input_shape(wrapped_->input_shape(), d.shape());
  count_.fetch_add(1);
  return wrapped_->predict(d);
}

SyntheticSumOracle::SyntheticSumOracle(ImageShape shape, std::int64_t threshold,
                                       double sharpness, NormalizationScheme scheme)
    : shape_(shape), threshold_(threshold), sharpness_(sharpness), scheme_(std::move(scheme)) {
  validate(shape_);
  if (!(sharpness_ > 0.0) || !std::isfinite(sharpness_)) {
    throw ConfigError("synthetic oracle sharpness must be positive");
  }
  scheme_.validate(shape_.channels);
}

ProbabilityVector SyntheticSumOracle::from_sum(double pixel_sum) const {
  const double z = sharpness_ * (pixel_sum - static_cast<double>(threshold_)) /
                   static_cast<double>(shape_.size());
  const double logits[2] = {z, -z};
  return ProbabilityVector(softmax(logits));
}

ProbabilityVector SyntheticSumOracle::predict(const IntegerImage& d) const {
  require_input_shape(shape_, d.shape());
  std::int64_t sum = 0;
  for (auto v : d.values()) sum += v;
  return from_sum(static_cast<double>(sum));
}

ProbabilityVector SyntheticSumOracle::predict_real(const RealImage& v) const {
  require_input_shape(shape_, v.shape());
  double sum = 0.0;
  for (std::size_t p = 0; p < v.size(); ++p) {
    double pixel = scheme_.inverse(v[p], static_cast<int>(p % shape_.channels));
    // Same grid tolerance as denormalize: normalize(d) must score exactly like d.
    if (std::abs(pixel - std::round(pixel)) <= 1e-7) pixel = std::round(pixel);
    sum += pixel;
  }
  return from_sum(sum);
}

}  // namespace dfa
