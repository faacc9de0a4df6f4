#ifndef DFA_ORACLE_HPP
#define DFA_ORACLE_HPP

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "dfa/image.hpp"
#include "dfa/normalization.hpp"

namespace dfa {

/// Classifier output: C >= 2 nonnegative entries summing to 1 (within 1e-6).
class ProbabilityVector {
 public:
  static constexpr double kSumTolerance = 1e-6;

  /// Throws std::invalid_argument when the invariants do not hold.
  explicit ProbabilityVector(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t c) const { return probs_[c]; }
  std::span<const double> values() const { return probs_; }

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

 private:
  std::vector<double> probs_;
};

struct RankedClass {
  std::size_t label;
  double probability;
};

/// The class with the j-th largest probability (1-based). Equal
/// probabilities rank the lower class index first.
RankedClass top_j(const ProbabilityVector& p, std::size_t j);

/// Numerically stable softmax (max logit subtracted first).
std::vector<double> softmax(std::span<const double> logits);

/// Black-box integer image classifier. Implementations must be deterministic
/// and safe to call concurrently.
class ClassifierOracle {
 public:
  virtual ~ClassifierOracle() = default;
  virtual ProbabilityVector predict(const IntegerImage& d) const = 0;
  virtual std::size_t class_count() const = 0;
  virtual ImageShape input_shape() const = 0;
};

/// A classifier that also exposes its real-domain entry point, i.e. the
/// network behind the normalizer. Used to score real-valued adversarial
/// examples before they are denormalized.
class RealInputClassifier : public ClassifierOracle {
 public:
  virtual ProbabilityVector predict_real(const RealImage& v) const = 0;
  virtual const NormalizationScheme& normalization() const = 0;
};

/// Counts predict calls on a wrapped oracle. The count is atomic, so one
/// counter may be shared by concurrent callers.
class QueryCounter : public ClassifierOracle {
 public:
  explicit QueryCounter(const ClassifierOracle& wrapped) : wrapped_(&wrapped) {}

  ProbabilityVector predict(const IntegerImage& d) const override;
  std::size_t class_count() const override { return wrapped_->class_count(); }
  ImageShape input_shape() const override { return wrapped_->input_shape(); }

  std::uint64_t count() const { return count_.load(); }
  void reset() { count_.store(0); }

 private:
  const ClassifierOracle* wrapped_;
  mutable std::atomic<std::uint64_t> count_{0};
};

/// Shape check shared by oracle implementations.
void require_input_shape(const ImageShape& expected, const ImageShape& actual);

/// Two-class test oracle driven by the pixel sum:
///   probs = softmax(sharpness * (sum - threshold) * [+1, -1] / |P|).
/// Class 0 wins once the sum reaches the threshold (ties go to class 0).
/// The real-domain entry point maps values back to continuous pixel units
/// with the attached scheme's exact affine inverse before summing.
class SyntheticSumOracle : public RealInputClassifier {
 public:
  SyntheticSumOracle(ImageShape shape, std::int64_t threshold, double sharpness,
                     NormalizationScheme scheme = NormalizationScheme::unit());

  ProbabilityVector predict(const IntegerImage& d) const override;
  ProbabilityVector predict_real(const RealImage& v) const override;
  std::size_t class_count() const override { return 2; }
  ImageShape input_shape() const override { return shape_; }
  const NormalizationScheme& normalization() const override { return scheme_; }

  std::int64_t threshold() const { return threshold_; }
  double sharpness() const { return sharpness_; }

 private:
  ProbabilityVector from_sum(double pixel_sum) const;

  ImageShape shape_;
  std::int64_t threshold_;
  double sharpness_;
  NormalizationScheme scheme_;
};

}  // namespace dfa

#endif  // DFA_ORACLE_HPP
