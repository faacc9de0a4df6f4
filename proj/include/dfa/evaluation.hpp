#ifndef DFA_EVALUATION_HPP
#define DFA_EVALUATION_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dfa/attack.hpp"
#include "dfa/image.hpp"
#include "dfa/normalization.hpp"
#include "dfa/oracle.hpp"

namespace dfa {

/// Mean squared difference on the unit scale: mean(((a - b) / 255)^2).
double mse(const IntegerImage& original, const IntegerImage& adversarial);

/// FNV-1a over shape and pixels; stable image identity for seeding.
std::uint64_t content_hash(const IntegerImage& d);

/// Per-image attack seed: base + content_hash(d) (wrapping).
std::uint64_t derive_seed(std::uint64_t base, const IntegerImage& d);

struct ImageRecord {
  std::size_t id = 0;
  bool real_success = false;     // counted in N_v
  bool integer_success = false;  // counted in N_i
  std::size_t clean_label = 0;
  std::optional<std::size_t> target;
  std::optional<AttackOutcome> outcome;  // native attack runs only
  std::optional<double> mse;             // integer successes only
  std::optional<double> discretization_error;  // gap study only
  std::uint64_t seed = 0;
  std::string error;  // non-empty when the image failed with a diagnostic
};

struct BatchReport {
  std::vector<ImageRecord> records;
  std::size_t n = 0;
  std::size_t n_real = 0;
  std::size_t n_integer = 0;
  double sr = 0.0;
  double tsr = 0.0;
  double gap = 0.0;  // (sr - tsr) / sr, 0 when sr == 0
  std::optional<double> avg_queries;  // over integer successes with an attack outcome
  std::optional<double> atc_s;        // seconds per integer success
  std::optional<double> avg_mse;      // over integer successes
};

/// Recomputes every aggregate from the records.
BatchReport aggregate(std::vector<ImageRecord> records);

struct BatchOptions {
  std::size_t workers = 1;
  /// Targeted mode: choose each image's target as the class with this rank
  /// (1-based) in its clean prediction, overriding config.mode.target.
  std::optional<std::size_t> target_rank;
  /// Optional ground-truth labels, aligned with the image list.
  std::vector<std::size_t> true_labels;
};

/// Attacks every image with a seed derived from config.seed and its content.
/// Each image costs one clean probe query in addition to the attack's own.
/// Per-image failures become records with `error` set; the batch continues.
BatchReport run_batch(const ClassifierOracle& oracle, const std::vector<IntegerImage>& images,
                      const AttackConfig& config, const BatchOptions& options = {});

struct GapStudyOptions {
  AttackMode mode;
  /// Clean labels f_t(d); queried from the oracle when empty.
  std::vector<std::size_t> labels;
  /// Per-image targets for targeted mode; mode.target is used when empty.
  std::vector<std::size_t> targets;
};

/// Scores real-valued adversarial examples before (N_v) and after (N_i)
/// denormalization with `scheme`. An image counts towards N_i only when it
/// also counts towards N_v.
BatchReport gap_study(const RealInputClassifier& oracle, const std::vector<IntegerImage>& originals,
                      const std::vector<RealImage>& real_advs, const NormalizationScheme& scheme,
                      const GapStudyOptions& options);

/// Line-delimited JSON: one "image" record per image, then one "aggregate"
/// record. With `timing` false the wall-clock fields are written as null so
/// identical runs produce identical bytes.
void write_report(const BatchReport& report, std::ostream& out, bool timing = true);

/// One aggregate line tagged with a sweep parameter and value.
void write_sweep_row(const BatchReport& report, const std::string& param, long long value,
                     std::ostream& out, bool timing = true);

}  // namespace dfa

#endif  // DFA_EVALUATION_HPP
