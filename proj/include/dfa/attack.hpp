#ifndef DFA_ATTACK_HPP
#define DFA_ATTACK_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "dfa/image.hpp"
#include "dfa/oracle.hpp"

namespace dfa {

/// The attack's only random source. One stream per attack.
using Rng = std::mt19937_64;

enum class AttackKind {
  Untargeted,  // degree 1 - Top_2 while the label holds
  Targeted,    // degree 1 - P(target) until the target wins
  Top1Only,    // degree Top_1 while the label holds; uses only the top-1 output
};

struct AttackMode {
  AttackKind kind = AttackKind::Untargeted;
  std::size_t target = 0;  // Targeted only

  static AttackMode untargeted() { return {AttackKind::Untargeted, 0}; }
  static AttackMode targeted(std::size_t c) { return {AttackKind::Targeted, c}; }
  static AttackMode top1_only() { return {AttackKind::Top1Only, 0}; }
};

struct AttackConfig {
  AttackMode mode;
  int budget = 10;              // L-infinity bound, integer pixel units
  int sample_size = 3;          // s: new samples per iteration
  int ranking_threshold = 2;    // k: size of the positive set
  int coordinate_threshold = 2; // u: coordinates refined per new sample
  int iterations = 30000;       // T
  std::optional<std::chrono::milliseconds> timeout;
  std::optional<std::uint64_t> query_budget;
  std::optional<ImageShape> resize;  // reduced search shape
  std::uint64_t seed = 0;
  /// Reuse degrees of previously seen perturbations without querying.
  /// Breaks the (s+k) + s*t query identity.
  bool cache = false;
  /// f_t(d), when already known. Otherwise run_attack spends one probe query.
  std::optional<std::size_t> clean_label;
  /// Ground-truth label. When it differs from f_t(d) (untargeted modes) the
  /// input is already adversarial and the attack returns immediately.
  std::optional<std::size_t> true_label;
};

/// Throws ConfigError on violated invariants (s, k, u, T, budget >= 1;
/// u within the working shape; resize channels and extent; query budget
/// covering the initial population).
void validate(const AttackConfig& config, const ImageShape& image_shape);

struct ScoredPerturbation {
  Perturbation delta;
  double degree = 1.0;
};

struct AttackOutcome {
  bool success = false;
  std::optional<IntegerImage> adversarial;
  Perturbation final_perturbation;  // full image size
  double final_degree = 1.0;
  std::size_t iterations_used = 0;
  std::uint64_t queries_used = 0;   // evaluations of candidate perturbations
  std::uint64_t probe_queries = 0;  // clean-image label probe (0 or 1)
  std::chrono::nanoseconds elapsed{0};
  std::vector<double> degree_trace;  // best-so-far after init and each iteration
  std::size_t clean_label = 0;
};

/// Degree of dissatisfaction in [0, 1] of already-computed probabilities
/// of d (+) delta; 0 exactly when the mode's goal is met.
double dissatisfaction_from(const ProbabilityVector& probs, const AttackMode& mode,
                            std::size_t original_label);

/// Queries the oracle once on d (+) delta and scores the result.
double dissatisfaction(const ClassifierOracle& oracle, const IntegerImage& d,
                       const Perturbation& delta, const AttackMode& mode,
                       std::size_t original_label);

/// Whether `probs` meets the mode's success predicate.
bool attack_succeeded(const ProbabilityVector& probs, const AttackMode& mode,
                      std::size_t original_label);

/// n perturbations drawn coordinatewise uniformly from the space.
std::vector<Perturbation> initial_sample(const SearchSpace& space, std::size_t n, Rng& rng);

struct Partition {
  std::vector<ScoredPerturbation> positive;  // k smallest degrees
  std::vector<ScoredPerturbation> negative;  // the rest
};

/// Splits B into its k best members (stable on ties) and the rest.
/// Requires 1 <= k < |B|.
Partition partition(const std::vector<ScoredPerturbation>& population, std::size_t k);

struct Refinement {
  SearchSpace space;
  std::vector<std::size_t> touched;  // Y, in selection order
};

/// Picks u distinct coordinates and shrinks the space at each of them away
/// from the majority side of the negative samples, keeping b_plus feasible.
/// Consumes the rng as: u coordinate picks, then one interval draw per
/// coordinate where a bound moves.
Refinement refine_space(const SearchSpace& space, const Perturbation& b_plus,
                        std::span<const ScoredPerturbation> negatives, std::size_t u, Rng& rng);

/// Copy of b_plus with every touched coordinate redrawn inside the refined bounds.
Perturbation sample_refined(const Perturbation& b_plus, const SearchSpace& refined,
                            const std::vector<std::size_t>& touched, Rng& rng);

/// The full derivative-free discrete search. With config.resize set the
/// search runs in the reduced shape and each candidate is upscaled only for
/// evaluation.
AttackOutcome run_attack(const ClassifierOracle& oracle, const IntegerImage& d,
                         const AttackConfig& config);

}  // namespace dfa

#endif  // DFA_ATTACK_HPP
