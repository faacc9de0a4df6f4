#include "dfa/attack.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dfa/errors.hpp"

namespace dfa {

namespace {

int draw(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// u distinct indices from [0, n), in draw order.
std::vector<std::size_t> pick_coordinates(std::size_t n, std::size_t u, Rng& rng) {
  std::vector<std::size_t> picked;
  picked.reserve(u);
  if (u * 4 <= n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    while (picked.size() < u) {
      const std::size_t p = dist(rng);
      if (std::find(picked.begin(), picked.end(), p) == picked.end()) picked.push_back(p);
    }
    return picked;
  }
  // Dense case: partial Fisher-Yates.
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < u; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
    std::swap(all[i], all[j]);
    picked.push_back(all[i]);
  }
  return picked;
}

void sort_by_degree(std::vector<ScoredPerturbation>& population) {
  std::stable_sort(population.begin(), population.end(),
                   [](const ScoredPerturbation& a, const ScoredPerturbation& b) {
                     return a.degree < b.degree;
                   });
}

}  // namespace

void validate(const AttackConfig& config, const ImageShape& image_shape) {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(config.budget, "budget (eps)");
  positive(config.sample_size, "sample size s");
  positive(config.ranking_threshold, "ranking threshold k");
  positive(config.coordinate_threshold, "coordinate threshold u");
  positive(config.iterations, "iteration threshold T");

  ImageShape working = image_shape;
  if (config.resize) {
    const ImageShape& r = *config.resize;
    try {
      validate(r);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("resize: ") + e.what());
    }
    if (r.channels != image_shape.channels) {
      throw ConfigError("resize shape " + r.str() + " must keep the image's " +
                        std::to_string(image_shape.channels) + " channel(s)");
    }
    if (r.width > image_shape.width || r.height > image_shape.height) {
      throw ConfigError("resize shape " + r.str() + " is larger than the image " +
                        image_shape.str());
    }
    working = r;
  }
  if (static_cast<std::size_t>(config.coordinate_threshold) > working.size()) {
    throw ConfigError("coordinate threshold u = " + std::to_string(config.coordinate_threshold) +
                      " exceeds the " + std::to_string(working.size()) +
                      " coordinates of the search shape " + working.str());
  }
  if (config.query_budget &&
      *config.query_budget <
          static_cast<std::uint64_t>(config.sample_size + config.ranking_threshold)) {
    throw ConfigError("query budget must cover the initial s + k evaluations");
  }
  if (config.timeout && config.timeout->count() < 0) {
    throw ConfigError("timeout must be nonnegative");
  }
}

bool attack_succeeded(const ProbabilityVector& probs, const AttackMode& mode,
                      std::size_t original_label) {
  const std::size_t top = top_j(probs, 1).label;
  if (mode.kind == AttackKind::Targeted) return top == mode.target;
  return top != original_label;
}

double dissatisfaction_from(const ProbabilityVector& probs, const AttackMode& mode,
                            std::size_t original_label) {
  if (mode.kind == AttackKind::Targeted && mode.target >= probs.size()) {
    throw std::invalid_argument("target class " + std::to_string(mode.target) +
                                " outside the oracle's " + std::to_string(probs.size()) +
                                " classes");
  }
  if (attack_succeeded(probs, mode, original_label)) return 0.0;
  switch (mode.kind) {
    case AttackKind::Untargeted: return 1.0 - top_j(probs, 2).probability;
    case AttackKind::Targeted: return 1.0 - probs[mode.target];
    case AttackKind::Top1Only: return top_j(probs, 1).probability;
  }
  return 1.0;
}

double dissatisfaction(const ClassifierOracle& oracle, const IntegerImage& d,
                       const Perturbation& delta, const AttackMode& mode,
                       std::size_t original_label) {
  return dissatisfaction_from(oracle.predict(apply_perturbation(d, delta)), mode, original_label);
}

std::vector<Perturbation> initial_sample(const SearchSpace& space, std::size_t n, Rng& rng) {
  std::vector<Perturbation> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> values(space.size());
    for (std::size_t p = 0; p < values.size(); ++p) values[p] = draw(rng, space.low(p), space.high(p));
    out.emplace_back(space.shape(), space.budget(), std::move(values));
  }
  return out;
}

Partition partition(const std::vector<ScoredPerturbation>& population, std::size_t k) {
  if (k < 1 || k >= population.size()) {
    throw std::invalid_argument("partition: k = " + std::to_string(k) +
                                " must lie in [1, " + std::to_string(population.size()) + ")");
  }
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return population[a].degree < population[b].degree;
  });
  Partition out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < k ? out.positive : out.negative).push_back(population[order[i]]);
  }
  return out;
}

Refinement refine_space(const SearchSpace& space, const Perturbation& b_plus,
                        std::span<const ScoredPerturbation> negatives, std::size_t u, Rng& rng) {
  if (b_plus.shape() != space.shape()) {
    throw std::invalid_argument("refine_space: positive sample shape mismatch");
  }
  for (const auto& b : negatives) {
    if (b.delta.shape() != space.shape()) {
      throw std::invalid_argument("refine_space: negative sample shape mismatch");
    }
  }
  if (u < 1 || u > space.size()) {
    throw std::invalid_argument("refine_space: u = " + std::to_string(u) + " outside [1, " +
                                std::to_string(space.size()) + "]");
  }

  Refinement out{space, pick_coordinates(space.size(), u, rng)};
  for (std::size_t p : out.touched) {
    const int anchor = b_plus[p];
    std::size_t greater = 0;
    std::size_t less = 0;
    int min_greater = space.budget();
    int max_less = -space.budget();
    for (const auto& b : negatives) {
      const int v = b.delta[p];
      if (v > anchor) {
        ++greater;
        min_greater = std::min(min_greater, v);
      } else if (v < anchor) {
        ++less;
        max_less = std::max(max_less, v);
      }
    }
    const int low = out.space.low(p);
    const int high = out.space.high(p);
    if (greater > less) {
      // Most negatives sit above b_plus: pull the upper bound down.
      const int r = draw(rng, anchor, min_greater);
      out.space.set_high(p, std::clamp(r, low, high));
    } else if (less > 0) {
      const int r = draw(rng, max_less, anchor);
      out.space.set_low(p, std::clamp(r, low, high));
    }
    // Neither side populated: no evidence, bounds stay.
  }
  return out;
}

Perturbation sample_refined(const Perturbation& b_plus, const SearchSpace& refined,
                            const std::vector<std::size_t>& touched, Rng& rng) {
  if (b_plus.shape() != refined.shape()) {
    throw std::invalid_argument("sample_refined: shape mismatch");
  }
  std::vector<int> values(b_plus.values().begin(), b_plus.values().end());
  for (std::size_t p : touched) values.at(p) = draw(rng, refined.low(p), refined.high(p));
  return Perturbation(b_plus.shape(), b_plus.budget(), std::move(values));
}

AttackOutcome run_attack(const ClassifierOracle& oracle, const IntegerImage& d,
                         const AttackConfig& config) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  validate(config, d.shape());
  require_input_shape(oracle.input_shape(), d.shape());
  if (config.mode.kind == AttackKind::Targeted && config.mode.target >= oracle.class_count()) {
    throw ConfigError("target class " + std::to_string(config.mode.target) + " outside the " +
                      std::to_string(oracle.class_count()) + " classes of the oracle");
  }

  const ImageShape working = config.resize.value_or(d.shape());
  const auto s = static_cast<std::size_t>(config.sample_size);
  const auto k = static_cast<std::size_t>(config.ranking_threshold);
  const auto u = static_cast<std::size_t>(config.coordinate_threshold);
  Rng rng(config.seed);

  AttackOutcome outcome;
  auto finish = [&](AttackOutcome& o) -> AttackOutcome& {
    o.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start);
    return o;
  };

  std::size_t label = 0;
  if (config.clean_label) {
    label = *config.clean_label;
  } else {
    label = top_j(oracle.predict(d), 1).label;
    outcome.probe_queries = 1;
  }
  outcome.clean_label = label;

  const bool already_done =
      config.mode.kind == AttackKind::Targeted
          ? label == config.mode.target
          : (config.true_label.has_value() && *config.true_label != label);
  if (already_done) {
    outcome.success = true;
    outcome.adversarial = d;
    outcome.final_perturbation = Perturbation(d.shape(), config.budget);
    outcome.final_degree = 0.0;
    outcome.degree_trace = {0.0};
    return finish(outcome);
  }

  auto to_full = [&](const Perturbation& delta) {
    return config.resize ? upscale_perturbation(delta, d.shape()) : delta;
  };
  std::map<std::vector<int>, double> memo;
  auto evaluate = [&](const Perturbation& delta) {
    if (config.cache) {
      std::vector<int> key(delta.values().begin(), delta.values().end());
      if (auto it = memo.find(key); it != memo.end()) return it->second;
      ++outcome.queries_used;
      const double deg = dissatisfaction(oracle, d, to_full(delta), config.mode, label);
      memo.emplace(std::move(key), deg);
      return deg;
    }
    ++outcome.queries_used;
    return dissatisfaction(oracle, d, to_full(delta), config.mode, label);
  };

  const SearchSpace full_space(working, config.budget);

  // Initial population B_0, kept sorted by degree (stable).
  std::vector<ScoredPerturbation> population;
  for (auto& delta : initial_sample(full_space, s + k, rng)) {
    const double deg = evaluate(delta);
    population.push_back({std::move(delta), deg});
  }
  sort_by_degree(population);
  outcome.degree_trace.push_back(population.front().degree);

  std::size_t t = 0;
  while (t < static_cast<std::size_t>(config.iterations)) {
    if (population.front().degree == 0.0) break;
    if (config.timeout && Clock::now() - start >= *config.timeout) break;
    if (config.query_budget && outcome.queries_used + s > *config.query_budget) break;

    const Partition parts = partition(population, k);
    std::vector<Perturbation> fresh;
    fresh.reserve(s);
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
      const Perturbation& b_plus = parts.positive[pick].delta;
      // Each new sample refines a fresh copy of the full space.
      const Refinement refined = refine_space(full_space, b_plus, parts.negative, u, rng);
      fresh.push_back(sample_refined(b_plus, refined.space, refined.touched, rng));
    }
    for (auto& delta : fresh) {
      const double deg = evaluate(delta);
      population.push_back({std::move(delta), deg});
    }
    sort_by_degree(population);
    population.resize(s + k);
    ++t;
    outcome.degree_trace.push_back(population.front().degree);
  }

  const ScoredPerturbation& best = population.front();
  outcome.iterations_used = t;
  outcome.final_degree = best.degree;
  outcome.final_perturbation = to_full(best.delta);
  outcome.success = best.degree == 0.0;
  if (outcome.success) outcome.adversarial = apply_perturbation(d, outcome.final_perturbation);
  return finish(outcome);
}

}  // namespace dfa
