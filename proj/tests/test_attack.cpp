#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "dfa/attack.hpp"
#include "dfa/errors.hpp"
#include "test_util.hpp"

using namespace dfa;

namespace {

// Pixel-sum oracle whose clean class is 1 and which flips only when the sum
// gains `gap` units.
SyntheticSumOracle sum_oracle(const IntegerImage& d, std::int64_t gap, double sharpness = 4.0) {
  std::int64_t sum = 0;
  for (auto v : d.values()) sum += v;
  return SyntheticSumOracle(d.shape(), sum + gap, sharpness);
}

std::vector<ScoredPerturbation> scored(const ImageShape& shape, int eps,
                                       const std::vector<std::vector<int>>& rows) {
  std::vector<ScoredPerturbation> out;
  for (const auto& r : rows) out.push_back({Perturbation(shape, eps, r), 0.5});
  return out;
}

// Loop of the search written against the public primitives only.
struct ReferenceResult {
  Perturbation best;
  double degree;
  std::vector<double> trace;
  std::uint64_t queries;
};

ReferenceResult reference_attack(const ClassifierOracle& oracle, const IntegerImage& d,
                                 const AttackConfig& cfg) {
  const std::size_t label = *cfg.clean_label;
  const std::size_t s = cfg.sample_size, k = cfg.ranking_threshold, u = cfg.coordinate_threshold;
  Rng rng(cfg.seed);
  const SearchSpace space(d.shape(), cfg.budget);
  std::uint64_t queries = 0;
  auto score = [&](const Perturbation& p) {
    ++queries;
    return dissatisfaction(oracle, d, p, cfg.mode, label);
  };
  std::vector<ScoredPerturbation> pop;
  for (auto& p : initial_sample(space, s + k, rng)) pop.push_back({p, score(p)});
  auto best_of = [](const std::vector<ScoredPerturbation>& v) {
    return std::min_element(v.begin(), v.end(), [](auto& a, auto& b) { return a.degree < b.degree; });
  };
  std::vector<double> trace{best_of(pop)->degree};
  for (int t = 0; t < cfg.iterations && best_of(pop)->degree > 0.0; ++t) {
    const Partition parts = partition(pop, k);
    std::vector<Perturbation> fresh;
    for (std::size_t i = 0; i < s; ++i) {
      const auto& bp = parts.positive[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)].delta;
      const Refinement r = refine_space(space, bp, parts.negative, u, rng);
      fresh.push_back(sample_refined(bp, r.space, r.touched, rng));
    }
    // Keep the s + k best of old and new, old members first on ties.
    std::vector<ScoredPerturbation> merged = parts.positive;
    merged.insert(merged.end(), parts.negative.begin(), parts.negative.end());
    for (auto& f : fresh) merged.push_back({f, score(f)});
    std::stable_sort(merged.begin(), merged.end(),
                     [](auto& a, auto& b) { return a.degree < b.degree; });
    merged.resize(s + k);
    pop = merged;
    trace.push_back(best_of(pop)->degree);
  }
  return {best_of(pop)->delta, best_of(pop)->degree, trace, queries};
}

}  // namespace

TEST_CASE("dissatisfaction degree examples") {
  const ProbabilityVector p({0.1, 0.7, 0.2});
  CHECK(dissatisfaction_from(p, AttackMode::untargeted(), 1) == doctest::Approx(0.8));
  CHECK(dissatisfaction_from(p, AttackMode::untargeted(), 0) == 0.0);
  CHECK(dissatisfaction_from(p, AttackMode::targeted(0), 1) == doctest::Approx(0.9));
  CHECK(dissatisfaction_from(p, AttackMode::targeted(1), 1) == 0.0);
  CHECK(dissatisfaction_from(p, AttackMode::top1_only(), 1) == doctest::Approx(0.7));
  CHECK(dissatisfaction_from(p, AttackMode::top1_only(), 2) == 0.0);
  CHECK_THROWS_AS(dissatisfaction_from(p, AttackMode::targeted(3), 1), std::invalid_argument);
}

TEST_CASE("dissatisfaction stays in [0, 1] and is zero exactly on success") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> raw(2 + trial % 6);
    double total = 0;
    for (auto& x : raw) total += (x = unif(rng));
    for (auto& x : raw) x /= total;
    const ProbabilityVector p(raw);
    const std::size_t label = trial % raw.size();
    for (const AttackMode mode : {AttackMode::untargeted(), AttackMode::top1_only(),
                                  AttackMode::targeted((trial / 7) % raw.size())}) {
      const double deg = dissatisfaction_from(p, mode, label);
      CHECK(deg >= 0.0);
      CHECK(deg <= 1.0);
      CHECK((deg == 0.0) == attack_succeeded(p, mode, label));
    }
  }
}

TEST_CASE("initial sample respects the space") {
  Rng rng(5);
  SearchSpace space(ImageShape(3, 2, 1), 4);
  space.set_bounds(0, 2, 2);
  space.set_bounds(1, -4, -3);
  const auto sample = initial_sample(space, 500, rng);
  CHECK(sample.size() == 500);
  std::set<int> seen;
  for (const auto& p : sample) {
    CHECK(space.contains(p));
    CHECK(p[0] == 2);
    seen.insert(p[5]);
  }
  CHECK(seen.size() == 9);  // every value of [-4, 4] turns up
  CHECK(initial_sample(space, 0, rng).empty());
}

TEST_CASE("partition") {
  const ImageShape shape(1, 1, 1);
  std::vector<ScoredPerturbation> pop;
  const double degrees[] = {0.5, 0.2, 0.2, 0.9, 0.1};
  for (int i = 0; i < 5; ++i) pop.push_back({Perturbation(shape, 5, {i}), degrees[i]});
  const Partition parts = partition(pop, 2);
  REQUIRE(parts.positive.size() == 2);
  REQUIRE(parts.negative.size() == 3);
  CHECK(parts.positive[0].delta[0] == 4);
  CHECK(parts.positive[1].delta[0] == 1);  // first of the tied pair
  CHECK(parts.negative[0].delta[0] == 2);
  CHECK(parts.negative[1].delta[0] == 0);
  CHECK(parts.negative[2].delta[0] == 3);
  CHECK_THROWS_AS(partition(pop, 0), std::invalid_argument);
  CHECK_THROWS_AS(partition(pop, 5), std::invalid_argument);
}

TEST_CASE("refinement on a single coordinate") {
  const ImageShape shape(1, 1, 1);
  const SearchSpace space(shape, 10);

  SUBCASE("majority above lowers the upper bound") {
    const Perturbation bp(shape, 10, {3});
    const auto neg = scored(shape, 10, {{4}, {4}, {2}});
    std::set<int> highs;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      const Refinement r = refine_space(space, bp, neg, 1, rng);
      CHECK(r.touched == std::vector<std::size_t>{0});
      CHECK(r.space.low(0) == -10);
      highs.insert(r.space.high(0));
    }
    CHECK(highs == std::set<int>{3, 4});
  }
  SUBCASE("majority below raises the lower bound") {
    const Perturbation bp(shape, 10, {5});
    const auto neg = scored(shape, 10, {{2}, {2}, {9}});
    std::set<int> lows;
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
      Rng rng(seed);
      const Refinement r = refine_space(space, bp, neg, 1, rng);
      CHECK(r.space.high(0) == 10);
      lows.insert(r.space.low(0));
    }
    CHECK(lows == std::set<int>{2, 3, 4, 5});
  }
  SUBCASE("a tie moves the lower bound") {
    const Perturbation bp(shape, 10, {0});
    const auto neg = scored(shape, 10, {{-3}, {7}});
    Rng rng(1);
    const Refinement r = refine_space(space, bp, neg, 1, rng);
    CHECK(r.space.high(0) == 10);
    CHECK(r.space.low(0) >= -3);
    CHECK(r.space.low(0) <= 0);
  }
  SUBCASE("negatives equal to the anchor leave the bounds alone") {
    const Perturbation bp(shape, 10, {6});
    const auto neg = scored(shape, 10, {{6}, {6}, {6}});
    Rng rng(2);
    const Refinement r = refine_space(space, bp, neg, 1, rng);
    CHECK(r.space.low(0) == -10);
    CHECK(r.space.high(0) == 10);
  }
  SUBCASE("no negatives at all") {
    Rng rng(2);
    const Refinement r = refine_space(space, Perturbation(shape, 10, {6}), {}, 1, rng);
    CHECK(r.space.low(0) == -10);
    CHECK(r.space.high(0) == 10);
  }
}

TEST_CASE("refinement and resampling invariants") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 3000; ++trial) {
    const ImageShape shape(1 + trial % 4, 1 + (trial / 4) % 3, trial % 5 == 0 ? 3 : 1);
    const int eps = 1 + trial % 12;
    SearchSpace space(shape, eps);
    // Start from an already-narrowed space now and then.
    if (trial % 3 == 0) {
      for (std::size_t p = 0; p < space.size(); ++p) {
        const int a = std::uniform_int_distribution<int>(-eps, eps)(gen);
        const int b = std::uniform_int_distribution<int>(-eps, eps)(gen);
        space.set_bounds(p, std::min(a, b), std::max(a, b));
      }
    }
    Rng rng(gen());
    const Perturbation bp = initial_sample(space, 1, rng).front();
    std::vector<ScoredPerturbation> neg;
    for (auto& p : initial_sample(SearchSpace(shape, eps), 1 + trial % 5, rng)) neg.push_back({p, 0.9});
    const std::size_t u = 1 + trial % shape.size();

    const Refinement r = refine_space(space, bp, neg, u, rng);
    CHECK(r.touched.size() == u);
    CHECK(std::set<std::size_t>(r.touched.begin(), r.touched.end()).size() == u);
    CHECK(r.space.contains(bp));
    for (std::size_t p = 0; p < space.size(); ++p) {
      CHECK(r.space.low(p) >= space.low(p));
      CHECK(r.space.high(p) <= space.high(p));
      const bool touched = std::find(r.touched.begin(), r.touched.end(), p) != r.touched.end();
      if (!touched) {
        CHECK(r.space.low(p) == space.low(p));
        CHECK(r.space.high(p) == space.high(p));
        continue;
      }
      int above = 0, below = 0;
      for (const auto& b : neg) {
        above += b.delta[p] > bp[p];
        below += b.delta[p] < bp[p];
      }
      if (above > below) {
        CHECK(r.space.low(p) == space.low(p));
      } else {
        CHECK(r.space.high(p) == space.high(p));
      }
      if (above == 0 && below == 0) CHECK(r.space.low(p) == space.low(p));
    }

    const Perturbation fresh = sample_refined(bp, r.space, r.touched, rng);
    CHECK(r.space.contains(fresh));
    for (std::size_t p = 0; p < bp.size(); ++p) {
      if (std::find(r.touched.begin(), r.touched.end(), p) == r.touched.end()) CHECK(fresh[p] == bp[p]);
    }
  }
}

TEST_CASE("refinement rejects bad arguments") {
  const ImageShape shape(2, 1, 1);
  const SearchSpace space(shape, 3);
  Rng rng(0);
  const Perturbation bp(shape, 3);
  CHECK_THROWS_AS(refine_space(space, bp, {}, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(refine_space(space, bp, {}, 3, rng), std::invalid_argument);
  CHECK_THROWS_AS(refine_space(space, Perturbation(ImageShape(1, 1, 1), 3), {}, 1, rng),
                  std::invalid_argument);
}

TEST_CASE("run_attack follows the reference loop exactly") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 30; ++trial) {
    const ImageShape shape(3, 3, 1);
    const IntegerImage d = testing::random_image(shape, gen, 20, 235);
    const auto oracle = sum_oracle(d, 3 + trial % 20, 0.5);
    AttackConfig cfg;
    cfg.budget = 2 + trial % 3;
    cfg.iterations = 60;
    cfg.seed = gen();
    cfg.clean_label = 1;
    cfg.sample_size = 2 + trial % 3;
    cfg.ranking_threshold = 1 + trial % 2;
    cfg.coordinate_threshold = 1 + trial % 4;
    const AttackOutcome got = run_attack(oracle, d, cfg);
    const ReferenceResult want = reference_attack(oracle, d, cfg);
    CHECK(got.final_perturbation == want.best);
    CHECK(got.final_degree == want.degree);
    CHECK(got.degree_trace == want.trace);
    CHECK(got.queries_used == want.queries);
  }
}

TEST_CASE("query accounting without early exit") {
  const ImageShape shape(2, 2, 1);
  const IntegerImage d(shape, 100);
  const auto oracle = sum_oracle(d, 1000);  // out of reach
  QueryCounter counter(oracle);
  AttackConfig cfg;
  cfg.iterations = 50;
  cfg.seed = 4;
  const AttackOutcome out = run_attack(counter, d, cfg);
  CHECK_FALSE(out.success);
  CHECK_FALSE(out.adversarial.has_value());
  CHECK(out.iterations_used == 50);
  CHECK(out.queries_used == 5 + 3 * 50);
  CHECK(out.probe_queries == 1);
  CHECK(counter.count() == out.queries_used + out.probe_queries);
  CHECK(out.degree_trace.size() == 51);
  CHECK(std::is_sorted(out.degree_trace.rbegin(), out.degree_trace.rend()));
  CHECK(out.final_degree == out.degree_trace.back());
  CHECK(out.clean_label == 1);

  cfg.clean_label = 1;
  counter.reset();
  const AttackOutcome known = run_attack(counter, d, cfg);
  CHECK(known.probe_queries == 0);
  CHECK(counter.count() == 5 + 3 * 50);
}

TEST_CASE("successful attack returns a verified adversarial example") {
  std::mt19937_64 gen(17);
  int successes = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const ImageShape shape(2, 2, 1);
    const IntegerImage d = testing::random_image(shape, gen, 10, 245);
    const auto oracle = sum_oracle(d, 4);
    for (const AttackMode mode : {AttackMode::untargeted(), AttackMode::top1_only(),
                                  AttackMode::targeted(0)}) {
      AttackConfig cfg;
      cfg.mode = mode;
      cfg.budget = 2;
      cfg.iterations = 300;
      cfg.seed = gen();
      const AttackOutcome out = run_attack(oracle, d, cfg);
      REQUIRE(out.success);
      ++successes;
      CHECK(out.final_degree == 0.0);
      CHECK(out.degree_trace.back() == 0.0);
      CHECK(*out.adversarial == apply_perturbation(d, out.final_perturbation));
      CHECK(top_j(oracle.predict(*out.adversarial), 1).label == 0);
      CHECK(distance_integer(d, *out.adversarial, Norm::LInf) <= 2.0);
      CHECK(out.queries_used == 5 + 3 * out.iterations_used);
    }
  }
  CHECK(successes == 60);
}

TEST_CASE("same seed, same run") {
  const IntegerImage d(ImageShape(3, 3, 1), 50);
  const auto oracle = sum_oracle(d, 40, 0.3);
  AttackConfig cfg;
  cfg.budget = 6;
  cfg.iterations = 100;
  cfg.seed = 77;
  const AttackOutcome a = run_attack(oracle, d, cfg);
  const AttackOutcome b = run_attack(oracle, d, cfg);
  CHECK(a.final_perturbation == b.final_perturbation);
  CHECK(a.degree_trace == b.degree_trace);
  CHECK(a.queries_used == b.queries_used);
  cfg.seed = 78;
  CHECK(run_attack(oracle, d, cfg).degree_trace != a.degree_trace);
}

TEST_CASE("caching changes query counts but not the search") {
  const IntegerImage d(ImageShape(2, 1, 1), 50);
  const auto oracle = sum_oracle(d, 100);  // unreachable with eps 1
  AttackConfig cfg;
  cfg.budget = 1;
  cfg.iterations = 40;
  cfg.seed = 8;
  cfg.clean_label = 1;
  const AttackOutcome plain = run_attack(oracle, d, cfg);
  cfg.cache = true;
  const AttackOutcome cached = run_attack(oracle, d, cfg);
  CHECK(cached.final_perturbation == plain.final_perturbation);
  CHECK(cached.degree_trace == plain.degree_trace);
  CHECK(plain.queries_used == 5 + 3 * 40);
  CHECK(cached.queries_used <= 9);  // only 3^2 distinct perturbations exist
}

TEST_CASE("reduced search shape") {
  std::mt19937_64 gen(31);
  const ImageShape shape(8, 8, 1);
  for (int trial = 0; trial < 5; ++trial) {
    const IntegerImage d = testing::random_image(shape, gen, 20, 235);
    const auto oracle = sum_oracle(d, 30, 0.5);
    AttackConfig cfg;
    cfg.budget = 3;
    cfg.iterations = 400;
    cfg.seed = gen();
    cfg.resize = ImageShape(4, 4, 1);
    const AttackOutcome out = run_attack(oracle, d, cfg);
    CHECK(out.final_perturbation.shape() == shape);
    CHECK(out.final_perturbation.budget() == 3);
    if (out.success) {
      CHECK(distance_integer(d, *out.adversarial, Norm::LInf) <= 3.0);
      CHECK(top_j(oracle.predict(*out.adversarial), 1).label == 0);
    }
  }
}

TEST_CASE("stopping rules") {
  const IntegerImage d(ImageShape(2, 2, 1), 100);
  const auto oracle = sum_oracle(d, 1000);
  AttackConfig cfg;
  cfg.seed = 2;
  cfg.clean_label = 1;

  SUBCASE("zero timeout stops after the initial population") {
    cfg.timeout = std::chrono::milliseconds(0);
    const AttackOutcome out = run_attack(oracle, d, cfg);
    CHECK(out.iterations_used == 0);
    CHECK(out.queries_used == 5);
    CHECK(out.degree_trace.size() == 1);
  }
  SUBCASE("query budget") {
    cfg.query_budget = 20;
    CHECK(run_attack(oracle, d, cfg).queries_used == 20);
    cfg.query_budget = 22;
    const AttackOutcome out = run_attack(oracle, d, cfg);
    CHECK(out.queries_used == 20);
    CHECK(out.iterations_used == 5);
  }
  SUBCASE("input already misclassified") {
    cfg.true_label = 0;
    const AttackOutcome out = run_attack(oracle, d, cfg);
    CHECK(out.success);
    CHECK(out.queries_used == 0);
    CHECK(*out.adversarial == d);
  }
  SUBCASE("target already predicted") {
    cfg.mode = AttackMode::targeted(1);
    const AttackOutcome out = run_attack(oracle, d, cfg);
    CHECK(out.success);
    CHECK(out.queries_used == 0);
  }
}

TEST_CASE("configuration errors") {
  const IntegerImage d(ImageShape(2, 2, 1), 100);
  const auto oracle = sum_oracle(d, 10);
  auto rejects = [&](auto mutate) {
    AttackConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(run_attack(oracle, d, cfg), ConfigError);
  };
  rejects([](AttackConfig& c) { c.sample_size = 0; });
  rejects([](AttackConfig& c) { c.ranking_threshold = 0; });
  rejects([](AttackConfig& c) { c.budget = 0; });
  rejects([](AttackConfig& c) { c.iterations = 0; });
  rejects([](AttackConfig& c) { c.coordinate_threshold = 5; });
  rejects([](AttackConfig& c) { c.resize = ImageShape(1, 1, 3); });
  rejects([](AttackConfig& c) { c.resize = ImageShape(4, 1, 1); });
  rejects([](AttackConfig& c) {
    c.resize = ImageShape(1, 1, 1);
    c.coordinate_threshold = 2;
  });
  rejects([](AttackConfig& c) { c.query_budget = 4; });
  rejects([](AttackConfig& c) { c.mode = AttackMode::targeted(2); });
  CHECK_THROWS_AS(run_attack(oracle, IntegerImage(ImageShape(3, 3, 1)), AttackConfig{}),
                  std::invalid_argument);
}
