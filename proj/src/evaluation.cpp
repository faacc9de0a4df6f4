#include "dfa/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace dfa {

double mse(const IntegerImage& original, const IntegerImage& adversarial) {
  if (original.shape() != adversarial.shape()) {
    throw std::invalid_argument("mse: shape mismatch " + original.shape().str() + " vs " +
                                adversarial.shape().str());
  }
  double acc = 0.0;
  for (std::size_t p = 0; p < original.size(); ++p) {
    const double diff = (int{original[p]} - int{adversarial[p]}) / 255.0;
    acc += diff * diff;
  }
  return acc / static_cast<double>(original.size());
}

std::uint64_t content_hash(const IntegerImage& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int dim : {d.shape().width, d.shape().height, d.shape().channels}) {
    for (int i = 0; i < 4; ++i) mix((static_cast<std::uint32_t>(dim) >> (8 * i)) & 0xFF);
  }
  for (auto v : d.values()) mix(v);
  return h;
}

std::uint64_t derive_seed(std::uint64_t base, const IntegerImage& d) {
  return base + content_hash(d);
}

BatchReport aggregate(std::vector<ImageRecord> records) {
  BatchReport r;
  r.records = std::move(records);
  r.n = r.records.size();
  double queries = 0.0;
  double seconds = 0.0;
  double mse_sum = 0.0;
  std::size_t with_outcome = 0;
  std::size_t with_mse = 0;
  for (const auto& rec : r.records) {
    if (rec.real_success) ++r.n_real;
    if (!rec.integer_success) continue;
    ++r.n_integer;
    if (rec.outcome) {
      ++with_outcome;
      queries += static_cast<double>(rec.outcome->queries_used);
      seconds += std::chrono::duration<double>(rec.outcome->elapsed).count();
    }
    if (rec.mse) {
      ++with_mse;
      mse_sum += *rec.mse;
    }
  }
  if (r.n > 0) {
    r.sr = static_cast<double>(r.n_real) / static_cast<double>(r.n);
    r.tsr = static_cast<double>(r.n_integer) / static_cast<double>(r.n);
  }
  r.gap = r.sr > 0.0 ? (r.sr - r.tsr) / r.sr : 0.0;
  if (with_outcome > 0) {
    r.avg_queries = queries / static_cast<double>(with_outcome);
    r.atc_s = seconds / static_cast<double>(with_outcome);
  }
  if (with_mse > 0) r.avg_mse = mse_sum / static_cast<double>(with_mse);
  return r;
}

namespace {

ImageRecord attack_one(const ClassifierOracle& oracle, const IntegerImage& image, std::size_t id,
                       const AttackConfig& base, const BatchOptions& options) {
  ImageRecord rec;
  rec.id = id;
  rec.seed = derive_seed(base.seed, image);
  try {
    AttackConfig config = base;
    config.seed = rec.seed;
    if (id < options.true_labels.size()) config.true_label = options.true_labels[id];

    const ProbabilityVector clean = oracle.predict(image);
    config.clean_label = top_j(clean, 1).label;
    if (config.mode.kind == AttackKind::Targeted) {
      if (options.target_rank) config.mode.target = top_j(clean, *options.target_rank).label;
      rec.target = config.mode.target;
    }
    rec.clean_label = *config.clean_label;

    AttackOutcome outcome = run_attack(oracle, image, config);
    outcome.probe_queries = 1;
    rec.real_success = outcome.success;
    rec.integer_success = outcome.success;
    if (outcome.success) rec.mse = mse(image, *outcome.adversarial);
    rec.outcome = std::move(outcome);
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.real_success = rec.integer_success = false;
  }
  return rec;
}

}  // namespace

BatchReport run_batch(const ClassifierOracle& oracle, const std::vector<IntegerImage>& images,
                      const AttackConfig& config, const BatchOptions& options) {
  std::vector<ImageRecord> records(images.size());
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(images.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      records[i] = attack_one(oracle, images[i], i, config, options);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < images.size(); i = next++) {
          records[i] = attack_one(oracle, images[i], i, config, options);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return aggregate(std::move(records));
}

BatchReport gap_study(const RealInputClassifier& oracle, const std::vector<IntegerImage>& originals,
                      const std::vector<RealImage>& real_advs, const NormalizationScheme& scheme,
                      const GapStudyOptions& options) {
  if (originals.size() != real_advs.size()) {
    throw std::invalid_argument("gap_study: " + std::to_string(originals.size()) +
                                " originals but " + std::to_string(real_advs.size()) +
                                " real adversarial examples");
  }
  if (!options.labels.empty() && options.labels.size() != originals.size()) {
    throw std::invalid_argument("gap_study: labels are not aligned with the image list");
  }
  if (!options.targets.empty() && options.targets.size() != originals.size()) {
    throw std::invalid_argument("gap_study: targets are not aligned with the image list");
  }

  std::vector<ImageRecord> records;
  records.reserve(originals.size());
  for (std::size_t i = 0; i < originals.size(); ++i) {
    ImageRecord rec;
    rec.id = i;
    try {
      const IntegerImage& d = originals[i];
      const RealImage& v = real_advs[i];
      if (d.shape() != v.shape()) {
        throw std::invalid_argument("gap_study: image " + std::to_string(i) + " shape " +
                                    d.shape().str() + " vs real example " + v.shape().str());
      }
      rec.clean_label = options.labels.empty() ? top_j(oracle.predict(d), 1).label
                                               : options.labels[i];
      AttackMode mode = options.mode;
      if (mode.kind == AttackKind::Targeted) {
        if (!options.targets.empty()) mode.target = options.targets[i];
        rec.target = mode.target;
      }
      rec.real_success = attack_succeeded(oracle.predict_real(v), mode, rec.clean_label);
      const IntegerImage d_adv = denormalize(v, scheme);
      rec.discretization_error = discretization_error(v, scheme);
      rec.integer_success =
          rec.real_success && attack_succeeded(oracle.predict(d_adv), mode, rec.clean_label);
      if (rec.integer_success) rec.mse = mse(d, d_adv);
    } catch (const std::exception& e) {
      rec.error = e.what();
      rec.real_success = rec.integer_success = false;
    }
    records.push_back(std::move(rec));
  }
  return aggregate(std::move(records));
}

namespace {

using nlohmann::ordered_json;

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json aggregate_json(const BatchReport& r, bool timing) {
  ordered_json j;
  j["n"] = r.n;
  j["n_real"] = r.n_real;
  j["n_integer"] = r.n_integer;
  j["sr"] = r.sr;
  j["tsr"] = r.tsr;
  j["gap"] = r.gap;
  j["avg_queries"] = opt(r.avg_queries);
  j["atc_s"] = timing ? opt(r.atc_s) : ordered_json(nullptr);
  j["avg_mse"] = opt(r.avg_mse);
  return j;
}

}  // namespace

void write_report(const BatchReport& report, std::ostream& out, bool timing) {
  for (const auto& rec : report.records) {
    ordered_json j;
    j["record"] = "image";
    j["id"] = rec.id;
    j["success"] = rec.integer_success;
    j["real_success"] = rec.real_success;
    j["clean_label"] = rec.clean_label;
    j["target"] = opt(rec.target);
    if (rec.outcome) {
      j["queries"] = rec.outcome->queries_used;
      j["probe_queries"] = rec.outcome->probe_queries;
      j["iterations"] = rec.outcome->iterations_used;
      j["degree"] = rec.outcome->final_degree;
      j["seed"] = rec.seed;
    } else {
      j["queries"] = nullptr;
      j["probe_queries"] = nullptr;
      j["iterations"] = nullptr;
      j["degree"] = nullptr;
      j["seed"] = nullptr;
    }
    j["mse"] = opt(rec.mse);
    j["discretization_error"] = opt(rec.discretization_error);
    if (timing && rec.outcome) {
      j["elapsed_ms"] = std::chrono::duration<double, std::milli>(rec.outcome->elapsed).count();
    } else {
      j["elapsed_ms"] = nullptr;
    }
    j["error"] = rec.error.empty() ? ordered_json(nullptr) : ordered_json(rec.error);
    out << j.dump() << '\n';
  }
  ordered_json agg;
  agg["record"] = "aggregate";
  agg.update(aggregate_json(report, timing));
  out << agg.dump() << '\n';
}

void write_sweep_row(const BatchReport& report, const std::string& param, long long value,
                     std::ostream& out, bool timing) {
  ordered_json row;
  row["record"] = "sweep";
  row["param"] = param;
  row["value"] = value;
  row.update(aggregate_json(report, timing));
  out << row.dump() << '\n';
}

}  // namespace dfa
