#include "dfa/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dfa/attack.hpp"
#include "dfa/errors.hpp"
#include "dfa/evaluation.hpp"
#include "dfa/io.hpp"
#include "dfa/network.hpp"
#include "dfa/normalization.hpp"

namespace dfa::cli {

namespace {

// Defaults for u and eps depend on the channel count.
constexpr int kDefaultU1 = 2;
constexpr int kDefaultU3 = 10;
constexpr int kDefaultEps1 = 64;
constexpr int kDefaultEps3 = 10;

struct Options {
  // oracle
  std::string model;
  std::string synthetic;
  // attack knobs; strings so sweep can take lists
  std::string mode = "untargeted";
  std::optional<std::size_t> target;
  std::optional<std::size_t> target_rank;
  std::string eps;
  std::string s = "3";
  std::string k = "2";
  std::string u;
  int iterations = 30000;
  std::optional<long long> timeout_ms;
  std::optional<std::uint64_t> query_budget;
  std::string resize;
  std::uint64_t seed = 0;
  bool cache = false;
  std::size_t workers = 1;
  bool no_timing = false;
  std::string report;
  // data
  std::string image;
  std::string out_image;
  std::optional<std::size_t> label;
  std::vector<std::string> images;
  std::string idx;
  std::string idx_labels;
  std::size_t count = std::numeric_limits<std::size_t>::max();
  std::vector<std::string> real_advs;
  std::string scheme;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Oracle {
  std::unique_ptr<RealInputClassifier> impl;
};

Oracle make_oracle(const Options& o, const ImageShape& shape) {
  if (!o.model.empty()) {
    if (!std::filesystem::exists(o.model)) {
      throw std::runtime_error("weight file not found: " + o.model);
    }
    return {std::make_unique<NetworkOracle>(load_network(o.model))};
  }
  // "THRESHOLD,SHARPNESS"
  const auto comma = o.synthetic.find(',');
  if (comma == std::string::npos) {
    throw UsageError("--synthetic expects THRESHOLD,SHARPNESS, got '" + o.synthetic + "'");
  }
  try {
    const long long threshold = std::stoll(o.synthetic.substr(0, comma));
    const double sharpness = std::stod(o.synthetic.substr(comma + 1));
    return {std::make_unique<SyntheticSumOracle>(shape, threshold, sharpness)};
  } catch (const std::logic_error&) {
    throw UsageError("--synthetic expects THRESHOLD,SHARPNESS, got '" + o.synthetic + "'");
  }
}

ImageShape parse_resize(const std::string& text, int channels) {
  const auto x = text.find('x');
  try {
    if (x != std::string::npos) {
      return ImageShape(std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1)), channels);
    }
  } catch (const std::logic_error&) {
  }
  throw UsageError("--resize expects WxH, got '" + text + "'");
}

AttackMode parse_mode(const Options& o) {
  if (o.mode == "untargeted") return AttackMode::untargeted();
  if (o.mode == "top1") return AttackMode::top1_only();
  if (o.mode == "targeted") {
    if (!o.target && !o.target_rank) {
      throw UsageError("--mode targeted needs --target or --target-rank");
    }
    return AttackMode::targeted(o.target.value_or(0));
  }
  throw UsageError("unknown --mode '" + o.mode + "' (expected untargeted, targeted or top1)");
}

int single_value(const std::string& flag, const std::string& text, int fallback) {
  if (text.empty()) return fallback;
  const auto values = parse_int_list(text);
  if (values.size() != 1) throw UsageError(flag + " takes a single value here");
  return static_cast<int>(values.front());
}

AttackConfig make_config(const Options& o, const ImageShape& shape) {
  AttackConfig c;
  c.mode = parse_mode(o);
  const bool gray = shape.channels == 1;
  c.budget = single_value("--eps", o.eps, gray ? kDefaultEps1 : kDefaultEps3);
  c.sample_size = single_value("--s", o.s, 3);
  c.ranking_threshold = single_value("--k", o.k, 2);
  c.coordinate_threshold = single_value("--u", o.u, gray ? kDefaultU1 : kDefaultU3);
  c.iterations = o.iterations;
  if (o.timeout_ms) c.timeout = std::chrono::milliseconds(*o.timeout_ms);
  c.query_budget = o.query_budget;
  if (!o.resize.empty()) c.resize = parse_resize(o.resize, shape.channels);
  c.seed = o.seed;
  c.cache = o.cache;
  validate(c, shape);
  return c;
}

std::vector<IntegerImage> load_dataset(const Options& o) {
  std::vector<IntegerImage> images;
  if (!o.idx.empty()) images = load_idx_images(o.idx, o.count);
  for (const auto& path : o.images) {
    if (images.size() >= o.count) break;
    images.push_back(read_image(path));
  }
  if (images.empty()) throw UsageError("no input images (use --idx or --images)");
  for (const auto& d : images) {
    if (d.shape() != images.front().shape()) {
      throw std::invalid_argument("dataset images have mixed shapes " + images.front().shape().str() +
                                  " and " + d.shape().str());
    }
  }
  return images;
}

BatchOptions make_batch_options(const Options& o, std::size_t n) {
  BatchOptions b;
  b.workers = o.workers;
  b.target_rank = o.target_rank;
  if (!o.idx_labels.empty()) {
    b.true_labels = load_idx_labels(o.idx_labels, n);
    if (b.true_labels.size() != n) throw UsageError("--labels holds fewer labels than images");
  }
  return b;
}

std::ofstream open_report(const Options& o) {
  std::ofstream f(o.report, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write report " + o.report);
  return f;
}

void run_attack_command(const Options& o, std::ostream& out) {
  const IntegerImage d = read_image(o.image);
  const Oracle oracle = make_oracle(o, d.shape());
  const AttackConfig config = make_config(o, d.shape());
  BatchOptions b;
  b.target_rank = o.target_rank;
  if (o.label) b.true_labels = {*o.label};

  const BatchReport report = run_batch(*oracle.impl, {d}, config, b);
  const ImageRecord& rec = report.records.front();
  if (!rec.error.empty()) throw std::runtime_error(rec.error);

  // The best candidate is written even when the attack did not succeed.
  write_image(apply_perturbation(d, rec.outcome->final_perturbation), o.out_image);
  auto f = open_report(o);
  write_report(report, f, !o.no_timing);
  out << (rec.integer_success ? "success" : "failure") << " queries=" << rec.outcome->queries_used
      << " iterations=" << rec.outcome->iterations_used << '\n';
}

void run_batch_command(const Options& o, std::ostream& out) {
  const auto images = load_dataset(o);
  const Oracle oracle = make_oracle(o, images.front().shape());
  const AttackConfig config = make_config(o, images.front().shape());
  const BatchReport report =
      run_batch(*oracle.impl, images, config, make_batch_options(o, images.size()));
  auto f = open_report(o);
  write_report(report, f, !o.no_timing);
  out << "n=" << report.n << " sr=" << report.sr << " tsr=" << report.tsr << " gap=" << report.gap
      << '\n';
}

void run_gap_command(const Options& o, std::ostream& out) {
  const auto originals = load_dataset(o);
  std::vector<RealImage> advs;
  for (const auto& path : o.real_advs) advs.push_back(read_real_tensor(path));
  const Oracle oracle = make_oracle(o, originals.front().shape());
  const NormalizationScheme scheme = o.scheme.empty()
                                         ? oracle.impl->normalization()
                                         : parse_scheme(o.scheme, originals.front().shape().channels);
  GapStudyOptions g;
  g.mode = parse_mode(o);
  if (!o.idx_labels.empty()) g.labels = load_idx_labels(o.idx_labels, originals.size());
  const BatchReport report = gap_study(*oracle.impl, originals, advs, scheme, g);
  auto f = open_report(o);
  write_report(report, f, !o.no_timing);
  out << "n=" << report.n << " sr=" << report.sr << " tsr=" << report.tsr << " gap=" << report.gap
      << '\n';
}

void run_sweep_command(const Options& o, std::ostream& out) {
  const auto images = load_dataset(o);
  const ImageShape shape = images.front().shape();
  const Oracle oracle = make_oracle(o, shape);

  struct Axis {
    std::string name;
    std::string flag;
    const std::string* text;
  };
  const Axis axes[] = {{"eps", "--eps", &o.eps}, {"s", "--s", &o.s}, {"u", "--u", &o.u}};
  const Axis* varying = nullptr;
  for (const auto& axis : axes) {
    if (!axis.text->empty() && parse_int_list(*axis.text).size() > 1) {
      if (varying) throw UsageError("sweep varies one parameter at a time; got lists for " +
                                    varying->flag + " and " + axis.flag);
      varying = &axis;
    }
  }
  if (!varying) throw UsageError("sweep needs a comma-separated list for --eps, --s or --u");

  Options fixed = o;
  auto f = open_report(o);
  const BatchOptions b = make_batch_options(o, images.size());
  for (long long value : parse_int_list(*varying->text)) {
    const std::string v = std::to_string(value);
    if (varying->name == "eps") fixed.eps = v;
    if (varying->name == "s") fixed.s = v;
    if (varying->name == "u") fixed.u = v;
    const AttackConfig config = make_config(fixed, shape);
    const BatchReport report = run_batch(*oracle.impl, images, config, b);
    write_sweep_row(report, varying->name, value, f, !o.no_timing);
    out << varying->name << '=' << value << " sr=" << report.sr << " tsr=" << report.tsr << '\n';
  }
}

void add_oracle_options(CLI::App& cmd, Options& o) {
  auto* model = cmd.add_option("--model", o.model, "Weight file of the target network");
  auto* synth = cmd.add_option("--synthetic", o.synthetic,
                               "Synthetic pixel-sum oracle: THRESHOLD,SHARPNESS");
  model->excludes(synth);
  synth->excludes(model);
}

void add_attack_options(CLI::App& cmd, Options& o) {
  cmd.add_option("--mode", o.mode, "untargeted | targeted | top1")->capture_default_str();
  cmd.add_option("--target", o.target, "Target class (targeted mode)");
  cmd.add_option("--target-rank", o.target_rank,
                 "Target the class with this rank in the clean prediction (targeted mode)");
  cmd.add_option("--eps", o.eps, "L-infinity budget in pixel units (default 64 gray / 10 RGB)");
  cmd.add_option("--s", o.s, "Sample size per iteration")->capture_default_str();
  cmd.add_option("--k", o.k, "Ranking threshold (positive set size)")->capture_default_str();
  cmd.add_option("--u", o.u, "Coordinates refined per sample (default 2 gray / 10 RGB)");
  cmd.add_option("--T,--iterations", o.iterations, "Iteration threshold")->capture_default_str();
  cmd.add_option("--timeout-ms", o.timeout_ms, "Wall-clock limit per image");
  cmd.add_option("--query-budget", o.query_budget, "Maximum evaluation queries per image");
  cmd.add_option("--resize", o.resize, "Search in a reduced WxH perturbation grid");
  cmd.add_option("--seed", o.seed, "Base random seed")->capture_default_str();
  cmd.add_flag("--cache", o.cache, "Memoize repeated perturbations (fewer queries)");
  cmd.add_flag("--no-timing", o.no_timing, "Write wall-clock fields as null");
  cmd.add_option("--report", o.report, "Report file (JSON lines)")->required();
}

void add_dataset_options(CLI::App& cmd, Options& o) {
  cmd.add_option("--idx", o.idx, "IDX image file")->check(CLI::ExistingFile);
  cmd.add_option("--images", o.images, "PGM/PPM image files")->delimiter(',');
  cmd.add_option("--labels", o.idx_labels, "IDX label file with ground truth")
      ->check(CLI::ExistingFile);
  cmd.add_option("--count", o.count, "Use at most this many images");
  cmd.add_option("--workers", o.workers, "Concurrent attacks")->capture_default_str();
}

}  // namespace

std::vector<long long> parse_int_list(const std::string& text) {
  std::vector<long long> values;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      values.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("expected an integer list, got '" + text + "'");
    }
  }
  if (values.empty()) throw UsageError("empty value list");
  return values;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Black-box adversarial attacks in the integer pixel domain", "dfa"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);
  Options o;

  auto* attack = app.add_subcommand("attack", "Attack one image");
  add_oracle_options(*attack, o);
  add_attack_options(*attack, o);
  attack->add_option("--image", o.image, "Input PGM/PPM image")->required()->check(CLI::ExistingFile);
  attack->add_option("--out", o.out_image, "Output adversarial image")->required();
  attack->add_option("--label", o.label, "Ground-truth label of the image");

  auto* batch = app.add_subcommand("batch", "Attack a dataset and report SR/TSR/GAP");
  add_oracle_options(*batch, o);
  add_attack_options(*batch, o);
  add_dataset_options(*batch, o);

  auto* gap = app.add_subcommand("gap", "Measure the discretization gap of real adversarial examples");
  add_oracle_options(*gap, o);
  add_dataset_options(*gap, o);
  gap->add_option("--real-advs", o.real_advs, "Real tensor files aligned with the images")
      ->required()
      ->delimiter(',');
  gap->add_option("--scheme", o.scheme,
                  "Denormalizer, e.g. \"mean_std 125 60 nearest\" (default: the model's)");
  gap->add_option("--mode", o.mode, "untargeted | targeted | top1")->capture_default_str();
  gap->add_option("--target", o.target, "Target class (targeted mode)");
  gap->add_flag("--no-timing", o.no_timing, "Write wall-clock fields as null");
  gap->add_option("--report", o.report, "Report file (JSON lines)")->required();

  auto* sweep = app.add_subcommand("sweep", "Batch over a list of --eps, --s or --u values");
  add_oracle_options(*sweep, o);
  add_attack_options(*sweep, o);
  add_dataset_options(*sweep, o);

  for (auto* cmd : {attack, batch, gap, sweep}) {
    cmd->callback([cmd, &o] {
      if (o.model.empty() && o.synthetic.empty()) {
        throw CLI::ValidationError(cmd->get_name(), "one of --model or --synthetic is required");
      }
    });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (attack->parsed()) run_attack_command(o, out);
    else if (batch->parsed()) run_batch_command(o, out);
    else if (gap->parsed()) run_gap_command(o, out);
    else if (sweep->parsed()) run_sweep_command(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dfa::cli
