#include "ntkmmd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "ntkmmd/bench.hpp"
#include "ntkmmd/calibration.hpp"
#include "ntkmmd/changepoint.hpp"
#include "ntkmmd/error.hpp"
#include "ntkmmd/io.hpp"
#include "ntkmmd/rng.hpp"
#include "ntkmmd/version.hpp"

namespace ntkmmd::cli {

namespace {

using json = nlohmann::ordered_json;

/// Bad flag values; reported with the usage exit code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      if constexpr (std::is_same_v<T, double>)
        out.push_back(std::stod(item));
      else
        out.push_back(static_cast<T>(std::stoull(item)));
    } catch (const std::exception&) {
      throw UsageError(std::string("invalid ") + what + " entry '" + item + "'");
    }
  }
  return out;
}

// Options shared by every command that builds or trains a network.
struct ModelOptions {
  std::string widths = "512";
  std::string activation = "softplus";
  bool train_output_layer = false;
  double learning_rate = 0.1;
  int epochs = 1;
  int batch_size = 1;
  double momentum = 0.0;
  std::string order = "shuffled";

  void bind(CLI::App* app) {
    app->add_option("--width", widths, "Hidden widths, comma separated (one or two layers)");
    app->add_option("--activation", activation, "softplus or relu");
    app->add_flag("--train-output-layer", train_output_layer, "Also train the output weights");
    app->add_option("--lr", learning_rate, "Learning rate alpha (per-sample step alpha/n_class)");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--batch-size", batch_size, "Samples per SGD update");
    app->add_option("--momentum", momentum, "SGD momentum in [0, 1)");
    app->add_option("--order", order, "Sample order: shuffled or given");
  }

  NetworkShape shape() const {
    NetworkShape s;
    s.hidden_widths.clear();
    for (auto w : parse_list<std::size_t>(widths, "width")) s.hidden_widths.push_back(static_cast<int>(w));
    s.activation = parse_activation(activation);
    s.train_output_layer = train_output_layer;
    return s;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.learning_rate = learning_rate;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.momentum = momentum;
    if (order == "shuffled")
      t.order = SampleOrder::shuffled;
    else if (order == "given")
      t.order = SampleOrder::given;
    else
      throw UsageError("unknown sample order '" + order + "'");
    t.validate();
    return t;
  }
};

struct ShiftOptions {
  std::string kind = "cov_shift";
  int dim = 100;
  int n_x = 200;
  int n_y = 200;

  void bind(CLI::App* app) {
    app->add_option("--kind", kind, "null, mean_shift or cov_shift");
    app->add_option("--dim", dim, "Dimension d");
    app->add_option("--nx", n_x, "Samples from p");
    app->add_option("--ny", n_y, "Samples from q");
  }

  ShiftSpec spec(double magnitude) const {
    ShiftSpec s{parse_shift_kind(kind), magnitude, dim, n_x, n_y, 0};
    s.validate();
    return s;
  }
};

struct Options {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 0;
  ModelOptions model;
  ShiftOptions shift;

  // gen
  double magnitude = 0.0;
  // test
  std::vector<std::string> inputs;
  std::string method = "ntk_net";
  std::string calibration = "auto";
  double alpha = 0.05;
  int n_boot = 400;
  double train_fraction = 0.5;
  bool keep_null = false;
  std::string checkpoints;
  // power
  std::string magnitudes = "0";
  std::size_t n_run = 500;
  std::string summary;
  // ntk-error
  std::string alphas = "0.2,0.1,0.05,0.025,0.0125";
  // scan
  int window = 100;
  int stride = 10;
  int pilot_start = 0;
  int pilot_end = 200;
  std::string statistic = "ntk_net";
  bool no_standardize = false;
  std::optional<double> threshold;
  std::string pool;
  // thresholds
  std::string variant = "thm1";
  double c = 0.5;
  long long n = 400;
  double nu = 1.0;
  double gamma = 0.05;
};

std::string resolve_threads_note(std::size_t t) { return t == 0 ? "default" : std::to_string(t); }

RunConfig run_config(const Options& o) {
  RunConfig cfg;
  cfg.method = parse_method(o.method);
  cfg.calibration = parse_calibration(o.calibration);
  cfg.alpha_level = o.alpha;
  cfg.n_boot = o.n_boot;
  cfg.train_fraction = o.train_fraction;
  cfg.network = o.model.shape();
  cfg.train = o.model.train();
  cfg.checkpoints = parse_list<std::size_t>(o.checkpoints, "checkpoint");
  cfg.threads = o.threads;
  cfg.keep_null_samples = o.keep_null;
  cfg.validate();
  return cfg;
}

std::uint64_t require_seed(const Options& o) {
  if (!o.seed) throw UsageError("--seed is required for this command");
  return *o.seed;
}

struct CommandResult {
  std::string text;                                  // primary output
  std::vector<std::pair<std::string, std::string>> files;  // extra (path, content)
  std::vector<std::string> inputs;                   // input files for digests
};

CommandResult run_gen(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  ShiftSpec spec;
  try {
    spec = o.shift.spec(o.magnitude);
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  spec.seed = seed;
  if (o.out.empty()) throw UsageError("gen needs --out PREFIX (writes PREFIX_x.csv, PREFIX_y.csv)");
  const TwoSample s = generate(spec);
  std::ostringstream x, y;
  write_csv_samples(x, s.x);
  write_csv_samples(y, s.y);
  CommandResult r;
  r.files = {{o.out + "_x.csv", x.str()}, {o.out + "_y.csv", y.str()}};
  return r;
}

CommandResult run_test_cmd(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  if (o.inputs.size() != 2) throw UsageError("test needs two input files: X.csv Y.csv");
  RunConfig cfg;
  try {
    cfg = run_config(o);
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  const TwoSample data = load_two_sample(o.inputs[0], o.inputs[1]);
  const TestOutcome outcome = run_test(data, cfg, seed);
  json j;
  j["n_x"] = data.n_x();
  j["n_y"] = data.n_y();
  j["dim"] = data.dim();
  j["seed"] = seed;
  j["alpha_level"] = cfg.alpha_level;
  const json body = to_json(outcome, o.keep_null);
  for (const auto& [k, v] : body.items()) j[k] = v;
  CommandResult r;
  r.text = j.dump(2) + "\n";
  r.inputs = o.inputs;
  return r;
}

CommandResult run_power_cmd(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  RunConfig cfg;
  std::vector<double> grid;
  try {
    cfg = run_config(o);
    grid = parse_list<double>(o.magnitudes, "magnitude");
    if (grid.empty()) throw UsageError("--magnitudes is empty");
    for (double m : grid) (void)o.shift.spec(m);
    if (o.n_run < 1) throw UsageError("--n-run must be positive");
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  std::ostringstream csv;
  csv << "method,kind,magnitude,samples_seen,n_run,rejections,power,ci_low,ci_high\n";
  json summary;
  summary["method"] = std::string(to_string(cfg.method));
  summary["kind"] = o.shift.kind;
  summary["seed"] = seed;
  auto& rows = summary["grid"] = json::array();
  auto emit = [&](double m, const std::string& seen, const PowerEstimate& p) {
    csv << to_string(cfg.method) << ',' << o.shift.kind << ',' << format_real(m) << ',' << seen
        << ',' << p.n_run << ',' << p.rejections << ',' << format_real(p.power) << ','
        << format_real(p.wilson_ci_95.first) << ',' << format_real(p.wilson_ci_95.second) << '\n';
  };
  for (double m : grid) {
    const PowerStudy study = estimate_power(o.shift.spec(m), cfg, o.n_run, seed);
    emit(m, "", study.overall);
    json row;
    row["magnitude"] = m;
    row["power"] = to_json(study.overall);
    if (!study.curve.empty()) {
      auto& curve = row["curve"] = json::array();
      for (const auto& [seen, p] : study.curve) {
        emit(m, std::to_string(seen), p);
        json c = to_json(p);
        c["samples_seen"] = seen;
        curve.push_back(std::move(c));
      }
    }
    rows.push_back(std::move(row));
  }
  CommandResult r;
  r.text = csv.str();
  if (!o.summary.empty()) r.files.emplace_back(o.summary, summary.dump(2) + "\n");
  return r;
}

CommandResult run_ntk_error_cmd(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  ShiftSpec spec;
  NetworkShape shape;
  TrainConfig train;
  std::vector<double> alphas;
  try {
    spec = o.shift.spec(o.magnitude);
    shape = o.model.shape();
    train = o.model.train();
    alphas = parse_list<double>(o.alphas, "alpha");
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  spec.seed = derive_seed(seed, stream::data);
  const ErrorStudy study = ntk_error_study(spec, shape, alphas, seed, train);
  json j;
  j["t_ntk"] = study.t_ntk;
  j["slope"] = study.slope;
  auto& pairs = j["pairs"] = json::array();
  for (std::size_t i = 0; i < study.pairs.size(); ++i)
    pairs.push_back({{"alpha", study.pairs[i].first},
                     {"rel_err", study.pairs[i].second},
                     {"t_net", study.t_net[i]}});
  CommandResult r;
  r.text = j.dump(2) + "\n";
  return r;
}

CommandResult run_scan_cmd(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  if (o.inputs.size() != 1) throw UsageError("scan needs one input file: series.csv");
  ScanConfig cfg;
  try {
    cfg.window = o.window;
    cfg.stride = o.stride;
    cfg.pilot_start = o.pilot_start;
    cfg.pilot_end = o.pilot_end;
    cfg.statistic = parse_method(o.statistic);
    cfg.network = o.model.shape();
    cfg.train = o.model.train();
    cfg.seed = seed;
    cfg.standardize = !o.no_standardize;
    cfg.threads = o.threads;
    cfg.validate();
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  CommandResult r;
  r.inputs = o.inputs;
  const SampleMatrix series = read_csv_samples(o.inputs[0]);
  std::optional<double> threshold = o.threshold;
  if (!threshold && !o.pool.empty()) {
    const SampleMatrix pool = read_csv_samples(o.pool);
    threshold = calibrate_pilot(pool, cfg, o.n_boot, o.alpha).threshold;
    r.inputs.push_back(o.pool);
  }
  const ChangePointTrace trace = scan(series, cfg, threshold);
  std::ostringstream csv;
  write_trace_csv(csv, trace);
  r.text = csv.str();
  return r;
}

CommandResult run_thresholds_cmd(const Options& o) {
  ThresholdParams tp;
  try {
    tp.variant = parse_threshold_variant(o.variant);
    tp.alpha_level = o.alpha;
    tp.c = o.c;
    tp.n = o.n;
    tp.nu = o.nu;
    tp.gamma = o.gamma;
    tp.validate();
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  CommandResult r;
  r.text = format_real(theoretical_threshold(tp)) + "\n";
  return r;
}

// Splits "--name=value" and returns the value of a global option, removing it.
std::optional<std::string> take_option(std::vector<std::string>& args, const std::string& name) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == name) {
      if (i + 1 >= args.size()) throw UsageError(name + " needs a value");
      std::string v = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      return v;
    }
    if (args[i].rfind(name + "=", 0) == 0) {
      std::string v = args[i].substr(name.size() + 1);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      return v;
    }
  }
  return std::nullopt;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// Config file: {"key": value, ..., "inputs": [...]} with keys equal to long
// option names. Produces flags placed before the command-line flags, so
// explicit flags win.
std::vector<std::string> config_args(const json& cfg) {
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  std::vector<std::string> args;
  std::vector<std::string> positional;
  for (const auto& [key, value] : cfg.items()) {
    if (key == "inputs") {
      for (const auto& v : value) positional.push_back(v.get<std::string>());
      continue;
    }
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
      continue;
    }
    args.push_back("--" + key);
    if (value.is_string())
      args.push_back(value.get<std::string>());
    else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ',';
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      args.push_back(joined);
    } else if (value.is_number_float())
      args.push_back(format_real(value.get<double>()));
    else
      args.push_back(value.dump());
  }
  args.insert(args.end(), positional.begin(), positional.end());
  return args;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << content;
  if (!f) throw DataError("failed writing '" + path + "'");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    err << "usage: ntkmmd <gen|test|power|ntk-error|scan|thresholds> [options]\n";
    return kUsageError;
  }

  // Replay a manifest: its canonical argument list, with an optional new --out.
  std::optional<json> manifest;
  if (auto path = take_option(args, "--from-manifest")) {
    manifest = read_json_file(*path);
    if (!manifest->contains("argv")) throw DataError("manifest has no argv");
    std::vector<std::string> replay = (*manifest)["argv"].get<std::vector<std::string>>();
    if (auto new_out = take_option(args, "--out")) {
      take_option(replay, "--out");
      replay.push_back("--out");
      replay.push_back(*new_out);
    }
    if (!args.empty() && args.front().rfind("--", 0) != 0 && args.front() != replay.front())
      throw UsageError("manifest was written by '" + replay.front() + "', not '" + args.front() + "'");
    for (const auto& in : manifest->value("inputs", json::array())) {
      const auto p = in.at("path").get<std::string>();
      if (file_sha256(p) != in.at("sha256").get<std::string>())
        throw DataError("input '" + p + "' differs from the manifest digest");
    }
    args = std::move(replay);
  }

  const std::string command = args.front();
  std::vector<std::string> rest(args.begin() + 1, args.end());
  if (auto cfg_path = take_option(rest, "--config")) {
    auto pre = config_args(read_json_file(*cfg_path));
    rest.insert(rest.begin(), pre.begin(), pre.end());
  }
  std::vector<std::string> canonical{command};
  canonical.insert(canonical.end(), rest.begin(), rest.end());

  Options o;
  CLI::App app{"Neural tangent kernel MMD two-sample testing", "ntkmmd"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  auto common = [&](CLI::App* sub, bool stochastic) {
    if (stochastic) sub->add_option("--seed", o.seed, "Root seed (required)");
    sub->add_option("--out", o.out, "Write results to this path instead of stdout");
    sub->add_option("--threads", o.threads, "Worker threads (0 = NTKMMD_THREADS or all cores)");
  };
  auto test_options = [&](CLI::App* sub) {
    sub->add_option("--method", o.method,
                    "ntk_net, ntk_exact, gaussian_mmd, gaussian_mmd_linear or hotelling");
    sub->add_option("--calibration", o.calibration,
                    "auto, test_only, full_gram, full_retrain or permutation");
    sub->add_option("--alpha", o.alpha, "Test level");
    sub->add_option("--n-boot", o.n_boot, "Bootstrap draws");
    sub->add_option("--train-fraction", o.train_fraction, "Training share of each sample");
    sub->add_option("--checkpoints", o.checkpoints, "Samples-seen checkpoints, comma separated");
    o.model.bind(sub);
  };

  auto* gen = app.add_subcommand("gen", "Generate a synthetic two-sample CSV pair");
  common(gen, true);
  o.shift.bind(gen);
  gen->add_option("--magnitude", o.magnitude, "delta (mean shift) or rho (covariance shift)");

  auto* test = app.add_subcommand("test", "Run a two-sample test on X.csv and Y.csv");
  common(test, true);
  test_options(test);
  test->add_flag("--keep-null", o.keep_null, "Include bootstrap null samples in the JSON");
  test->add_option("inputs", o.inputs, "X.csv Y.csv")->expected(2);

  auto* power = app.add_subcommand("power", "Monte Carlo power over a grid of shift sizes");
  common(power, true);
  test_options(power);
  o.shift.bind(power);
  power->add_option("--magnitudes", o.magnitudes, "Shift sizes, comma separated");
  power->add_option("--n-run", o.n_run, "Monte Carlo replicas per grid point");
  power->add_option("--summary", o.summary, "Also write a JSON summary to this path");

  auto* err_study = app.add_subcommand("ntk-error", "Network vs exact NTK statistic error study");
  common(err_study, true);
  o.shift.bind(err_study);
  o.model.bind(err_study);
  err_study->add_option("--magnitude", o.magnitude, "Shift size");
  err_study->add_option("--alphas", o.alphas, "Learning rates, comma separated");

  auto* scan_cmd = app.add_subcommand("scan", "Sliding-window change-point scan of series.csv");
  common(scan_cmd, true);
  o.model.bind(scan_cmd);
  scan_cmd->add_option("--window", o.window, "Window length");
  scan_cmd->add_option("--stride", o.stride, "Frames between evaluations");
  scan_cmd->add_option("--pilot-start", o.pilot_start, "First pilot row");
  scan_cmd->add_option("--pilot-end", o.pilot_end, "One past the last pilot row");
  scan_cmd->add_option("--statistic", o.statistic, "ntk_net, ntk_exact, gaussian_mmd or hotelling");
  scan_cmd->add_flag("--no-standardize", o.no_standardize, "Do not standardize by the pilot block");
  scan_cmd->add_option("--threshold", o.threshold, "Fixed alarm threshold");
  scan_cmd->add_option("--pool", o.pool, "Pre-change pool CSV used to calibrate the threshold");
  scan_cmd->add_option("--n-boot", o.n_boot, "Calibration draws");
  scan_cmd->add_option("--alpha", o.alpha, "Per-position false alarm level");
  scan_cmd->add_option("inputs", o.inputs, "series.csv")->expected(1);

  auto* thr = app.add_subcommand("thresholds", "Closed-form concentration thresholds");
  common(thr, false);
  thr->add_option("--variant", o.variant, "thm1, thm2 or thm3");
  thr->add_option("--alpha", o.alpha, "Test level");
  thr->add_option("--c", o.c, "Balance constant");
  thr->add_option("--n", o.n, "Total sample size n_x + n_y");
  thr->add_option("--nu", o.nu, "Squared kernel integral bound");
  thr->add_option("--gamma", o.gamma, "Good-event slack (thm2)");

  try {
    std::vector<std::string> reversed(canonical.rbegin(), canonical.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  CommandResult result;
  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "gen")
    result = run_gen(o);
  else if (name == "test")
    result = run_test_cmd(o);
  else if (name == "power")
    result = run_power_cmd(o);
  else if (name == "ntk-error")
    result = run_ntk_error_cmd(o);
  else if (name == "scan")
    result = run_scan_cmd(o);
  else
    result = run_thresholds_cmd(o);

  for (const auto& [path, content] : result.files) write_file(path, content);
  if (o.out.empty() || name == "gen") {
    out << result.text;
  } else {
    write_file(o.out, result.text);
  }

  if (!o.out.empty()) {
    json m;
    m["command"] = name;
    m["argv"] = canonical;
    json resolved = json::object();
    for (const auto* opt : sub->get_options()) {
      if (opt->get_name().empty() || opt->get_name() == "--help") continue;
      const auto res = opt->results();
      resolved[opt->get_name()] = res.empty() ? json(nullptr) : json(res.back());
    }
    m["config"] = std::move(resolved);
    if (o.seed) m["seed"] = *o.seed;
    m["version"] = std::string(kVersion);
    m["threads"] = resolve_threads_note(o.threads);
    auto& inputs = m["inputs"] = json::array();
    for (const auto& p : result.inputs) inputs.push_back({{"path", p}, {"sha256", file_sha256(p)}});
    m["timestamp"] = utc_timestamp();
    write_file(o.out + ".manifest.json", m.dump(2) + "\n");
  }
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run(args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const InputError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace ntkmmd::cli
