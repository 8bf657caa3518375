#include "sedloss/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "sedloss/data.hpp"
#include "sedloss/keyvalue.hpp"
#include "sedloss/parallel.hpp"
#include "sedloss/trainer.hpp"

namespace sedloss::cli {

namespace fs = std::filesystem;

namespace {

struct GenDataOptions {
  std::string preset = "tut-like";
  std::size_t clips = 0;
  std::uint64_t seed = 0;
  std::size_t feature_dim = 16;
  double noise_sigma = 1.0;
  double amplitude = 3.0;
  std::string out;
};

struct GradCheckCli {
  std::string loss = "all";
  std::uint64_t seed = 1;
  std::size_t trials = 50;
};

struct TrainOptions {
  std::string data;
  std::string dev;
  std::string out;
  std::string loss = "bce";
  std::size_t epochs = 10;
  std::size_t batch = 8;
  double lr = 1e-2;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  std::size_t hidden = 32;
  std::size_t window = 5;
  std::string ifl_scope = "batch";
  std::string fbtl_pooling = "batch";
  int threads = 0;
  // sweep / compare
  std::string axis;
  std::string values;
  std::string methods;
  std::size_t seeds = 1;
  int workers = 1;
};

void add_train_options(CLI::App* sub, TrainOptions& o) {
  sub->add_option("--data", o.data, "Training dataset directory")->required();
  sub->add_option("--dev", o.dev,
                  "Held-out dataset directory (default: last fifth of --data)");
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--loss", o.loss, "Loss as name[:param...], e.g. afl:0.0625:1.0")
      ->capture_default_str();
  sub->add_option("--epochs", o.epochs, "Training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--batch", o.batch, "Clips per mini-batch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--lr", o.lr, "Adam learning rate")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--seed", o.seed, "Experiment seed")->capture_default_str();
  sub->add_option("--threshold", o.threshold, "Detection threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--hidden", o.hidden, "Hidden units")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--window", o.window, "Context radius in frames")->capture_default_str();
  sub->add_option("--ifl-scope", o.ifl_scope, "Class counts for ifl: batch or epoch")
      ->check(CLI::IsMember({"batch", "epoch"}))
      ->capture_default_str();
  sub->add_option("--fbtl-pooling", o.fbtl_pooling, "Tversky sums: batch or clip")
      ->check(CLI::IsMember({"batch", "clip"}))
      ->capture_default_str();
  sub->add_option("--threads", o.threads, "OpenMP threads for kernels (0 = runtime default)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

void add_experiment_options(CLI::App* sub, TrainOptions& o) {
  sub->add_option("--seeds", o.seeds, "Seeds per row (0..seeds-1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--workers", o.workers, "Concurrent training runs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

TrainConfig to_config(const TrainOptions& o) {
  TrainConfig cfg;
  cfg.loss = parse_loss_spec(o.loss);
  cfg.epochs = o.epochs;
  cfg.batch_clips = o.batch;
  cfg.learning_rate = o.lr;
  cfg.seed = o.seed;
  cfg.eval.threshold = o.threshold;
  cfg.hidden = o.hidden;
  cfg.window_radius = o.window;
  cfg.ifl_scope = o.ifl_scope == "epoch" ? FrequencyScope::kEpoch : FrequencyScope::kBatch;
  cfg.loss_options.fbtl_pooling =
      o.fbtl_pooling == "clip" ? FbtlPooling::kPerClip : FbtlPooling::kBatch;
  validate(cfg);
  return cfg;
}

std::pair<Dataset, Dataset> load_splits(const TrainOptions& o) {
  Dataset data = read_dataset(o.data);
  if (!o.dev.empty()) return {std::move(data), read_dataset(o.dev)};
  const std::size_t clips = data.clips.size();
  if (clips < 2) throw ValidationError("need at least 2 clips to hold out a dev split");
  const std::size_t dev = std::max<std::size_t>(1, clips / 5);
  return {slice(data, 0, clips - dev), slice(data, clips - dev, clips)};
}

std::vector<std::string> class_names(const Dataset& ds) {
  std::vector<std::string> names;
  for (const auto& c : ds.spec.classes) names.push_back(c.name);
  if (names.empty() && !ds.clips.empty()) {
    for (std::size_t m = 0; m < ds.clips.front().labels.classes(); ++m) {
      names.push_back("class" + std::to_string(m));
    }
  }
  return names;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void print_stats(std::ostream& out, const Dataset& ds) {
  const DatasetStats st = compute_stats(ds);
  const double hop = ds.spec.frame_hop_s;
  out << "clips            " << ds.clips.size() << '\n';
  out << "active frames    " << st.total_active << '\n';
  out << "inactive frames  " << st.total_inactive << '\n';
  out << "active fraction  " << std::fixed << std::setprecision(4) << st.active_fraction()
      << '\n';
  out << std::left << std::setw(20) << "class" << std::right << std::setw(10) << "active"
      << std::setw(10) << "inactive" << std::setw(8) << "runs" << std::setw(12) << "mean dur s"
      << '\n';
  const auto names = class_names(ds);
  for (std::size_t m = 0; m < st.per_class_active_frames.size(); ++m) {
    out << std::left << std::setw(20) << names[m] << std::right << std::setw(10)
        << st.per_class_active_frames[m] << std::setw(10) << st.per_class_inactive_frames[m]
        << std::setw(8) << st.per_class_runs[m] << std::setw(12) << std::setprecision(3)
        << st.per_class_mean_duration_frames[m] * hop << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

int cmd_gen_data(const GenDataOptions& o, std::ostream& out) {
  if (o.preset != "tut-like") throw ValidationError("unknown preset '" + o.preset + "'");
  DatasetSpec spec = tut_like_preset(o.feature_dim);
  spec.clips = o.clips;
  spec.seed = o.seed;
  spec.noise_sigma = o.noise_sigma;
  for (auto& c : spec.classes) c.amplitude = o.amplitude;
  const Dataset ds = generate_dataset(spec);
  write_dataset(o.out, ds);
  out << "wrote " << ds.clips.size() << " clips to " << o.out << '\n';
  print_stats(out, ds);
  return kOk;
}

int cmd_grad_check(const GradCheckCli& o, const Hooks& hooks, std::ostream& out) {
  const auto cases = hooks.loss_cases.empty() ? default_loss_cases() : hooks.loss_cases;
  GradCheckOptions opts;
  opts.seed = o.seed;
  opts.trials = o.trials;
  std::vector<GradCheckResult> results;
  bool matched = false;
  for (const auto& c : cases) {
    if (o.loss != "all" && o.loss != c.name) continue;
    matched = true;
    results.push_back(check_loss_gradient(c, opts));
  }
  if (o.loss == "all" || o.loss == "model") {
    matched = true;
    results.push_back(check_model_gradient(opts));
  }
  if (!matched) throw ValidationError("unknown loss '" + o.loss + "' for grad-check");
  bool ok = true;
  for (const auto& r : results) {
    out << (r.pass() ? "PASS " : "FAIL ") << std::left << std::setw(6) << r.name
        << " max_rel_err=" << std::scientific << std::setprecision(3) << r.max_rel_error
        << " tol=" << r.tolerance;
    if (!r.pass()) out << " at " << r.worst;
    out << '\n';
    ok = ok && r.pass();
  }
  out.unsetf(std::ios::floatfield);
  return ok ? kOk : kCheckFailed;
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  const TrainConfig cfg = to_config(o);
  const auto [train_ds, dev_ds] = load_splits(o);
  fs::create_directories(o.out);
  const RunResult run = train(cfg, train_ds, dev_ds);
  const std::string tag = loss_name(cfg.loss) + "_s" + std::to_string(cfg.seed);
  {
    auto os = open_out(fs::path(o.out) / ("history_" + tag + ".csv"));
    write_history_csv(os, run.history);
  }
  {
    ExperimentTable table;
    table.runs.push_back({loss_name(cfg.loss), loss_params(cfg.loss), cfg.seed, run});
    auto os = open_out(fs::path(o.out) / "metrics.csv");
    write_runs_csv(os, table, class_names(train_ds));
  }
  save_params(fs::path(o.out) / ("model_" + tag + ".bin"), run.final_params);
  out << std::fixed << std::setprecision(2);
  out << "method " << loss_name(cfg.loss) << ' ' << loss_params(cfg.loss) << '\n';
  out << "final train loss " << run.history.back().train_loss << '\n';
  out << "micro-F " << 100.0 * run.report.micro_f << "%  macro-F " << 100.0 * run.report.macro_f
      << "%  micro-AUC " << 100.0 * run.report.micro_auc << "%  macro-AUC "
      << 100.0 * run.report.macro_auc << "%\n";
  out.unsetf(std::ios::floatfield);
  return kOk;
}

void write_experiment(const fs::path& dir, const ExperimentTable& table, const Dataset& ds,
                      std::size_t seeds) {
  {
    auto os = open_out(dir / "metrics.csv");
    write_runs_csv(os, table, class_names(ds));
  }
  {
    auto os = open_out(dir / "summary.csv");
    write_summary_csv(os, table);
  }
  for (std::size_t k = 0; k < table.runs.size(); ++k) {
    const auto& run = table.runs[k];
    auto os = open_out(dir / ("history_" + std::to_string(k / seeds) + "_" + run.method + "_s" +
                              std::to_string(run.seed) + ".csv"));
    write_history_csv(os, run.result.history);
  }
}

int cmd_sweep(const TrainOptions& o, std::ostream& out) {
  const TrainConfig base = to_config(o);
  if (!is_sweep_axis(o.axis)) {
    throw ValidationError("unknown sweep axis '" + o.axis + "'");
  }
  const auto values = parse_double_list(o.values, "--values");
  for (double v : values) (void)apply_axis(base.loss, o.axis, v);
  const auto [train_ds, dev_ds] = load_splits(o);
  fs::create_directories(o.out);
  const auto table = sweep(base, o.axis, values, o.seeds, train_ds, dev_ds, o.workers);
  write_experiment(o.out, table, train_ds, o.seeds);
  print_summary(out, table);
  return kOk;
}

int cmd_compare(const TrainOptions& o, std::ostream& out) {
  const TrainConfig base = to_config(o);
  std::vector<TrainConfig> cfgs;
  for (const auto& m : split(o.methods, ',')) {
    TrainConfig cfg = base;
    cfg.loss = parse_loss_spec(m);
    cfgs.push_back(cfg);
  }
  if (cfgs.empty()) throw ValidationError("--methods is empty");
  const auto [train_ds, dev_ds] = load_splits(o);
  fs::create_directories(o.out);
  const auto table = compare_losses(cfgs, o.seeds, train_ds, dev_ds, o.workers);
  write_experiment(o.out, table, train_ds, o.seeds);
  print_summary(out, table);
  return kOk;
}

/// Splices `--key value` pairs from the --config file in front of the
/// user's own arguments, so explicit flags win (options keep the last value).
std::vector<std::string> expand_config(const CLI::App& app, const std::vector<std::string>& args) {
  std::size_t sub_pos = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!args[i].empty() && args[i][0] != '-') {
      sub_pos = i;
      break;
    }
  }
  if (sub_pos == args.size()) return args;
  const CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[sub_pos]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::string config;
  for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (config.empty()) return args;

  std::vector<std::string> out(args.begin(), args.begin() + static_cast<long>(sub_pos) + 1);
  for (const auto& [key, value] : read_key_value_file(config)) {
    if (key == "config" || sub->get_option_no_throw("--" + key) == nullptr) {
      throw ValidationError(config + ": unknown key '" + key + "' for " + args[sub_pos]);
    }
    out.push_back("--" + key);
    out.push_back(value);
  }
  out.insert(out.end(), args.begin() + static_cast<long>(sub_pos) + 1, args.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Hooks& hooks) {
  CLI::App app{"Imbalance-aware loss functions for frame-level sound event detection"};
  app.name("sedloss");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.footer(
      "Each subcommand accepts --config FILE with key=value lines ('#' comments); keys are the "
      "long option names without dashes. Flags override the file.");

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset directory");
  gen_cmd->add_option("--preset", gen.preset, "Class preset")
      ->check(CLI::IsMember({"tut-like"}))
      ->capture_default_str();
  gen_cmd->add_option("--clips", gen.clips, "Number of clips")
      ->required()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--feature-dim", gen.feature_dim, "Feature dimensions")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--noise-sigma", gen.noise_sigma, "Feature noise standard deviation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--amplitude", gen.amplitude, "Signature amplitude for every class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  std::string stats_dir;
  auto* stats_cmd = app.add_subcommand("stats", "Print imbalance statistics of a dataset");
  stats_cmd->add_option("--data", stats_dir, "Dataset directory")->required();

  GradCheckCli gc;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  gc_cmd->add_option("--loss", gc.loss, "all, bce, srl, ifl, afl, fbtl or model")
      ->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed, "Random input seed")->capture_default_str();
  gc_cmd->add_option("--trials", gc.trials, "Random inputs per check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train and evaluate one configuration");
  add_train_options(train_cmd, tr);

  TrainOptions sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one loss hyperparameter over seeds");
  add_train_options(sweep_cmd, sw);
  add_experiment_options(sweep_cmd, sw);
  sweep_cmd->add_option("--axis", sw.axis,
                        "srl.beta, afl.zeta, afl.gamma, ifl.gamma or fbtl.alpha")
      ->required();
  sweep_cmd->add_option("--values", sw.values, "Comma-separated values")->required();

  TrainOptions cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare several losses over seeds");
  add_train_options(cmp_cmd, cmp);
  add_experiment_options(cmp_cmd, cmp);
  cmp_cmd->add_option("--methods", cmp.methods,
                      "Comma-separated name[:param...] list, e.g. bce,afl:0.0625:1.0")
      ->required();

  std::string config_file;
  for (auto* sub : {gen_cmd, stats_cmd, gc_cmd, train_cmd, sweep_cmd, cmp_cmd}) {
    sub->add_option("--config", config_file, "key=value configuration file");
  }

  try {
    const auto expanded = expand_config(app, args);
    std::vector<const char*> argv{"sedloss"};
    for (const auto& a : expanded) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*stats_cmd) {
      print_stats(out, read_dataset(stats_dir));
      return kOk;
    }
    if (*gc_cmd) return cmd_grad_check(gc, hooks, out);
    const TrainOptions* chosen = *train_cmd ? &tr : (*sweep_cmd ? &sw : &cmp);
    if (chosen->threads > 0) parallel::set_threads(chosen->threads);
    if (*train_cmd) return cmd_train(tr, out);
    if (*sweep_cmd) return cmd_sweep(sw, out);
    return cmd_compare(cmp, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
}

}  // namespace sedloss::cli
