#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sedloss/data.hpp"
#include "sedloss/losses.hpp"
#include "sedloss/metrics.hpp"
#include "sedloss/model.hpp"

namespace sedloss {

/// Where the inverse-frequency loss takes its class counts from.
enum class FrequencyScope {
  kBatch,  // recount every mini-batch
  kEpoch,  // whole training set, rescaled to an average batch
};

struct TrainConfig {
  LossSpec loss = BceSpec{};
  std::size_t epochs = 10;
  std::size_t batch_clips = 8;
  double learning_rate = 1e-2;
  /// Experiment seed s: data order uses s, parameter init uses s + 1000.
  std::uint64_t seed = 0;
  EvalConfig eval;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t hidden = 32;
  std::size_t window_radius = 5;
  LossOptions loss_options;
  FrequencyScope ifl_scope = FrequencyScope::kBatch;
};

void validate(const TrainConfig& cfg);

inline constexpr std::uint64_t kInitSeedOffset = 1000;

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean raw batch loss
  double dev_micro_f = 0.0;
  double dev_macro_f = 0.0;
};

struct RunResult {
  ModelParams final_params;
  std::vector<EpochRecord> history;
  MetricsReport report;  // held-out split, final parameters
};

/// Raised when a batch loss is NaN or infinite; the message carries the state.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(const ModelDims& dims, double beta1, double beta2, double eps);
  void step(ModelParams& params, const ParamGrads& grads, double learning_rate);
  long steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_;
  ParamGrads m_, v_;
  long t_ = 0;
};

RunResult train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& dev_ds);

/// Sum of the configured loss over a dataset (one batch per clip group of
/// batch_clips, in clip order), as reported by the loss module.
double dataset_loss(const TrainConfig& cfg, const ModelParams& params, const Dataset& ds);

/// Model scores for every clip.
std::vector<PredictionGrid> predict_all(const ModelParams& params, const Dataset& ds);

struct Summary {
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation, 0 for a single value
  double median = 0.0;
};

Summary summarize(std::vector<double> values);

struct RunRecord {
  std::string method;
  std::string params;
  std::uint64_t seed = 0;
  RunResult result;
};

struct SummaryRow {
  std::string method;
  std::string params;
  std::size_t runs = 0;
  Summary micro_f, macro_f, micro_auc, macro_auc;
};

struct ExperimentTable {
  std::vector<RunRecord> runs;  // ordered by (row, seed)
  std::vector<SummaryRow> rows;
};

/// Axes: srl.beta, afl.zeta, afl.gamma, ifl.gamma, fbtl.alpha. The other
/// parameters come from base when it is the same loss, else from defaults
/// (srl alpha 1, afl 0, ifl c 500, fbtl gamma 0 eta 1).
LossSpec apply_axis(const LossSpec& base, const std::string& axis, double value);
bool is_sweep_axis(const std::string& axis);

/// One train+evaluate per (value, seed), seeds 0..seeds-1. Independent runs
/// execute on up to `workers` threads; output order never depends on it.
ExperimentTable sweep(const TrainConfig& base, const std::string& axis,
                      std::span<const double> values, std::size_t seeds,
                      const Dataset& train_ds, const Dataset& dev_ds, int workers = 1);

/// One row per config, aggregated over seeds 0..seeds-1.
ExperimentTable compare_losses(std::span<const TrainConfig> cfgs, std::size_t seeds,
                               const Dataset& train_ds, const Dataset& dev_ds, int workers = 1);

void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history);
void write_runs_csv(std::ostream& os, const ExperimentTable& table,
                    const std::vector<std::string>& class_names);
void write_summary_csv(std::ostream& os, const ExperimentTable& table);
/// Human-readable table of summary rows.
void print_summary(std::ostream& os, const ExperimentTable& table);

}  // namespace sedloss
