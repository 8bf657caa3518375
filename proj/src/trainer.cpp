#include "sedloss/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "sedloss/keyvalue.hpp"
#include "sedloss/parallel.hpp"

namespace sedloss {

void validate(const TrainConfig& cfg) {
  validate(cfg.loss);
  if (cfg.epochs == 0) throw ValidationError("epochs must be positive");
  if (cfg.batch_clips == 0) throw ValidationError("batch_clips must be positive");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ValidationError("learning rate must be finite and >= 0");
  }
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) ||
      !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0,1)");
  }
  if (!(cfg.adam_eps > 0.0)) throw ValidationError("adam eps must be positive");
  if (!(cfg.eval.threshold >= 0.0 && cfg.eval.threshold <= 1.0)) {
    throw ValidationError("detection threshold must lie in [0,1]");
  }
  if (cfg.hidden == 0) throw ValidationError("hidden size must be positive");
}

Adam::Adam(const ModelDims& dims, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(ParamGrads::zeros(dims)),
      v_(ParamGrads::zeros(dims)) {}

void Adam::step(ModelParams& params, const ParamGrads& grads, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t].size() != g[t].size()) throw ContractViolation("gradient shape mismatch");
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      m[t][i] = beta1_ * m[t][i] + (1.0 - beta1_) * g[t][i];
      v[t][i] = beta2_ * v[t][i] + (1.0 - beta2_) * g[t][i] * g[t][i];
      const double mhat = m[t][i] / c1;
      const double vhat = v[t][i] / c2;
      p[t][i] -= learning_rate * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::vector<PredictionGrid> predict_all(const ModelParams& params, const Dataset& ds) {
  std::vector<PredictionGrid> out;
  out.reserve(ds.clips.size());
  for (const auto& clip : ds.clips) out.push_back(predict(params, clip.features));
  return out;
}

namespace {

void check_datasets(const Dataset& train_ds, const Dataset& dev_ds) {
  if (train_ds.clips.empty() || dev_ds.clips.empty()) {
    throw ValidationError("training and dev datasets must be non-empty");
  }
  const auto& a = train_ds.clips.front();
  const auto& b = dev_ds.clips.front();
  if (a.features.cols() != b.features.cols() || a.labels.classes() != b.labels.classes()) {
    throw ValidationError("training and dev datasets differ in feature or class count");
  }
}

ModelDims dims_for(const TrainConfig& cfg, const Dataset& ds) {
  return {ds.clips.front().features.cols(), cfg.hidden, ds.clips.front().labels.classes(),
          cfg.window_radius};
}

std::optional<ClassFrequency> batch_frequency(const TrainConfig& cfg,
                                              std::span<const LabelGrid> labels,
                                              const std::optional<ClassFrequency>& epoch_freq) {
  if (!std::holds_alternative<IflSpec>(cfg.loss)) return std::nullopt;
  if (cfg.ifl_scope == FrequencyScope::kEpoch) return epoch_freq;
  return class_frequency_counts(labels);
}

std::optional<ClassFrequency> epoch_frequency(const TrainConfig& cfg, const Dataset& ds) {
  if (!std::holds_alternative<IflSpec>(cfg.loss) || cfg.ifl_scope != FrequencyScope::kEpoch) {
    return std::nullopt;
  }
  std::vector<LabelGrid> all;
  all.reserve(ds.clips.size());
  for (const auto& c : ds.clips) all.push_back(c.labels);
  ClassFrequency f = class_frequency_counts(all);
  const double scale =
      static_cast<double>(std::min(cfg.batch_clips, ds.clips.size())) /
      static_cast<double>(ds.clips.size());
  for (auto& c : f.counts) c = std::llround(static_cast<double>(c) * scale);
  return f;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

std::string divergence_report(std::size_t epoch, std::size_t batch,
                              std::span<const std::size_t> clips, double loss,
                              const ModelParams& params) {
  std::ostringstream os;
  os << "non-finite loss " << loss << " at epoch " << epoch << ", batch " << batch
     << " (clips";
  for (auto c : clips) os << ' ' << c;
  os << "); parameter norms:";
  static constexpr const char* kNames[] = {"w1", "b1", "w2", "b2"};
  const auto t = params.tensors();
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << ' ' << kNames[i] << '=' << std::sqrt(squared_norm(t[i]));
  }
  return os.str();
}

}  // namespace

double dataset_loss(const TrainConfig& cfg, const ModelParams& params, const Dataset& ds) {
  const auto epoch_freq = epoch_frequency(cfg, ds);
  double total = 0.0;
  for (std::size_t first = 0; first < ds.clips.size(); first += cfg.batch_clips) {
    const std::size_t last = std::min(ds.clips.size(), first + cfg.batch_clips);
    std::vector<PredictionGrid> ys;
    std::vector<LabelGrid> zs;
    for (std::size_t i = first; i < last; ++i) {
      ys.push_back(predict(params, ds.clips[i].features));
      zs.push_back(ds.clips[i].labels);
    }
    total += loss_dispatch(cfg.loss, ys, zs, batch_frequency(cfg, zs, epoch_freq),
                           cfg.loss_options)
                 .value;
  }
  return total;
}

RunResult train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& dev_ds) {
  validate(cfg);
  check_datasets(train_ds, dev_ds);
  const ModelDims dims = dims_for(cfg, train_ds);

  RunResult result;
  result.final_params = init_params(cfg.seed + kInitSeedOffset, dims);
  ModelParams& params = result.final_params;
  Adam adam(dims, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  std::mt19937_64 shuffle_rng(cfg.seed);
  const auto epoch_freq = epoch_frequency(cfg, train_ds);

  std::vector<LabelGrid> dev_labels;
  for (const auto& c : dev_ds.clips) dev_labels.push_back(c.labels);

  std::vector<std::size_t> order(train_ds.clips.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_clips) {
      const std::size_t last = std::min(order.size(), first + cfg.batch_clips);
      const std::span<const std::size_t> batch(order.data() + first, last - first);
      std::vector<PredictionGrid> ys;
      std::vector<ForwardCache> caches;
      std::vector<LabelGrid> zs;
      std::size_t frames = 0;
      for (auto idx : batch) {
        std::pair<PredictionGrid, ForwardCache> fwd;
        try {
          fwd = forward(params, train_ds.clips[idx].features);
        } catch (const ValidationError&) {
          // non-finite scores: the loss would be NaN
          throw TrainingDiverged(divergence_report(epoch, batches, batch,
                                                   std::numeric_limits<double>::quiet_NaN(),
                                                   params));
        }
        auto& [y, cache] = fwd;
        ys.push_back(std::move(y));
        caches.push_back(std::move(cache));
        zs.push_back(train_ds.clips[idx].labels);
        frames += zs.back().frames();
      }
      const auto loss = loss_dispatch(cfg.loss, ys, zs, batch_frequency(cfg, zs, epoch_freq),
                                      cfg.loss_options);
      if (!std::isfinite(loss.value)) {
        throw TrainingDiverged(divergence_report(epoch, batches, batch, loss.value, params));
      }
      ParamGrads grads = ParamGrads::zeros(dims);
      for (std::size_t l = 0; l < batch.size(); ++l) {
        grads += backward(params, caches[l], loss.grad[l]);
      }
      grads *= 1.0 / static_cast<double>(frames);
      adam.step(params, grads, cfg.learning_rate);
      loss_sum += loss.value;
      ++batches;
    }

    const auto dev_scores = predict_all(params, dev_ds);
    result.report = evaluate(dev_scores, dev_labels, cfg.eval);
    result.history.push_back({epoch + 1, loss_sum / static_cast<double>(batches),
                              result.report.micro_f, result.report.macro_f});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Experiments

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(ss / (n - 1.0));
  }
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

bool is_sweep_axis(const std::string& axis) {
  return axis == "srl.beta" || axis == "afl.zeta" || axis == "afl.gamma" ||
         axis == "ifl.gamma" || axis == "fbtl.alpha";
}

LossSpec apply_axis(const LossSpec& base, const std::string& axis, double value) {
  LossSpec out;
  if (axis == "srl.beta") {
    SrlSpec s;
    if (const auto* b = std::get_if<SrlSpec>(&base)) s = *b;
    s.beta = value;
    out = s;
  } else if (axis == "afl.zeta" || axis == "afl.gamma") {
    AflSpec s;
    if (const auto* b = std::get_if<AflSpec>(&base)) s = *b;
    (axis == "afl.zeta" ? s.zeta : s.gamma) = value;
    out = s;
  } else if (axis == "ifl.gamma") {
    IflSpec s;
    if (const auto* b = std::get_if<IflSpec>(&base)) s = *b;
    s.gamma = value;
    out = s;
  } else if (axis == "fbtl.alpha") {
    FbtlSpec s{0.5, 0.5, 0.0, 1.0};
    if (const auto* b = std::get_if<FbtlSpec>(&base)) s = *b;
    s.alpha = value;
    s.beta = 1.0 - value;
    out = s;
  } else {
    throw ConfigError("unknown sweep axis '" + axis +
                      "' (expected srl.beta, afl.zeta, afl.gamma, ifl.gamma or fbtl.alpha)");
  }
  validate(out);
  return out;
}

namespace {

struct Job {
  std::size_t row;
  TrainConfig cfg;
};

ExperimentTable run_jobs(std::vector<Job> jobs, std::size_t rows, const Dataset& train_ds,
                         const Dataset& dev_ds, int workers) {
  std::vector<RunResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const auto count = static_cast<long long>(jobs.size());
  const int threads = std::max(1, workers);
  SEDLOSS_OMP_PRAGMA("omp parallel for schedule(dynamic) num_threads(threads) if(threads > 1)")
  for (long long j = 0; j < count; ++j) {
    const auto k = static_cast<std::size_t>(j);
    try {
      results[k] = train(jobs[k].cfg, train_ds, dev_ds);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentTable table;
  table.rows.resize(rows);
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& cfg = jobs[k].cfg;
    table.runs.push_back(
        {loss_name(cfg.loss), loss_params(cfg.loss), cfg.seed, std::move(results[k])});
  }
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> mi_f, ma_f, mi_auc, ma_auc;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      if (jobs[k].row != r) continue;
      const auto& rep = table.runs[k].result.report;
      mi_f.push_back(rep.micro_f);
      ma_f.push_back(rep.macro_f);
      mi_auc.push_back(rep.micro_auc);
      ma_auc.push_back(rep.macro_auc);
      table.rows[r].method = table.runs[k].method;
      table.rows[r].params = table.runs[k].params;
    }
    table.rows[r].runs = mi_f.size();
    table.rows[r].micro_f = summarize(mi_f);
    table.rows[r].macro_f = summarize(ma_f);
    table.rows[r].micro_auc = summarize(mi_auc);
    table.rows[r].macro_auc = summarize(ma_auc);
  }
  return table;
}

}  // namespace

ExperimentTable sweep(const TrainConfig& base, const std::string& axis,
                      std::span<const double> values, std::size_t seeds,
                      const Dataset& train_ds, const Dataset& dev_ds, int workers) {
  if (!is_sweep_axis(axis)) {
    throw ConfigError("unknown sweep axis '" + axis +
                      "' (expected srl.beta, afl.zeta, afl.gamma, ifl.gamma or fbtl.alpha)");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (seeds == 0) throw ConfigError("sweep needs at least one seed");
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < values.size(); ++r) {
    for (std::size_t s = 0; s < seeds; ++s) {
      TrainConfig cfg = base;
      cfg.loss = apply_axis(base.loss, axis, values[r]);
      cfg.seed = s;
      jobs.push_back({r, std::move(cfg)});
    }
  }
  return run_jobs(std::move(jobs), values.size(), train_ds, dev_ds, workers);
}

ExperimentTable compare_losses(std::span<const TrainConfig> cfgs, std::size_t seeds,
                               const Dataset& train_ds, const Dataset& dev_ds, int workers) {
  if (cfgs.empty()) throw ConfigError("comparison needs at least one configuration");
  if (seeds == 0) throw ConfigError("comparison needs at least one seed");
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < cfgs.size(); ++r) {
    for (std::size_t s = 0; s < seeds; ++s) {
      TrainConfig cfg = cfgs[r];
      cfg.seed = s;
      jobs.push_back({r, std::move(cfg)});
    }
  }
  return run_jobs(std::move(jobs), cfgs.size(), train_ds, dev_ds, workers);
}

void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history) {
  os << "epoch,train_loss,dev_micro_f,dev_macro_f\n";
  for (const auto& h : history) {
    os << h.epoch << ',' << format_double(h.train_loss) << ',' << format_double(h.dev_micro_f)
       << ',' << format_double(h.dev_macro_f) << '\n';
  }
}

void write_runs_csv(std::ostream& os, const ExperimentTable& table,
                    const std::vector<std::string>& class_names) {
  write_metrics_header(os, class_names);
  for (const auto& run : table.runs) {
    std::string params = run.params;
    if (!params.empty()) params += ' ';
    params += "seed=" + std::to_string(run.seed);
    write_metrics_row(os, run.method, params, run.result.report);
  }
}

void write_summary_csv(std::ostream& os, const ExperimentTable& table) {
  os << "method,params,runs";
  for (const char* metric : {"micro_f", "macro_f", "micro_auc", "macro_auc"}) {
    os << ',' << metric << "_mean," << metric << "_std," << metric << "_median";
  }
  os << '\n';
  for (const auto& row : table.rows) {
    os << row.method << ',' << row.params << ',' << row.runs;
    for (const Summary* s : {&row.micro_f, &row.macro_f, &row.micro_auc, &row.macro_auc}) {
      os << ',' << format_double(s->mean) << ',' << format_double(s->stdev) << ','
         << format_double(s->median);
    }
    os << '\n';
  }
}

void print_summary(std::ostream& os, const ExperimentTable& table) {
  os << std::left << std::setw(6) << "method" << std::setw(40) << "params" << std::right
     << std::setw(5) << "runs" << std::setw(16) << "micro-F" << std::setw(16) << "macro-F"
     << std::setw(16) << "micro-AUC" << std::setw(16) << "macro-AUC" << '\n';
  auto cell = [&](const Summary& s) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << 100.0 * s.mean << "% +-" << std::setprecision(2)
      << 100.0 * s.stdev;
    os << std::setw(16) << c.str();
  };
  for (const auto& row : table.rows) {
    os << std::left << std::setw(6) << row.method << std::setw(40) << row.params << std::right
       << std::setw(5) << row.runs;
    cell(row.micro_f);
    cell(row.macro_f);
    cell(row.micro_auc);
    cell(row.macro_auc);
    os << '\n';
  }
}

}  // namespace sedloss
