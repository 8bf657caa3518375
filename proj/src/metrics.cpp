#include "sedloss/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "sedloss/keyvalue.hpp"

namespace sedloss {

double Confusion::f1() const noexcept {
  const auto den = 2 * tp + fp + fn;
  return den == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

LabelGrid predict_labels(const PredictionGrid& y, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("detection threshold must lie in [0,1]");
  }
  LabelGrid out(y.frames(), y.classes());
  for (std::size_t n = 0; n < y.frames(); ++n) {
    for (std::size_t m = 0; m < y.classes(); ++m) out.set(n, m, y(n, m) >= threshold);
  }
  return out;
}

namespace {

template <typename A, typename B>
void check_aligned(std::span<const A> a, std::span<const B> b) {
  if (a.empty()) throw ValidationError("nothing to evaluate");
  if (a.size() != b.size()) throw ContractViolation("prediction and label clip counts differ");
  const std::size_t m = a.front().classes();
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].frames() != b[l].frames() || a[l].classes() != b[l].classes() ||
        a[l].classes() != m) {
      throw ContractViolation("prediction and label shapes differ");
    }
  }
}

}  // namespace

ConfusionCounts confusion_counts(std::span<const LabelGrid> pred,
                                 std::span<const LabelGrid> truth) {
  check_aligned(pred, truth);
  const std::size_t nclass = pred.front().classes();
  ConfusionCounts cc;
  cc.per_class.resize(nclass);
  for (std::size_t l = 0; l < pred.size(); ++l) {
    for (std::size_t n = 0; n < pred[l].frames(); ++n) {
      for (std::size_t m = 0; m < nclass; ++m) {
        const bool p = pred[l].active(n, m);
        const bool t = truth[l].active(n, m);
        auto& c = cc.per_class[m];
        (p ? (t ? c.tp : c.fp) : (t ? c.fn : c.tn)) += 1;
      }
    }
  }
  for (const auto& c : cc.per_class) {
    cc.pooled.tp += c.tp;
    cc.pooled.fp += c.fp;
    cc.pooled.fn += c.fn;
    cc.pooled.tn += c.tn;
  }
  return cc;
}

namespace {

FScores fscores_from(const ConfusionCounts& cc) {
  FScores f;
  f.per_class.reserve(cc.per_class.size());
  for (const auto& c : cc.per_class) f.per_class.push_back(c.f1());
  f.macro = std::accumulate(f.per_class.begin(), f.per_class.end(), 0.0) /
            static_cast<double>(f.per_class.size());
  f.micro = cc.pooled.f1();
  return f;
}

}  // namespace

FScores fscores(std::span<const LabelGrid> pred, std::span<const LabelGrid> truth) {
  return fscores_from(confusion_counts(pred, truth));
}

double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ContractViolation("score and label counts differ");
  const std::size_t count = scores.size();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  std::size_t i = 0;
  while (i < count) {
    std::size_t j = i;
    while (j < count && scores[order[j]] == scores[order[i]]) ++j;
    // tied block [i, j) shares the average of ranks i+1 .. j
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        positive_rank_sum += rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = count - positives;
  if (positives == 0 || negatives == 0) {
    throw ValidationError("AUC needs at least one positive and one negative");
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double roc_auc(std::span<const PredictionGrid> y, std::span<const LabelGrid> z, AucMode mode) {
  check_aligned(y, z);
  const std::size_t nclass = y.front().classes();
  if (mode == AucMode::kMicro) {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (std::size_t l = 0; l < y.size(); ++l) {
      scores.insert(scores.end(), y[l].values().flat().begin(), y[l].values().flat().end());
      labels.insert(labels.end(), z[l].values().flat().begin(), z[l].values().flat().end());
    }
    return binary_auc(scores, labels);
  }

  double sum = 0.0;
  std::size_t valid = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (std::size_t m = 0; m < nclass; ++m) {
    scores.clear();
    labels.clear();
    std::size_t positives = 0;
    for (std::size_t l = 0; l < y.size(); ++l) {
      for (std::size_t n = 0; n < y[l].frames(); ++n) {
        scores.push_back(y[l](n, m));
        const bool on = z[l].active(n, m);
        labels.push_back(on ? 1 : 0);
        positives += on ? 1 : 0;
      }
    }
    if (positives == 0 || positives == labels.size()) continue;
    sum += binary_auc(scores, labels);
    ++valid;
  }
  if (valid == 0) throw ValidationError("no class has both positive and negative frames");
  return sum / static_cast<double>(valid);
}

MetricsReport evaluate(std::span<const PredictionGrid> y, std::span<const LabelGrid> z,
                       const EvalConfig& cfg) {
  check_aligned(y, z);
  std::vector<LabelGrid> pred;
  pred.reserve(y.size());
  for (const auto& g : y) pred.push_back(predict_labels(g, cfg.threshold));
  MetricsReport r;
  r.confusion = confusion_counts(pred, z);
  const FScores f = fscores_from(r.confusion);
  r.micro_f = f.micro;
  r.macro_f = f.macro;
  r.per_class_f = f.per_class;
  r.micro_auc = roc_auc(y, z, AucMode::kMicro);
  r.macro_auc = roc_auc(y, z, AucMode::kMacro);
  return r;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_metrics_header(std::ostream& os, const std::vector<std::string>& class_names) {
  os << "method,params,micro_f,macro_f,micro_auc,macro_auc";
  for (const auto& name : class_names) os << ',' << csv_field("f_" + name);
  os << '\n';
}

void write_metrics_row(std::ostream& os, const std::string& method, const std::string& params,
                       const MetricsReport& report) {
  os << csv_field(method) << ',' << csv_field(params) << ',' << format_double(report.micro_f)
     << ',' << format_double(report.macro_f) << ',' << format_double(report.micro_auc) << ','
     << format_double(report.macro_auc);
  for (double f : report.per_class_f) os << ',' << format_double(f);
  os << '\n';
}

}  // namespace sedloss
