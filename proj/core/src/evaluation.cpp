#include "specvit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "specvit/config.hpp"
#include "specvit/errors.hpp"
#include "specvit/rng.hpp"

namespace specvit {
namespace {

void check_pair(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size())
    throw ValidationError("predictions and labels differ in length (" + std::to_string(preds.size()) + " vs " +
                          std::to_string(labels.size()) + ")");
  if (preds.empty()) throw ValidationError("no predictions to score");
}

std::size_t class_count(std::span<const int> preds, std::span<const int> labels) {
  int mx = 0;
  for (int v : preds) mx = std::max(mx, v);
  for (int v : labels) mx = std::max(mx, v);
  return static_cast<std::size_t>(mx) + 1;
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double weighted_f1_from(const std::vector<ClassMetrics>& per_class) {
  std::size_t total = 0;
  for (const auto& c : per_class) total += c.support;
  double f1 = 0.0;
  for (const auto& c : per_class)
    f1 += static_cast<double>(c.support) / static_cast<double>(total) * c.f1;
  return f1;
}

std::string cell_name(std::size_t seg_len, double overlap) {
  return "L" + std::to_string(seg_len) + "_o" + std::to_string(std::lround(overlap * 100.0));
}

}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  check_pair(preds, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> preds, std::span<const int> labels,
                                                       std::size_t num_classes) {
  check_pair(preds, labels);
  std::vector<std::vector<std::size_t>> m(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || labels[i] < 0 || static_cast<std::size_t>(preds[i]) >= num_classes ||
        static_cast<std::size_t>(labels[i]) >= num_classes)
      throw ValidationError("class index outside [0, " + std::to_string(num_classes) + ")");
    ++m[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
  }
  return m;
}

std::vector<ClassMetrics> per_class_metrics(const std::vector<std::vector<std::size_t>>& confusion) {
  const std::size_t k = confusion.size();
  std::vector<ClassMetrics> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = confusion[c][c], predicted = 0, actual = 0;
    for (std::size_t j = 0; j < k; ++j) {
      actual += confusion[c][j];
      predicted += confusion[j][c];
    }
    auto& m = out[c];
    m.support = actual;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  return out;
}

double weighted_f1(std::span<const int> preds, std::span<const int> labels) {
  check_pair(preds, labels);
  return weighted_f1_from(per_class_metrics(confusion_matrix(preds, labels, class_count(preds, labels))));
}

ConfidenceInterval bootstrap_ci(std::span<const int> preds, std::span<const int> labels, std::size_t resamples,
                                double level, std::uint64_t seed) {
  check_pair(preds, labels);
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  if (resamples < 100) throw ValidationError("bootstrap needs at least 100 resamples");
  const std::size_t n = preds.size();
  std::vector<char> hit(n);
  for (std::size_t i = 0; i < n; ++i) hit[i] = preds[i] == labels[i];

  Rng rng(seed);
  std::vector<double> accs(resamples);
  for (auto& a : accs) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += static_cast<std::size_t>(hit[rng.below(n)]);
    a = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
  }
  std::sort(accs.begin(), accs.end());
  ConfidenceInterval ci;
  ci.low = percentile_sorted(accs, (1.0 - level) / 2.0);
  ci.high = percentile_sorted(accs, (1.0 + level) / 2.0);
  ci.width = ci.high - ci.low;
  return ci;
}

EvalReport make_report(std::span<const int> preds, std::span<const int> labels, std::size_t num_classes,
                       const EvalOptions& options) {
  check_pair(preds, labels);
  EvalReport r;
  r.n_test = preds.size();
  r.confusion = confusion_matrix(preds, labels, num_classes);
  r.per_class = per_class_metrics(r.confusion);
  r.accuracy_pct = accuracy(preds, labels);
  r.weighted_f1 = weighted_f1_from(r.per_class);
  const auto ci = bootstrap_ci(preds, labels, options.resamples, options.level, options.seed);
  r.ci_low = ci.low;
  r.ci_high = ci.high;
  r.ci_width_pct = ci.width;
  return r;
}

std::vector<int> predict(const VitModel& model, const ChannelStats& stats, std::span<const SpectroImage> images) {
  std::vector<int> preds;
  preds.reserve(images.size());
  for (const auto& img : images) preds.push_back(forward(standardize_image(img, stats), model).predicted);
  return preds;
}

EvalReport evaluate(const VitModel& model, const ChannelStats& stats, const LabeledImages& test,
                    const EvalOptions& options) {
  if (test.images.empty()) throw ValidationError("empty test set");
  const auto preds = predict(model, stats, test.images);
  return make_report(preds, test.labels, model.config.num_classes, options);
}

std::vector<ExperimentConfig> enumerate_configs() {
  std::vector<ExperimentConfig> out;
  for (Method m : {Method::Stft, Method::Cwt})
    for (std::size_t r : {16, 32, 64})
      for (std::size_t len : {100, 500})
        for (double ov : {0.0, 0.5}) out.push_back({m, r, len, ov});
  return out;
}

void write_sweep_header(std::ostream& out) {
  out << "method,R,seg_len,overlap,train_acc,val_acc,test_acc,f1,ci_width\n";
}

void write_sweep_row(std::ostream& out, const SweepRow& row) {
  const auto& c = row.config;
  out << to_string(c.method) << ',' << c.resolution << ',' << c.seg_len << ',' << format_double(c.overlap) << ','
      << format_double(row.train_acc_pct) << ',' << format_double(row.val_acc_pct) << ','
      << format_double(row.test.accuracy_pct) << ',' << format_double(row.test.weighted_f1) << ','
      << format_double(row.test.ci_width_pct) << '\n';
}

void write_confusion_csv(std::ostream& out, const EvalReport& report) {
  out << "true\\pred";
  for (std::size_t j = 0; j < report.confusion.size(); ++j) out << ',' << j;
  out << '\n';
  for (std::size_t i = 0; i < report.confusion.size(); ++i) {
    out << i;
    for (auto v : report.confusion[i]) out << ',' << v;
    out << '\n';
  }
}

void write_per_class_csv(std::ostream& out, const EvalReport& report) {
  out << "device_id,precision,recall,f1,support\n";
  for (std::size_t i = 0; i < report.per_class.size(); ++i) {
    const auto& c = report.per_class[i];
    out << i << ',' << format_double(c.precision) << ',' << format_double(c.recall) << ',' << format_double(c.f1)
        << ',' << c.support << '\n';
  }
}

CrossConfigResult cross_config_eval(const TrainedPipeline& trained, std::span<const PacketTrace> traces,
                                    std::span<const std::size_t> ood_begin, std::span<const std::size_t> seg_lens,
                                    std::span<const double> overlaps) {
  if (ood_begin.size() != traces.size() || trained.region_end.size() != traces.size())
    throw ValidationError("cross-config evaluation needs one held-out region per device");
  for (std::size_t d = 0; d < traces.size(); ++d)
    if (ood_begin[d] < trained.region_end[d])
      throw ValidationError("held-out region of device " + std::to_string(d) + " starts at packet " +
                            std::to_string(ood_begin[d]) + ", inside the training region ending at " +
                            std::to_string(trained.region_end[d]));
  if (seg_lens.empty() || overlaps.empty()) throw ValidationError("empty cross-config grid");

  std::vector<std::size_t> end(traces.size());
  for (std::size_t d = 0; d < traces.size(); ++d) end[d] = traces[d].count();

  CrossConfigResult result;
  result.seg_lens.assign(seg_lens.begin(), seg_lens.end());
  result.overlaps.assign(overlaps.begin(), overlaps.end());
  for (auto len : seg_lens) {
    double lo = 100.0, hi = 0.0;
    for (double ov : overlaps) {
      FeatureSettings cell = trained.features;
      cell.seg_len = len;
      cell.overlap = ov;
      const auto set = build_spectrograms(traces, cell.segmentation(), cell.transform, ood_begin, end);
      const auto images = render_all(set, trained.norm, cell);
      const auto preds = predict(trained.model, trained.norm.channels, images);
      CrossConfigCell c;
      c.seg_len = len;
      c.overlap = ov;
      c.n = preds.size();
      c.accuracy_pct = accuracy(preds, set.labels);
      c.in_distribution = len == trained.features.seg_len && std::abs(ov - trained.features.overlap) < 1e-12;
      lo = std::min(lo, c.accuracy_pct);
      hi = std::max(hi, c.accuracy_pct);
      result.cells.push_back(c);
    }
    result.overlap_spread.push_back(hi - lo);
  }
  for (const auto& a : result.cells)
    for (const auto& b : result.cells)
      result.max_pairwise_gap = std::max(result.max_pairwise_gap, std::abs(a.accuracy_pct - b.accuracy_pct));
  return result;
}

void write_crosseval_csv(std::ostream& out, const TrainedPipeline& trained, const CrossConfigResult& result) {
  out << "method,R,train_seg_len,train_overlap";
  for (const auto& c : result.cells) out << ',' << cell_name(c.seg_len, c.overlap);
  out << ",in_distribution_cell,max_gap";
  for (auto len : result.seg_lens) out << ",spread_L" << len;
  out << '\n';

  const auto& f = trained.features;
  out << to_string(f.transform.method) << ',' << f.transform.resolution << ',' << f.seg_len << ','
      << format_double(f.overlap);
  std::string flagged = "none";
  for (const auto& c : result.cells) {
    out << ',' << format_double(c.accuracy_pct);
    if (c.in_distribution) flagged = cell_name(c.seg_len, c.overlap);
  }
  out << ',' << flagged << ',' << format_double(result.max_pairwise_gap);
  for (double s : result.overlap_spread) out << ',' << format_double(s);
  out << '\n';
}

void write_crosseval_cells_csv(std::ostream& out, const CrossConfigResult& result) {
  out << "seg_len,overlap,accuracy,n,in_distribution\n";
  for (const auto& c : result.cells)
    out << c.seg_len << ',' << format_double(c.overlap) << ',' << format_double(c.accuracy_pct) << ',' << c.n
        << ',' << (c.in_distribution ? 1 : 0) << '\n';
}

}  // namespace specvit
