#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "specvit/errors.hpp"
#include "specvit/experiment.hpp"
#include "specvit/png_io.hpp"
#include "specvit/rng.hpp"
#include "specvit/synth.hpp"

namespace specvit::cli {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ValidationError("cannot write " + p.string());
  return out;
}

std::vector<PacketTrace> corpus(const KeyValueConfig& cfg, const std::optional<fs::path>& traces) {
  if (traces) return load_traces(*traces);
  const auto profiles = profiles_from_config(cfg);
  if (profiles.empty()) throw ValidationError("no traces: pass --traces or define device.<id>.* profiles");
  const auto length = cfg.get_int("synth.length", 20000);
  if (length < 2) throw ValidationError("synth.length must be >= 2");
  std::vector<PacketTrace> out;
  for (std::size_t d = 0; d < profiles.size(); ++d)
    out.push_back(generate_trace(profiles[d], static_cast<std::size_t>(length), static_cast<int>(d)));
  return out;
}

// Bar chart of packets per device, white bars on black, tallest bar full height.
void write_count_histogram(const fs::path& path, std::span<const std::size_t> counts) {
  constexpr std::size_t kBar = 24, kGap = 8, kHeight = 160;
  const std::size_t width = counts.size() * (kBar + kGap) + kGap;
  const std::size_t peak = std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end()));
  std::vector<std::uint8_t> rgb(kHeight * width * 3, 0);
  for (std::size_t d = 0; d < counts.size(); ++d) {
    const std::size_t bar = (counts[d] * kHeight + peak / 2) / peak;
    const std::size_t x0 = kGap + d * (kBar + kGap);
    for (std::size_t y = kHeight - bar; y < kHeight; ++y)
      for (std::size_t x = x0; x < x0 + kBar; ++x)
        for (std::size_t c = 0; c < 3; ++c) rgb[(y * width + x) * 3 + c] = 255;
  }
  write_png_rgb8(path, kHeight, width, rgb);
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string second_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  return line;
}

}  // namespace

KeyValueConfig Common::resolve() const {
  KeyValueConfig cfg;
  if (config) cfg = KeyValueConfig::load(*config);
  for (const auto& kv : overrides) cfg.set_assignment(kv);
  if (seed) cfg.set("seed", std::to_string(*seed));
  return cfg;
}

int cmd_ingest(const Common& c, const std::vector<fs::path>& trace_files) {
  auto out = open_out(c.out / "trace_stats.csv");
  out << "source,device_id,device_name,packets,mean_bytes,std_bytes,cv,min_bytes,max_bytes\n";
  std::vector<std::size_t> counts;
  for (const auto& file : trace_files) {
    for (const auto& t : load_traces(file)) {
      const auto s = trace_stats(t);
      out << file.filename().string() << ',' << t.device_id << ',' << t.device_name << ',' << t.count() << ','
          << format_double(s.mean_bytes) << ',' << format_double(s.std_bytes) << ',' << format_double(s.cv) << ','
          << s.min_bytes << ',' << s.max_bytes << '\n';
      counts.push_back(t.count());
    }
  }
  write_count_histogram(c.out / "packet_counts.png", counts);
  std::cout << counts.size() << " devices -> " << (c.out / "trace_stats.csv").string() << '\n';
  return 0;
}

int cmd_synth(const Common& c) {
  const auto traces = corpus(c.resolve(), std::nullopt);
  if (c.out.has_parent_path()) fs::create_directories(c.out.parent_path());
  save_traces(c.out, traces);
  std::cout << traces.size() << " synthetic traces -> " << c.out.string() << '\n';
  return 0;
}

int cmd_spectrogram(const Common& c, const std::optional<fs::path>& traces_path) {
  const auto cfg = c.resolve();
  const auto traces = corpus(cfg, traces_path);
  validate_corpus(traces);
  const auto f = feature_settings_from_config(cfg);

  std::vector<std::size_t> begin(traces.size(), 0), end;
  for (const auto& t : traces) end.push_back(in_distribution_end(t, f.ood_fraction));
  const auto set = build_spectrograms(traces, f.segmentation(), f.transform, begin, end);
  std::vector<std::size_t> all(set.specs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  // No split exists at this stage, so bounds pool every rendered segment.
  auto norm = fit_bounds(set, all, f.per_device_bounds);
  const auto images = render_all(set, norm, f);
  norm.channels = fit_channel_stats(images);

  fs::create_directories(c.out);
  save_sidecar(c.out / "norm.txt", norm);
  auto manifest = open_out(c.out / "images.csv");
  manifest << "file,device_id,segment_index,start_packet\n";
  const std::string suffix =
      "_" + std::string(to_string(f.transform.method)) + "_" + std::to_string(f.transform.resolution) + ".png";
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto name =
        std::to_string(set.labels[i]) + "_" + std::to_string(set.specs[i].segment_index) + suffix;
    write_png(c.out / name, images[i]);
    manifest << name << ',' << set.labels[i] << ',' << set.specs[i].segment_index << ',' << set.starts[i] << '\n';
  }
  std::cout << images.size() << " images -> " << c.out.string() << '\n';
  return 0;
}

int cmd_train(const Common& c, const std::optional<fs::path>& traces_path) {
  const auto cfg = c.resolve();
  const auto traces = corpus(cfg, traces_path);
  validate_corpus(traces);
  const auto settings = resolve_run_settings(cfg, traces.size());
  const auto outcome = run_experiment(traces, settings);
  write_run_directory(c.out, cfg, traces, outcome);
  std::cout << "test accuracy " << format_double(outcome.test.accuracy_pct) << "% (CI width "
            << format_double(outcome.test.ci_width_pct) << ") after " << outcome.history.epochs.size()
            << " epochs -> " << c.out.string() << '\n';
  return 0;
}

int cmd_evaluate(const Common& c, const fs::path& run_dir) {
  const auto run = load_run_directory(run_dir);
  const auto report = reevaluate(run);
  const fs::path dir = c.out.empty() ? run_dir / "evaluate" : c.out;
  {
    auto out = open_out(dir / "evaluation.csv");
    out << "accuracy,f1,ci_low,ci_high,ci_width,n_test\n"
        << format_double(report.accuracy_pct) << ',' << format_double(report.weighted_f1) << ','
        << format_double(report.ci_low) << ',' << format_double(report.ci_high) << ','
        << format_double(report.ci_width_pct) << ',' << report.n_test << '\n';
  }
  {
    auto out = open_out(dir / "confusion.csv");
    write_confusion_csv(out, report);
  }
  {
    auto out = open_out(dir / "per_class.csv");
    write_per_class_csv(out, report);
  }
  std::cout << "test accuracy " << format_double(report.accuracy_pct) << "% on " << report.n_test << " images\n";
  return 0;
}

int cmd_sweep(const Common& c, const std::optional<fs::path>& traces_path) {
  const auto base = c.resolve();
  const auto traces = corpus(base, traces_path);
  validate_corpus(traces);
  std::ostringstream trace_text;
  write_traces(trace_text, traces);
  const auto trace_hash = fnv1a(trace_text.str());

  const auto configs = enumerate_configs();
  std::vector<KeyValueConfig> cfgs;
  std::vector<fs::path> cache;
  for (const auto& ec : configs) {
    auto cfg = base;
    cfg.set("method", std::string(to_string(ec.method)));
    cfg.set("resolution", std::to_string(ec.resolution));
    cfg.set("seg_len", std::to_string(ec.seg_len));
    cfg.set("overlap", format_double(ec.overlap));
    resolve_run_settings(cfg, traces.size());  // fail before any training starts
    cache.push_back(c.out / "cache" / hex(mix64(fnv1a(cfg.to_string()) ^ trace_hash)));
    cfgs.push_back(std::move(cfg));
  }

  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < configs.size();) {
      try {
        if (fs::exists(cache[i] / "report.csv")) continue;
        const auto settings = resolve_run_settings(cfgs[i], traces.size());
        const auto outcome = run_experiment(traces, settings);
        const auto tmp = cache[i].string() + ".partial";
        fs::remove_all(tmp);
        write_run_directory(tmp, cfgs[i], traces, outcome);
        fs::rename(tmp, cache[i]);
        std::cout << "[" << i + 1 << "/" << configs.size() << "] " << cfgs[i].get_string("method", "") << " R="
                  << configs[i].resolution << " L=" << configs[i].seg_len << " overlap=" << configs[i].overlap
                  << ": " << format_double(outcome.test.accuracy_pct) << "%\n";
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < std::min(c.jobs, configs.size()); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  auto out = open_out(c.out / "sweep.csv");
  write_sweep_header(out);
  for (const auto& dir : cache) out << second_line(dir / "report.csv") << '\n';
  std::cout << configs.size() << " configurations -> " << (c.out / "sweep.csv").string() << '\n';
  return 0;
}

int cmd_crosseval(const Common& c, const fs::path& run_dir) {
  const auto cfg = c.resolve();
  const auto run = load_run_directory(run_dir);
  std::vector<std::size_t> seg_lens;
  for (auto v : cfg.get_ints("crosseval.seg_lens", {100, 200, 500})) {
    if (v < 2) throw ValidationError("crosseval.seg_lens entries must be >= 2");
    seg_lens.push_back(static_cast<std::size_t>(v));
  }
  const auto overlaps = cfg.get_doubles("crosseval.overlaps", {0.0, 0.25, 0.5, 0.75});
  const std::size_t longest = *std::max_element(seg_lens.begin(), seg_lens.end());
  for (std::size_t d = 0; d < run.traces.size(); ++d)
    if (run.traces[d].count() - run.trained.region_end[d] < longest)
      throw ValidationError("device " + std::to_string(d) + ": held-out suffix of " +
                            std::to_string(run.traces[d].count() - run.trained.region_end[d]) +
                            " packets is shorter than seg_len " + std::to_string(longest) +
                            " (train with a larger ood_fraction)");

  const auto result = cross_config_eval(run.trained, run.traces, run.trained.region_end, seg_lens, overlaps);
  const fs::path file = c.out.empty() ? run_dir / "crosseval.csv" : c.out;
  {
    auto out = open_out(file);
    write_crosseval_csv(out, run.trained, result);
  }
  {
    auto out = open_out(fs::path(file).replace_extension("").string() + "_cells.csv");
    write_crosseval_cells_csv(out, result);
  }
  std::cout << result.cells.size() << " cells, max pairwise gap " << format_double(result.max_pairwise_gap)
            << " points -> " << file.string() << '\n';
  return 0;
}

}  // namespace specvit::cli
