#include <CLI11.hpp>

#include <exception>
#include <iostream>

#include "commands.hpp"
#include "specvit/errors.hpp"

namespace {

void add_common(CLI::App* sub, specvit::cli::Common& c, bool needs_out) {
  sub->add_option("--config", c.config, "key=value config file")->check(CLI::ExistingFile);
  auto* out = sub->add_option("--out", c.out, "output path");
  if (needs_out) out->required();
  sub->add_option("--seed", c.seed, "global seed (overrides the config)");
  sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--set", c.overrides, "key=value override, repeatable");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packet-length spectrogram classifier"};
  app.require_subcommand(1);
  specvit::cli::Common common;

  std::vector<std::filesystem::path> ingest_files;
  auto* ingest = app.add_subcommand("ingest", "per-device packet statistics and a packet-count histogram");
  add_common(ingest, common, true);
  ingest->add_option("traces", ingest_files, "trace CSV files")->required()->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "generate a synthetic trace corpus from device.* profiles");
  add_common(synth, common, true);

  std::optional<std::filesystem::path> traces;
  auto* spectrogram = app.add_subcommand("spectrogram", "render every segment to PNG");
  add_common(spectrogram, common, true);
  spectrogram->add_option("--traces", traces, "trace CSV (default: synthesise)")->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train", "train one configuration into a run directory");
  add_common(train, common, true);
  train->add_option("--traces", traces, "trace CSV (default: synthesise)")->check(CLI::ExistingFile);

  std::filesystem::path run_dir;
  auto* evaluate = app.add_subcommand("evaluate", "re-score the test split of a run directory");
  add_common(evaluate, common, false);
  evaluate->add_option("run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  auto* sweep = app.add_subcommand("sweep", "train all 24 configurations");
  add_common(sweep, common, true);
  sweep->add_option("--traces", traces, "trace CSV (default: synthesise)")->check(CLI::ExistingFile);

  auto* crosseval = app.add_subcommand("crosseval", "evaluate a run on held-out segment lengths and overlaps");
  add_common(crosseval, common, false);
  crosseval->add_option("run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  namespace cli = specvit::cli;
  try {
    if (*ingest) return cli::cmd_ingest(common, ingest_files);
    if (*synth) return cli::cmd_synth(common);
    if (*spectrogram) return cli::cmd_spectrogram(common, traces);
    if (*train) return cli::cmd_train(common, traces);
    if (*evaluate) return cli::cmd_evaluate(common, run_dir);
    if (*sweep) return cli::cmd_sweep(common, traces);
    if (*crosseval) return cli::cmd_crosseval(common, run_dir);
  } catch (const specvit::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
