#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "specvit/png_io.hpp"
#include "specvit/segmentation.hpp"
#include "specvit/spectral.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using specvit::testing::scratch_dir;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args, const fs::path& work) {
  const auto out = work / "stdout.txt", err = work / "stderr.txt";
  const std::string cmd = std::string(SPECVIT_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Three clean tones; tiny enough that all 24 configurations train in seconds.
fs::path write_tiny_config(const fs::path& dir, double ood_fraction) {
  const auto p = dir / "tiny.conf";
  std::ofstream out(p);
  out << "seed = 5\nimage_size = 16\nood_fraction = " << ood_fraction << "\n"
      << "[synth]\nlength = 4000\n"
      << "[vit]\npatch_size = 8\nembed_dim = 8\nlayers = 1\nheads = 2\nmlp_dim = 16\n"
      << "[train]\nmax_epochs = 2\npatience = 2\npeak_lr = 3e-3\n"
      << "[eval]\nresamples = 100\n";
  const double freqs[] = {0.125, 0.25, 0.375};
  for (int d = 0; d < 3; ++d)
    out << "[device." << d << "]\nbase_bytes = 400\nnoise_std = 5\nseed = " << 30 + d << "\ncomponents = " << freqs[d]
        << ":200\n";
  return p;
}

}  // namespace

TEST(Cli, CorruptRowExitsTwoNamingFileAndLine) {
  const auto dir = scratch_dir("cli_corrupt");
  const auto bad = dir / "bad.csv";
  std::ofstream(bad) << "device_id,device_name,packet_index,length_bytes\n0,a,0,100\n0,a,1,oops\n";
  const auto r = cli("ingest --out " + (dir / "o").string() + " " + bad.string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.csv:3"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitTwo) {
  const auto dir = scratch_dir("cli_usage");
  EXPECT_EQ(cli("frobnicate", dir).code, 2);
  EXPECT_EQ(cli("train --out " + dir.string() + " --set seg_len=1", dir).code, 2);
  EXPECT_EQ(cli("synth --out " + (dir / "t.csv").string(), dir).code, 2);  // no profiles
}

TEST(Cli, IngestReportsDropcamMean) {
  const auto dir = scratch_dir("cli_ingest");
  const auto r = cli("ingest --out " + dir.string() + " " SPECVIT_FIXTURE_DIR "/dropcam_like.csv", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(dir / "trace_stats.csv");
  ASSERT_EQ(rows.size(), 2u);
  std::stringstream row(rows[1]);
  std::vector<std::string> f;
  for (std::string cell; std::getline(row, cell, ',');) f.push_back(cell);
  ASSERT_EQ(f.size(), 9u);
  EXPECT_EQ(f[2], "Dropcam");
  EXPECT_EQ(f[3], "3000");
  EXPECT_NEAR(std::stod(f[4]), 113.1, 0.05);
  EXPECT_TRUE(fs::exists(dir / "packet_counts.png"));
}

TEST(Cli, SpectrogramImagesCountedDeterministicAndToneBright) {
  const auto dir = scratch_dir("cli_spec");
  const auto cfg = write_tiny_config(dir, 0.0);
  const std::string common = " --config " + cfg.string() + " --set synth.length=1000 --set image_size=33";
  const auto a = cli("spectrogram --out " + (dir / "a").string() + common, dir);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(cli("spectrogram --out " + (dir / "b").string() + common, dir).code, 0);

  const auto per_device = specvit::segment_count(1000, {100, 0.0});
  const auto manifest = lines(dir / "a" / "images.csv");
  ASSERT_EQ(manifest.size(), 1 + 3 * per_device);
  EXPECT_TRUE(fs::exists(dir / "a" / "norm.txt"));

  // R = 16 gives 9 frequency rows; with 33 pixel rows bin k lands on row 4k.
  // Tones sit on bins 2, 4 and 6, away from DC and Nyquist, whose leakage can
  // match the tone bin at some phases.
  const double freqs[] = {0.125, 0.25, 0.375};
  for (int d = 0; d < 3; ++d)
    for (std::size_t s = 0; s < per_device; ++s) {
      const auto name = std::to_string(d) + "_" + std::to_string(s) + "_STFT_16.png";
      ASSERT_TRUE(fs::exists(dir / "a" / name)) << name;
      EXPECT_EQ(slurp(dir / "a" / name), slurp(dir / "b" / name)) << name;
      const auto img = specvit::read_png(dir / "a" / name);
      std::size_t best = 0;
      double best_sum = -1.0;
      for (std::size_t r = 0; r < img.height; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < img.width; ++c) sum += img.at(r, c, 0);
        if (sum > best_sum) {
          best_sum = sum;
          best = r;
        }
      }
      EXPECT_EQ(best, static_cast<std::size_t>(std::lround(freqs[d] * 16)) * 4) << name;
    }
}

TEST(Cli, TrainEvaluateCrossevalRoundTrip) {
  const auto dir = scratch_dir("cli_train");
  const auto cfg = write_tiny_config(dir, 0.5);
  const auto run = dir / "run";
  const auto t = cli("train --config " + cfg.string() + " --out " + run.string(), dir);
  ASSERT_EQ(t.code, 0) << t.err;
  for (const char* f : {"config.txt", "history.csv", "best.ckpt", "split.csv", "norm.txt", "traces.csv", "report.csv"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  EXPECT_EQ(lines(run / "history.csv").front(), "epoch,train_loss,train_acc,val_loss,val_acc,lr");

  // The config file is not needed again: the run directory describes itself.
  fs::remove(cfg);
  const auto e = cli("evaluate " + run.string(), dir);
  ASSERT_EQ(e.code, 0) << e.err;
  const auto report = lines(run / "report.csv");
  const auto evaluation = lines(run / "evaluate" / "evaluation.csv");
  ASSERT_EQ(evaluation.size(), 2u);
  // report.csv columns: method,R,seg_len,overlap,train,val,test,...
  std::vector<std::string> rf;
  std::stringstream rs(report[1]);
  for (std::string c; std::getline(rs, c, ',');) rf.push_back(c);
  EXPECT_EQ(evaluation[1].substr(0, evaluation[1].find(',')), rf[6]);
  EXPECT_EQ(slurp(run / "confusion.csv"), slurp(run / "evaluate" / "confusion.csv"));

  const auto x = cli("crosseval " + run.string(), dir);
  ASSERT_EQ(x.code, 0) << x.err;
  const auto wide = lines(run / "crosseval.csv");
  ASSERT_EQ(wide.size(), 2u);
  std::size_t cells = 0;
  for (std::size_t pos = 0; (pos = wide[0].find(",L", pos)) != std::string::npos; ++pos) ++cells;
  EXPECT_EQ(cells, 12u);
  EXPECT_NE(wide[1].find(",L100_o0,"), std::string::npos);  // training cell flagged by name
  EXPECT_EQ(lines(run / "crosseval_cells.csv").size(), 13u);
}

TEST(Cli, CrossevalRejectsRunWithoutHeldOutSuffix) {
  const auto dir = scratch_dir("cli_noood");
  const auto cfg = write_tiny_config(dir, 0.0);
  ASSERT_EQ(cli("train --config " + cfg.string() + " --out " + (dir / "run").string(), dir).code, 0);
  const auto x = cli("crosseval " + (dir / "run").string(), dir);
  EXPECT_EQ(x.code, 2);
  EXPECT_NE(x.err.find("held-out"), std::string::npos) << x.err;
}

TEST(Cli, SweepWritesAllConfigurationsAndReusesCache) {
  const auto dir = scratch_dir("cli_sweep");
  const auto cfg = write_tiny_config(dir, 0.0);
  const auto out = dir / "sweep";
  const auto s = cli("sweep --config " + cfg.string() + " --out " + out.string() + " --jobs 2", dir);
  ASSERT_EQ(s.code, 0) << s.err;
  const auto rows = lines(out / "sweep.csv");
  ASSERT_EQ(rows.size(), 25u);
  EXPECT_EQ(rows[0], "method,R,seg_len,overlap,train_acc,val_acc,test_acc,f1,ci_width");
  EXPECT_EQ(rows[1].substr(0, 14), "STFT,16,100,0,");
  EXPECT_EQ(rows[24].substr(0, 15), "CWT,64,500,0.5,");

  const auto first = slurp(out / "sweep.csv");
  const auto again = cli("sweep --config " + cfg.string() + " --out " + out.string(), dir);
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(again.out.find('['), std::string::npos) << "cached configurations were retrained";
  EXPECT_EQ(slurp(out / "sweep.csv"), first);
}
