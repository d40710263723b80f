#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "resshift/cli.hpp"
#include "resshift/imageio.hpp"

using namespace resshift;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

// Flags for a run small enough to train in a second.
std::vector<std::string> tiny_flags() {
  return {"--set", "dataset.count=60",          "--set", "dataset.val_count=6",
          "--set", "dataset.height=16",         "--set", "dataset.width=16",
          "--set", "denoiser.time_embed_dim=8", "--set", "train.val_psnr_images=2",
          "--seed", "3"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("schedule command") {
  const auto r = run({"schedule", "--T", "15", "--p", "0.3", "--kappa", "2.0"});
  CHECK(r.code == kExitOk);
  CHECK(count_lines(r.out) == 16);
  CHECK(r.out.find("\n15,0.999,") != std::string::npos);
  CHECK(run({"schedule", "--T", "1"}).code == kExitUsage);
  CHECK(run({"schedule", "--kappa", "-1"}).code == kExitUsage);
  CHECK(run({"schedule", "--bogus"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);

  const auto dir = testutil::scratch_dir("cli_sweep");
  const auto s = run({"schedule", "--sweep", "p=0.3,0.5,1,2,3", "--out-dir", dir.string()});
  CHECK(s.code == kExitOk);
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator()) == 5);
  CHECK(run({"schedule", "--sweep", "q=1"}).code == kExitUsage);
}

TEST_CASE("diffuse command") {
  const auto a = testutil::scratch_dir("cli_diffuse_a"), b = testutil::scratch_dir("cli_diffuse_b");
  CHECK(run({"diffuse", "--toy-index", "4", "--seed", "2", "--out-dir", a.string()}).code == kExitOk);
  CHECK(run({"diffuse", "--toy-index", "4", "--seed", "2", "--out-dir", b.string()}).code == kExitOk);
  for (const char* f : {"hr.pgm", "y0.pgm", "x_01.pgm", "x_15.pgm"}) {
    CAPTURE(f);
    CHECK(read_file(a / f) == read_file(b / f));
  }
  CHECK(run({"diffuse", "--toy-index", "4", "--timesteps", "3,16", "--out-dir", a.string()}).code ==
        kExitUsage);
  CHECK(run({"diffuse", "--out-dir", a.string()}).code == kExitUsage);

  // HR and LR from files.
  write_image(read_image(a / "hr.pgm"), a / "in_hr.pgm");
  write_image(Image({1, 8, 8}, 0.5), a / "in_lr.pgm");
  CHECK(run({"diffuse", "--hr", (a / "in_hr.pgm").string(), "--lr", (a / "in_lr.pgm").string(),
             "--timesteps", "15", "--out-dir", (a / "files").string()})
            .code == kExitOk);
}

TEST_CASE("train, sample and eval") {
  const auto dir = testutil::scratch_dir("cli_pipeline");
  const auto run_dir = dir / "run";
  auto train_args = concat({"train", "--out-dir", run_dir.string(), "--iterations", "4",
                            "--batch-size", "4", "--width", "4", "--depth", "1", "--log-every", "2"},
                           tiny_flags());
  const auto t = run(train_args);
  REQUIRE(t.code == kExitOk);
  CHECK(t.out.find("steps=4") != std::string::npos);
  CHECK(fs::exists(run_dir / "model.rskt"));
  CHECK(fs::exists(run_dir / "config.txt"));
  const std::string ckpt = (run_dir / "model.rskt").string();
  const std::string cfg = (run_dir / "config.txt").string();

  // Sample
  const auto s = run({"sample", "--checkpoint", ckpt, "--config", cfg, "--toy-index", "1", "--out",
                      (dir / "sr.pgm").string(), "--trajectory", (dir / "traj").string()});
  REQUIRE(s.code == kExitOk);
  CHECK(s.out.find("denoiser_evaluations=15") != std::string::npos);
  CHECK(read_image(dir / "sr.pgm").shape() == Shape{1, 16, 16});
  CHECK(fs::exists(dir / "traj" / "x_15.pgm"));
  CHECK(fs::exists(dir / "traj" / "x_00.pgm"));
  run({"sample", "--checkpoint", ckpt, "--config", cfg, "--toy-index", "1", "--out",
       (dir / "sr2.pgm").string()});
  CHECK(read_file(dir / "sr.pgm") == read_file(dir / "sr2.pgm"));
  write_image(Image({1, 4, 4}, 0.25), dir / "lr.pgm");
  const auto from_file = run({"sample", "--checkpoint", ckpt, "--lr", (dir / "lr.pgm").string(),
                              "--out", (dir / "sr3.pgm").string()});
  CHECK(from_file.code == kExitOk);
  CHECK(read_image(dir / "sr3.pgm").shape() == Shape{1, 16, 16});
  CHECK(run({"sample", "--checkpoint", ckpt, "--toy-index", "1", "--steps", "10", "--out",
             (dir / "x.pgm").string()})
            .code == kExitUsage);
  CHECK(run({"sample", "--checkpoint", ckpt, "--T", "10", "--toy-index", "1", "--out",
             (dir / "x.pgm").string()})
            .code == kExitUsage);
  CHECK(run({"sample", "--checkpoint", (dir / "missing.rskt").string(), "--toy-index", "1", "--out",
             (dir / "x.pgm").string()})
            .code == kExitUsage);

  // Eval with a checkpoint, saving pairs, then eval the saved directory.
  const auto e = run({"eval", "--checkpoint", ckpt, "--config", cfg, "--baseline", "nearest",
                      "--out", (dir / "report.csv").string(), "--save-dir", (dir / "pairs").string()});
  REQUIRE(e.code == kExitOk);
  CHECK(e.out.find("sr mean_psnr=") != std::string::npos);
  CHECK(e.out.find("nearest mean_psnr=") != std::string::npos);
  CHECK(count_lines(read_file(dir / "report.csv")) == 6 + 2);
  CHECK(fs::exists(dir / "report_nearest.csv"));

  const auto d = run({"eval", "--config", cfg, "--dir", (dir / "pairs").string(), "--baseline", "nearest"});
  REQUIRE(d.code == kExitOk);
  // Saved images are quantized, so the directory report is close to, not equal to, the first.
  CHECK(count_lines(d.out) == 2 * (6 + 2));

  // Self-evaluation hits the PSNR cap.
  const auto self = testutil::scratch_dir("cli_self");
  for (const auto& entry : fs::directory_iterator(dir / "pairs")) {
    const std::string name = entry.path().filename().string();
    if (name.find("_hr") != std::string::npos) {
      fs::copy_file(entry.path(), self / name);
      std::string sr = name;
      sr.replace(sr.find("_hr"), 3, "_sr");
      fs::copy_file(entry.path(), self / sr);
    }
  }
  const auto me = run({"eval", "--dir", self.string()});
  CHECK(me.out.find("\nmean,99,1,0\n") != std::string::npos);

  fs::remove(self / fs::directory_iterator(self)->path().filename());
  CHECK(run({"eval", "--dir", self.string()}).code == kExitUsage);
  CHECK(run({"eval"}).code == kExitUsage);
  CHECK(run({"eval", "--dir", self.string(), "--baseline", "bicubic"}).code == kExitUsage);

  // Resume continues to the new iteration count.
  const auto r = run(concat({"train", "--out-dir", run_dir.string(), "--iterations", "6", "--batch-size",
                             "4", "--width", "4", "--depth", "1", "--log-every", "2", "--resume", ckpt},
                            tiny_flags()));
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("steps=6") != std::string::npos);
}

TEST_CASE("train rejects bad configs") {
  const auto dir = testutil::scratch_dir("cli_badtrain");
  CHECK(run({"train", "--out-dir", dir.string(), "--set", "dataset.height=30"}).code == kExitUsage);
  CHECK(run({"train", "--out-dir", dir.string(), "--set", "nope=1"}).code == kExitUsage);
  CHECK(run({"train", "--out-dir", dir.string(), "--config", (dir / "none.cfg").string()}).code ==
        kExitUsage);
}

TEST_CASE("diverging training exits with its own code") {
  const auto dir = testutil::scratch_dir("cli_diverge");
  const auto r = run(concat({"train", "--out-dir", dir.string(), "--iterations", "3", "--batch-size", "2",
                             "--width", "4", "--depth", "1", "--lr", "1e300"},
                            tiny_flags()));
  CHECK(r.code == kExitDiverged);
}

TEST_CASE("gradcheck command") {
  const auto ok = run({"gradcheck"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.rfind("group,entries,rel_error\n", 0) == 0);
  // conv_in weight and bias, time weight and bias, ..., once each.
  CHECK(ok.out.find("out.conv.weight,") != std::string::npos);
  std::set<std::string> groups;
  std::istringstream is(ok.out);
  std::string line;
  std::getline(is, line);
  int rows = 0;
  while (std::getline(is, line) && line.find(',') != std::string::npos) {
    groups.insert(line.substr(0, line.find(',')));
    ++rows;
  }
  CHECK(rows == static_cast<int>(groups.size()));
  CHECK(rows > 20);
  CHECK(run({"gradcheck", "--corrupt-backward"}).code == kExitCheckFailed);
}
