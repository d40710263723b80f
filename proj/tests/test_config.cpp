#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "resshift/config.hpp"
#include "resshift/error.hpp"

using namespace resshift;

TEST_CASE("defaults describe the toy run") {
  RunConfig cfg;
  CHECK(cfg.schedule == ScheduleParams{15, 0.3, 2.0});
  CHECK(cfg.dataset.height == 32);
  CHECK(cfg.degradation.scale_factor == 4);
  CHECK(cfg.train.iterations == 20000);
  CHECK(cfg.train.batch_size == 16);
  CHECK(!cfg.train.weighted_loss);
  CHECK(cfg.denoiser.in_channels == 2);
  CHECK(cfg.denoiser.steps == 15);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("set keys and derived fields") {
  RunConfig cfg;
  cfg.set("schedule.T", "9");
  cfg.set("dataset.channels", "3");
  cfg.set("degradation.down_modes", "area, bicubic");
  cfg.set("dataset.pattern_mix", "1,0,0,2");
  cfg.set("train.weighted_loss", "true");
  CHECK(cfg.denoiser.steps == 9);
  CHECK(cfg.denoiser.in_channels == 6);
  CHECK(cfg.degradation.down_modes == std::vector<DownMode>{DownMode::area, DownMode::bicubic});
  CHECK(cfg.dataset.pattern_mix[3] == 2.0);
  CHECK(cfg.train.weighted_loss);
  CHECK_THROWS_AS(cfg.set("schedule.q", "1"), UsageError);
  CHECK_THROWS_AS(cfg.set("schedule.T", "nine"), UsageError);
  CHECK_THROWS_AS(cfg.set("train.weighted_loss", "maybe"), UsageError);
  CHECK_THROWS_AS(cfg.set("dataset.pattern_mix", "1,2"), UsageError);
  CHECK_THROWS_AS(cfg.set("degradation.down_modes", "area,sinc"), UsageError);
}

TEST_CASE("to_text round trips through the parser") {
  RunConfig a;
  a.set("schedule.p", "0.5");
  a.set("train.lr", "0.000123");
  a.set("degradation.down_modes", "bilinear");
  RunConfig b;
  apply_config_text(b, a.to_text());
  CHECK(a == b);
  CHECK(config_keys().size() == 32);
}

TEST_CASE("config files") {
  RunConfig cfg;
  apply_config_text(cfg, "# comment\n\nschedule.kappa = 1.5  # trailing\n  train.batch_size=4\n");
  CHECK(cfg.schedule.kappa == 1.5);
  CHECK(cfg.train.batch_size == 4);
  try {
    apply_config_text(cfg, "schedule.T = 3\nbogus line\n");
    FAIL("accepted a malformed line");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  const auto dir = testutil::scratch_dir("config");
  std::ofstream(dir / "run.cfg") << "dataset.count = 300\n";
  apply_config_file(cfg, dir / "run.cfg");
  CHECK(cfg.dataset.count == 300);
  CHECK_THROWS_AS(apply_config_file(cfg, dir / "none.cfg"), UsageError);
}

TEST_CASE("cross-field validation") {
  RunConfig cfg;
  cfg.set("dataset.height", "34");
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = RunConfig();
  cfg.set("train.batch_size", "5000");
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = RunConfig();
  cfg.set("schedule.T", "1");
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = RunConfig();
  cfg.set("degradation.iso_prob", "2");
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("seed from the environment") {
  ::setenv("RESSHIFT_SEED", "99", 1);
  CHECK(default_seed() == 99);
  CHECK(RunConfig().train.seed == 99);
  ::setenv("RESSHIFT_SEED", "9x", 1);
  CHECK_THROWS_AS(default_seed(), UsageError);
  ::unsetenv("RESSHIFT_SEED");
  CHECK(default_seed(5) == 5);
}
