#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "resshift/data.hpp"
#include "resshift/imageio.hpp"
#include "resshift/train.hpp"

using namespace resshift;

namespace {

RunConfig tiny_run() {
  RunConfig cfg;
  apply_config_text(cfg,
                    "dataset.count = 120\n"
                    "dataset.val_count = 20\n"
                    "dataset.height = 16\n"
                    "dataset.width = 16\n"
                    "denoiser.base_width = 4\n"
                    "denoiser.depth = 1\n"
                    "denoiser.time_embed_dim = 8\n"
                    "train.iterations = 8\n"
                    "train.batch_size = 4\n"
                    "train.log_every = 3\n"
                    "train.checkpoint_every = 4\n"
                    "train.val_psnr_images = 4\n"
                    "train.lr = 1e-3\n"
                    "train.seed = 5\n");
  return cfg;
}

}  // namespace

TEST_CASE("step-0 loss equals the mean square of the clean batch") {
  const RunConfig cfg = tiny_run();
  Trainer trainer(cfg);
  const double loss = trainer.step(false);
  const auto data = make_dataset(cfg.dataset);
  BatchStream stream(data, cfg.train.batch_size, cfg.degradation);
  const Batch b = stream.batch(0);
  double acc = 0;
  std::size_t n = 0;
  for (const auto& img : b.x0) {
    for (double v : img.values()) acc += v * v;
    n += img.size();
  }
  CHECK(loss == doctest::Approx(acc / n).epsilon(1e-12));
  CHECK(trainer.step_count() == 0);
}

TEST_CASE("training reduces the validation loss") {
  RunConfig cfg = tiny_run();
  Trainer trainer(cfg);
  const double before = trainer.validation_loss();
  for (int i = 0; i < 40; ++i) trainer.step();
  CHECK(trainer.step_count() == 40);
  CHECK(trainer.validation_loss() < before);
  CHECK(trainer.validation_loss() == trainer.validation_loss());
}

TEST_CASE("resume continues the same loss sequence") {
  const RunConfig cfg = tiny_run();
  Trainer straight(cfg);
  std::vector<double> ref;
  for (int i = 0; i < 6; ++i) ref.push_back(straight.step());

  Trainer first(cfg);
  for (int i = 0; i < 3; ++i) CHECK(first.step() == ref[i]);
  const std::string bytes = encode_checkpoint(first.checkpoint());
  Trainer second(cfg);
  second.resume(decode_checkpoint(bytes));
  CHECK(second.step_count() == 3);
  for (int i = 3; i < 6; ++i) CHECK(second.step() == ref[i]);
}

TEST_CASE("run_training writes log and checkpoints, and is reproducible") {
  const RunConfig cfg = tiny_run();
  const auto a = testutil::scratch_dir("train_a"), b = testutil::scratch_dir("train_b");
  std::ostringstream pa, pb;
  const auto sa = run_training(cfg, a, std::nullopt, pa);
  run_training(cfg, b, std::nullopt, pb);
  CHECK(sa.steps == 8);
  CHECK(read_file(a / "train_log.csv") == read_file(b / "train_log.csv"));
  CHECK(read_file(a / "model.rskt") == read_file(b / "model.rskt"));
  CHECK(std::filesystem::exists(a / "ckpt_4.rskt"));
  CHECK(std::filesystem::exists(a / "ckpt_8.rskt"));

  const std::string log = read_file(a / "train_log.csv");
  CHECK(log.rfind("step,loss,val_psnr,val_loss\n0,", 0) == 0);
  CHECK(log.find("\n3,") != std::string::npos);
  CHECK(log.find("\n6,") != std::string::npos);
  CHECK(log.find("\n8,") != std::string::npos);

  // Resuming from the midpoint appends the rows the full run wrote after it.
  const auto c = testutil::scratch_dir("train_c");
  RunConfig half = cfg;
  half.train.iterations = 4;
  std::ostringstream pc;
  run_training(half, c, std::nullopt, pc);
  run_training(cfg, c, c / "ckpt_4.rskt", pc);
  const std::string resumed = read_file(c / "train_log.csv");
  CHECK(resumed.substr(resumed.find("\n6,")) == log.substr(log.find("\n6,")));
  CHECK(read_file(c / "model.rskt") == read_file(a / "model.rskt"));
}

TEST_CASE("sampling with a trained model is deterministic") {
  const RunConfig cfg = tiny_run();
  Trainer trainer(cfg);
  for (int i = 0; i < 3; ++i) trainer.step();
  const auto& v = trainer.validation();
  const std::vector<Image> y0(v.y0.begin(), v.y0.begin() + 3);
  const std::vector<std::size_t> ids(v.ids.begin(), v.ids.begin() + 3);
  const auto before = trainer.net().evaluation_count();
  const auto p = sample_images(trainer.net(), trainer.schedule(), y0, ids, 9);
  CHECK(trainer.net().evaluation_count() - before == 15);
  CHECK(p == sample_images(trainer.net(), trainer.schedule(), y0, ids, 9));
  for (const auto& img : p) CHECK(img.within(0.0, 1.0));
}
