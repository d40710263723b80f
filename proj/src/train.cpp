#include "resshift/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "resshift/diffusion.hpp"
#include "resshift/error.hpp"
#include "resshift/metrics.hpp"

namespace resshift {

namespace {

constexpr std::uint64_t kTimestepStream = 11;
constexpr std::uint64_t kMarginalStream = 12;
constexpr std::uint64_t kValLossStream = 13;
constexpr std::uint64_t kSampleStream = 14;
// Images per forward pass outside training.
constexpr std::size_t kEvalChunk = 50;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Rng sample_rng(std::uint64_t seed, std::size_t id) { return Rng(mix_seed(seed, id), kSampleStream); }

std::vector<Image> sample_images(nn::Denoiser& net, const NoiseSchedule& schedule,
                                 std::span<const Image> y0, std::span<const std::size_t> ids,
                                 std::uint64_t seed) {
  if (y0.size() != ids.size()) throw InvalidParameter("sample_images: ids and images differ in length");
  std::vector<Image> out;
  const BatchPredictor predictor = batch_predictor_for(net);
  for (std::size_t start = 0; start < y0.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, y0.size() - start);
    std::vector<Rng> rngs;
    for (std::size_t i = 0; i < n; ++i) rngs.push_back(sample_rng(seed, ids[start + i]));
    auto chunk = sample_batch(y0.subspan(start, n), predictor, schedule, rngs);
    for (auto& img : chunk) out.push_back(std::move(img));
  }
  return out;
}

Trainer::Trainer(const RunConfig& cfg)
    : cfg_(cfg),
      schedule_(build_schedule(cfg.schedule)),
      data_(make_dataset(cfg.dataset)),
      val_(make_validation(data_, cfg.degradation)),
      stream_(data_, cfg.train.batch_size, cfg.degradation),
      net_(cfg.denoiser, mix_seed(cfg.train.seed, 0x1417)) {
  cfg_.validate();
  net_.set_conditioning(input_conditioning(schedule_));
  adam_.lr = cfg.train.lr;
}

double Trainer::step(bool update) {
  const Batch batch = stream_.batch(step_);
  const std::size_t n = batch.x0.size();
  Rng trng(mix_seed(cfg_.train.seed, step_), kTimestepStream);
  std::vector<int> steps(n);
  for (auto& t : steps) t = 1 + static_cast<int>(trng.below(schedule_.steps()));
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < n; ++i) rngs.emplace_back(mix_seed(cfg_.train.seed, step_, i), kMarginalStream);
  const double loss = training_loss_batch(batch.x0, batch.y0, steps, net_, schedule_, rngs,
                                          cfg_.train.weighted_loss, update);
  if (!std::isfinite(loss)) {
    throw TrainingDivergence("non-finite training loss at step " + std::to_string(step_));
  }
  if (update) {
    nn::adam_step(net_.parameters(), adam_);
    ++step_;
  }
  return loss;
}

double Trainer::validation_loss() {
  const std::size_t total = val_.hr.size();
  if (total == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t start = 0; start < total; start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, total - start);
    std::vector<int> steps(n);
    std::vector<Rng> rngs;
    for (std::size_t i = 0; i < n; ++i) {
      steps[i] = 1 + static_cast<int>((start + i) % schedule_.steps());
      rngs.emplace_back(mix_seed(cfg_.dataset.seed, val_.ids[start + i]), kValLossStream);
    }
    const double loss = training_loss_batch(std::span(val_.hr).subspan(start, n),
                                            std::span(val_.y0).subspan(start, n), steps, net_,
                                            schedule_, rngs, cfg_.train.weighted_loss, false);
    acc += loss * static_cast<double>(n);
  }
  return acc / static_cast<double>(total);
}

double Trainer::validation_psnr(int count) {
  const auto n = static_cast<std::size_t>(std::min<int>(count, static_cast<int>(val_.hr.size())));
  if (n == 0) return 0.0;
  const auto sr = sample_images(net_, schedule_, std::span(val_.y0).first(n),
                                std::span(val_.ids).first(n), cfg_.dataset.seed);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += psnr(sr[i], val_.hr[i]);
  return acc / static_cast<double>(n);
}

Checkpoint Trainer::checkpoint() const {
  return make_checkpoint(net_, cfg_.schedule, step_, cfg_.train.seed, &adam_);
}

void Trainer::resume(const Checkpoint& ckpt) {
  require_matching_schedule(ckpt, cfg_.schedule);
  if (ckpt.seed != cfg_.train.seed) {
    throw ConfigConflict("checkpoint was trained with seed " + std::to_string(ckpt.seed) +
                         ", run uses seed " + std::to_string(cfg_.train.seed));
  }
  restore(ckpt, net_, &adam_);
  // The configured learning rate wins so a resumed run can change it.
  adam_.lr = cfg_.train.lr;
  step_ = ckpt.train_step;
}

TrainSummary run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                          const std::optional<std::filesystem::path>& resume,
                          std::ostream& progress) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  Trainer trainer(cfg);
  const auto log_path = out_dir / "train_log.csv";
  std::ofstream log;
  if (resume) {
    trainer.resume(load_checkpoint(*resume));
    log.open(log_path, std::ios::binary | std::ios::app);
  } else {
    log.open(log_path, std::ios::binary | std::ios::trunc);
    log << "step,loss,val_psnr,val_loss\n";
  }
  if (!log) throw UsageError("cannot open '" + log_path.string() + "' for writing");

  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t start = trainer.step_count();
  const std::uint64_t end = cfg.train.iterations;
  if (start > end) {
    throw ConfigConflict("checkpoint is at step " + std::to_string(start) +
                         ", beyond train.iterations = " + std::to_string(end));
  }
  TrainSummary summary;
  bool first_row = true;
  struct Eval {
    double val_loss, val_psnr;
  };
  // Every row describes the parameters after k updates: the loss of batch k
  // is evaluated before its own update.
  auto evaluate = [&] {
    return Eval{trainer.validation_loss(), trainer.validation_psnr(cfg.train.val_psnr_images)};
  };
  auto log_row = [&](std::uint64_t k, double loss, const Eval& e) {
    log << k << ',' << fmt(loss) << ',' << fmt(e.val_psnr) << ',' << fmt(e.val_loss) << '\n';
    log.flush();
    if (first_row) summary.first_val_loss = e.val_loss;
    first_row = false;
    summary.last_val_loss = e.val_loss;
    summary.last_val_psnr = e.val_psnr;
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    progress << "# step " << k << " loss " << fmt(loss) << " val_loss " << fmt(e.val_loss)
             << " val_psnr " << fmt(e.val_psnr) << " elapsed " << fmt(elapsed) << "s" << std::endl;
  };

  for (std::uint64_t k = start; k < end; ++k) {
    // A resumed run's starting row was written by the run that saved it.
    const bool log_now = k % cfg.train.log_every == 0 && !(resume && k == start);
    std::optional<Eval> e;
    if (log_now) e = evaluate();
    const double loss = trainer.step(true);
    if (e) log_row(k, loss, *e);
    const std::uint64_t done = k + 1;
    if (cfg.train.checkpoint_every > 0 && done % cfg.train.checkpoint_every == 0) {
      save_checkpoint(trainer.checkpoint(), out_dir / ("ckpt_" + std::to_string(done) + ".rskt"));
    }
  }
  if (!(resume && start == end)) {
    const Eval e = evaluate();
    log_row(end, trainer.step(false), e);
  }
  summary.steps = trainer.step_count();
  summary.checkpoint = out_dir / "model.rskt";
  save_checkpoint(trainer.checkpoint(), summary.checkpoint);
  return summary;
}

}  // namespace resshift
