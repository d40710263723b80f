#include "resshift/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "resshift/config.hpp"
#include "resshift/data.hpp"
#include "resshift/degrade.hpp"
#include "resshift/diffusion.hpp"
#include "resshift/error.hpp"
#include "resshift/imageio.hpp"
#include "resshift/metrics.hpp"
#include "resshift/nn/gradcheck.hpp"
#include "resshift/nn/ops.hpp"
#include "resshift/schedule.hpp"
#include "resshift/train.hpp"

namespace resshift {

namespace fs = std::filesystem;

namespace {

/// Thrown by a command to exit with a specific code after printing `what`.
class CheckFailed : public Error {
 public:
  using Error::Error;
};

// Flags shared by every command that builds a RunConfig. Values are applied on
// top of the config file only when given on the command line.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> sets;
  int steps = 0;
  double power = 0.0;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* power_opt = nullptr;
  CLI::Option* kappa_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "Config file of `section.key = value` lines");
    app.add_option("--set", sets, "Override one config entry, e.g. --set train.lr=1e-4");
    steps_opt = app.add_option("--T", steps, "Number of diffusion steps");
    power_opt = app.add_option("--p", power, "Schedule growth exponent");
    kappa_opt = app.add_option("--kappa", kappa, "Noise magnitude");
    seed_opt = app.add_option("--seed", seed, "Seed (default: RESSHIFT_SEED or 0)");
  }

  bool schedule_given() const {
    return steps_opt->count() > 0 || power_opt->count() > 0 || kappa_opt->count() > 0;
  }

  RunConfig build() const {
    RunConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (steps_opt->count()) cfg.schedule.steps = steps;
    if (power_opt->count()) cfg.schedule.power = power;
    if (kappa_opt->count()) cfg.schedule.kappa = kappa;
    if (seed_opt->count()) cfg.train.seed = seed;
    cfg.resolve();
    return cfg;
  }
};

NoiseSchedule schedule_or_usage(const ScheduleParams& p) {
  try {
    return build_schedule(p);
  } catch (const InvalidParameter& e) {
    throw UsageError(e.what());
  }
}

std::string format_value(const std::string& text) {
  // File-name friendly rendering of a sweep value.
  std::string s = text;
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

// ------------------------------------------------------------------ schedule

struct ScheduleCmd {
  ConfigFlags flags;
  std::string out_path;
  std::string sweep;
  std::string out_dir = ".";

  void add_to(CLI::App& app) {
    flags.add_to(app);
    app.add_option("--out", out_path, "CSV output file (default: stdout)");
    app.add_option("--sweep", sweep, "Sweep one parameter, e.g. p=0.3,0.5,1,2,3");
    app.add_option("--out-dir", out_dir, "Directory for sweep outputs");
  }

  int run(std::ostream& out) {
    const RunConfig cfg = flags.build();
    if (sweep.empty()) {
      const NoiseSchedule s = schedule_or_usage(cfg.schedule);
      if (out_path.empty()) {
        write_schedule_csv(out, s);
      } else {
        std::ostringstream ss;
        write_schedule_csv(ss, s);
        write_file(out_path, ss.str());
      }
      return kExitOk;
    }
    const auto eq = sweep.find('=');
    if (eq == std::string::npos) throw UsageError("--sweep expects name=v1,v2,...");
    const std::string name = sweep.substr(0, eq);
    if (name != "p" && name != "kappa" && name != "T") {
      throw UsageError("--sweep supports p, kappa or T, got '" + name + "'");
    }
    std::vector<std::string> values;
    std::stringstream ss(sweep.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(item);
    if (values.empty()) throw UsageError("--sweep has no values");
    fs::create_directories(out_dir);
    for (const auto& v : values) {
      RunConfig c = cfg;
      c.set(name == "T" ? "schedule.T" : "schedule." + name, v);
      const NoiseSchedule s = schedule_or_usage(c.schedule);
      std::ostringstream csv;
      write_schedule_csv(csv, s);
      const fs::path path = fs::path(out_dir) / ("schedule_" + name + format_value(v) + ".csv");
      write_file(path, csv.str());
      out << path.string() << '\n';
    }
    return kExitOk;
  }
};

// ------------------------------------------------------------------ diffuse

struct DiffuseCmd {
  ConfigFlags flags;
  std::string hr_path;
  std::string lr_path;
  int toy_index = -1;
  std::vector<int> timesteps{1, 3, 5, 7, 9, 12, 15};
  std::string out_dir;

  void add_to(CLI::App& app) {
    flags.add_to(app);
    app.add_option("--hr", hr_path, "HR image (PGM/PPM)");
    app.add_option("--lr", lr_path, "LR image; degraded from --hr when omitted");
    app.add_option("--toy-index", toy_index, "Use procedural dataset image N instead of files");
    app.add_option("--timesteps", timesteps, "Timesteps to write")->delimiter(',');
    app.add_option("--out-dir", out_dir, "Output directory")->required();
  }

  int run(std::ostream& out) {
    RunConfig cfg = flags.build();
    const NoiseSchedule schedule = schedule_or_usage(cfg.schedule);
    for (int t : timesteps) {
      if (t < 1 || t > schedule.steps()) {
        throw UsageError("timestep " + std::to_string(t) + " outside 1.." +
                         std::to_string(schedule.steps()));
      }
    }
    const std::uint64_t seed = cfg.train.seed;
    Image hr;
    Image y0;
    if (toy_index >= 0) {
      if (!hr_path.empty() || !lr_path.empty()) {
        throw UsageError("--toy-index cannot be combined with --hr/--lr");
      }
      hr = generate_image(cfg.dataset, static_cast<std::size_t>(toy_index)).image;
    } else if (!hr_path.empty()) {
      hr = read_image(hr_path);
    } else {
      throw UsageError("diffuse needs --hr or --toy-index");
    }
    if (!lr_path.empty()) {
      y0 = upsample_nearest(read_image(lr_path), cfg.degradation.scale_factor);
      require_same_shape(hr, y0, "diffuse (LR x scale vs HR)");
    } else {
      Rng rng(mix_seed(seed, 0xd1ff), 0);
      y0 = degrade(hr, cfg.degradation, rng).y0;
    }
    // One noise field for every t, so frames differ only through eta_t.
    Rng rng(mix_seed(seed, 0xd1ff), 1);
    const Image xi = standard_normal(hr.shape(), rng);
    fs::create_directories(out_dir);
    const std::string ext = netpbm_extension(hr.channels());
    write_image(hr, fs::path(out_dir) / ("hr" + ext));
    write_image(y0, fs::path(out_dir) / ("y0" + ext));
    for (int t : timesteps) {
      const Image xt = sample_marginal(hr, y0, t, schedule, xi);
      char name[32];
      std::snprintf(name, sizeof name, "x_%02d", t);
      const fs::path path = fs::path(out_dir) / (name + ext);
      write_image(xt.clamped(), path);
      out << path.string() << '\n';
    }
    return kExitOk;
  }
};

// ------------------------------------------------------------------ train

struct TrainCmd {
  ConfigFlags flags;
  std::string out_dir;
  std::string resume;
  std::uint64_t iterations = 0;
  int batch_size = 0;
  double lr = 0.0;
  bool weighted = false;
  std::uint64_t checkpoint_every = 0;
  std::uint64_t log_every = 0;
  int width = 0;
  int depth = 0;
  CLI::Option *iterations_opt, *batch_opt, *lr_opt, *ckpt_opt, *log_opt, *width_opt, *depth_opt;

  void add_to(CLI::App& app) {
    flags.add_to(app);
    app.add_option("--out-dir", out_dir, "Run directory")->required();
    app.add_option("--resume", resume, "Checkpoint to continue from");
    iterations_opt = app.add_option("--iterations", iterations, "Total optimization steps");
    batch_opt = app.add_option("--batch-size", batch_size, "Mini-batch size");
    lr_opt = app.add_option("--lr", lr, "Adam learning rate");
    app.add_flag("--weighted-loss", weighted, "Scale each example's loss by w_t");
    ckpt_opt = app.add_option("--checkpoint-every", checkpoint_every, "Checkpoint period (0: off)");
    log_opt = app.add_option("--log-every", log_every, "Log period");
    width_opt = app.add_option("--width", width, "Denoiser base width");
    depth_opt = app.add_option("--depth", depth, "Denoiser levels");
  }

  int run(std::ostream& out, std::ostream& err) {
    RunConfig cfg = flags.build();
    if (iterations_opt->count()) cfg.train.iterations = iterations;
    if (batch_opt->count()) cfg.train.batch_size = batch_size;
    if (lr_opt->count()) cfg.train.lr = lr;
    if (weighted) cfg.train.weighted_loss = true;
    if (ckpt_opt->count()) cfg.train.checkpoint_every = checkpoint_every;
    if (log_opt->count()) cfg.train.log_every = log_every;
    if (width_opt->count()) cfg.denoiser.base_width = width;
    if (depth_opt->count()) cfg.denoiser.depth = depth;
    cfg.resolve();
    cfg.validate();
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "config.txt", cfg.to_text());
    std::optional<fs::path> from;
    if (!resume.empty()) from = resume;
    const TrainSummary s = run_training(cfg, out_dir, from, err);
    out << "steps=" << s.steps << '\n'
        << "val_loss=" << s.last_val_loss << '\n'
        << "val_psnr=" << s.last_val_psnr << '\n'
        << "checkpoint=" << s.checkpoint.string() << '\n';
    return kExitOk;
  }
};

// ------------------------------------------------------------------ sample

struct LoadedModel {
  Checkpoint ckpt;
  nn::Denoiser net;
  NoiseSchedule schedule;
};

LoadedModel load_model(const std::string& path, const ConfigFlags& flags, const RunConfig& cfg,
                       std::optional<int> steps_override) {
  Checkpoint ckpt = load_checkpoint(path);
  if (flags.schedule_given()) require_matching_schedule(ckpt, cfg.schedule);
  if (steps_override && *steps_override != ckpt.schedule.steps) {
    throw ConfigConflict("--steps " + std::to_string(*steps_override) +
                         " does not match the checkpoint's T=" +
                         std::to_string(ckpt.schedule.steps) + "; re-timestepping is unsupported");
  }
  nn::Denoiser net(ckpt.denoiser, 0);
  restore(ckpt, net, nullptr);
  NoiseSchedule schedule = build_schedule(ckpt.schedule);
  net.set_conditioning(input_conditioning(schedule));
  return {std::move(ckpt), std::move(net), std::move(schedule)};
}

struct SampleCmd {
  ConfigFlags flags;
  std::string checkpoint;
  std::string lr_path;
  int toy_index = -1;
  std::string out_path;
  std::string trajectory_dir;
  int steps = 0;
  CLI::Option* steps_opt = nullptr;

  void add_to(CLI::App& app) {
    flags.add_to(app);
    app.add_option("--checkpoint", checkpoint, "Trained model")->required();
    app.add_option("--lr", lr_path, "LR image to super-resolve");
    app.add_option("--toy-index", toy_index, "Use the degraded procedural image N");
    app.add_option("--out", out_path, "SR output image")->required();
    app.add_option("--trajectory", trajectory_dir, "Also write every intermediate x_t here");
    steps_opt = app.add_option("--steps", steps, "Sampling steps; must equal the checkpoint's T");
  }

  int run(std::ostream& out) {
    const RunConfig cfg = flags.build();
    std::optional<int> override_steps;
    if (steps_opt->count()) override_steps = steps;
    LoadedModel m = load_model(checkpoint, flags, cfg, override_steps);
    Image lr;
    std::size_t id = 0;
    if (toy_index >= 0) {
      if (!lr_path.empty()) throw UsageError("--toy-index cannot be combined with --lr");
      id = static_cast<std::size_t>(toy_index);
      const Image hr = generate_image(cfg.dataset, id).image;
      lr = degrade_example(hr, cfg.degradation, cfg.dataset.seed, id, kValidationEpoch).lr;
    } else if (!lr_path.empty()) {
      lr = read_image(lr_path);
    } else {
      throw UsageError("sample needs --lr or --toy-index");
    }
    const Image y0 = upsample_nearest(lr, cfg.degradation.scale_factor);
    if (y0.channels() != m.ckpt.denoiser.image_channels()) {
      throw ConfigConflict("image has " + std::to_string(y0.channels()) +
                           " channels, model expects " +
                           std::to_string(m.ckpt.denoiser.image_channels()));
    }
    m.ckpt.denoiser.check_spatial(y0.height(), y0.width());

    SampleOptions opts;
    const std::string ext = netpbm_extension(y0.channels());
    if (!trajectory_dir.empty()) {
      fs::create_directories(trajectory_dir);
      opts.observer = [&](std::size_t, int t, const Image& x) {
        char name[32];
        std::snprintf(name, sizeof name, "x_%02d", t);
        write_image(x.clamped(), fs::path(trajectory_dir) / (name + ext));
      };
    }
    const std::uint64_t before = m.net.evaluation_count();
    Rng rng = sample_rng(cfg.train.seed, id);
    const Image sr = sample(y0, predictor_for(m.net), m.schedule, rng, opts);
    const std::uint64_t evaluations = m.net.evaluation_count() - before;
    write_image(sr, out_path);
    out << "denoiser_evaluations=" << evaluations << '\n';
    return kExitOk;
  }
};

// ------------------------------------------------------------------ eval

struct PairFiles {
  std::map<std::string, fs::path> sr, hr, lr;
};

PairFiles scan_pairs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("'" + dir.string() + "' is not a directory");
  PairFiles p;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext != ".pgm" && ext != ".ppm") continue;
    const std::string stem = entry.path().stem().string();
    const auto us = stem.rfind('_');
    if (us == std::string::npos) continue;
    const std::string key = stem.substr(0, us);
    const std::string role = stem.substr(us + 1);
    if (role == "sr") p.sr[key] = entry.path();
    if (role == "hr") p.hr[key] = entry.path();
    if (role == "lr") p.lr[key] = entry.path();
  }
  return p;
}

struct EvalCmd {
  ConfigFlags flags;
  std::string dir;
  std::string checkpoint;
  std::string baseline;
  std::string out_path;
  std::string baseline_out;
  std::string save_dir;

  void add_to(CLI::App& app) {
    flags.add_to(app);
    app.add_option("--dir", dir, "Directory of {key}_sr / {key}_hr (/ {key}_lr) images");
    app.add_option("--checkpoint", checkpoint, "Sample the validation split with this model");
    app.add_option("--baseline", baseline, "Also report a baseline (nearest)");
    app.add_option("--out", out_path, "Report CSV (default: stdout)");
    app.add_option("--baseline-out", baseline_out, "Baseline CSV (default: <out>_nearest.csv)");
    app.add_option("--save-dir", save_dir, "With --checkpoint: write sr/hr/lr images here");
  }

  int run(std::ostream& out) {
    const RunConfig cfg = flags.build();
    if (!baseline.empty() && baseline != "nearest") {
      throw UsageError("unknown baseline '" + baseline + "' (supported: nearest)");
    }
    if (dir.empty() == checkpoint.empty()) throw UsageError("eval needs exactly one of --dir, --checkpoint");
    std::vector<ReportRow> rows, base_rows;
    if (!dir.empty()) {
      evaluate_dir(cfg, rows, base_rows);
    } else {
      evaluate_checkpoint(cfg, rows, base_rows);
    }

    std::ostringstream report;
    write_report_csv(report, rows);
    if (out_path.empty()) {
      out << report.str();
    } else {
      write_file(out_path, report.str());
    }
    const MetricReport mean = mean_report(rows);
    char line[160];
    std::snprintf(line, sizeof line, "sr mean_psnr=%.6f mean_ssim=%.6f mean_mse=%.6g\n",
                  mean.psnr_db, mean.ssim, mean.mse);
    if (!out_path.empty()) out << line;
    if (!baseline.empty()) {
      std::ostringstream b;
      write_report_csv(b, base_rows);
      std::string path = baseline_out;
      if (path.empty() && !out_path.empty()) {
        const fs::path p(out_path);
        path = (p.parent_path() / (p.stem().string() + "_nearest" + p.extension().string())).string();
      }
      if (path.empty()) {
        out << b.str();
      } else {
        write_file(path, b.str());
      }
      const MetricReport bm = mean_report(base_rows);
      std::snprintf(line, sizeof line, "nearest mean_psnr=%.6f mean_ssim=%.6f mean_mse=%.6g\n",
                    bm.psnr_db, bm.ssim, bm.mse);
      if (!out_path.empty()) out << line;
    }
    return kExitOk;
  }

  void evaluate_dir(const RunConfig& cfg, std::vector<ReportRow>& rows,
                    std::vector<ReportRow>& base_rows) {
    const PairFiles p = scan_pairs(dir);
    std::set<std::string> keys;
    for (const auto& [k, v] : p.sr) keys.insert(k);
    for (const auto& [k, v] : p.hr) keys.insert(k);
    std::vector<std::string> orphans;
    for (const auto& k : keys) {
      const bool has_sr = p.sr.count(k) > 0;
      const bool has_hr = p.hr.count(k) > 0;
      if (has_sr != has_hr) orphans.push_back((has_sr ? p.sr : p.hr).at(k).filename().string());
      if (has_sr && has_hr && !baseline.empty() && p.lr.count(k) == 0) {
        orphans.push_back(k + "_lr (needed for the baseline)");
      }
    }
    if (!orphans.empty()) {
      std::string list;
      for (const auto& o : orphans) list += "\n  " + o;
      throw UsageError("unpaired files in '" + dir + "':" + list);
    }
    if (keys.empty()) throw UsageError("no {key}_sr/{key}_hr pairs found in '" + dir + "'");
    for (const auto& k : keys) {
      const Image hr = read_image(p.hr.at(k));
      const Image sr = read_image(p.sr.at(k));
      rows.push_back({k, evaluate_pair(sr, hr)});
      if (!baseline.empty()) {
        const Image up = upsample_nearest(read_image(p.lr.at(k)), cfg.degradation.scale_factor);
        base_rows.push_back({k, evaluate_pair(up, hr)});
      }
    }
  }

  void evaluate_checkpoint(const RunConfig& cfg, std::vector<ReportRow>& rows,
                           std::vector<ReportRow>& base_rows) {
    LoadedModel m = load_model(checkpoint, flags, cfg, std::nullopt);
    if (m.ckpt.denoiser.image_channels() != cfg.dataset.channels) {
      throw ConfigConflict("model expects " + std::to_string(m.ckpt.denoiser.image_channels()) +
                           "-channel images, dataset has " + std::to_string(cfg.dataset.channels));
    }
    const ToyDataset data = make_dataset(cfg.dataset);
    const ValidationSet val = make_validation(data, cfg.degradation);
    const auto sr = sample_images(m.net, m.schedule, val.y0, val.ids, cfg.train.seed);
    if (!save_dir.empty()) fs::create_directories(save_dir);
    const std::string ext = netpbm_extension(cfg.dataset.channels);
    for (std::size_t i = 0; i < sr.size(); ++i) {
      const std::string key = std::to_string(val.ids[i]);
      rows.push_back({key, evaluate_pair(sr[i], val.hr[i])});
      if (!baseline.empty()) base_rows.push_back({key, evaluate_pair(val.y0[i], val.hr[i])});
      if (!save_dir.empty()) {
        write_image(sr[i], fs::path(save_dir) / (key + "_sr" + ext));
        write_image(val.hr[i], fs::path(save_dir) / (key + "_hr" + ext));
        write_image(val.lr[i], fs::path(save_dir) / (key + "_lr" + ext));
      }
    }
  }
};

// ------------------------------------------------------------------ gradcheck

struct GradcheckCmd {
  int width = 8;
  int depth = 1;
  int channels = 1;
  int size = 8;
  int batch = 2;
  int time_dim = 16;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
  bool corrupt = false;

  void add_to(CLI::App& app) {
    app.add_option("--width", width, "Base width");
    app.add_option("--depth", depth, "Levels");
    app.add_option("--channels", channels, "Image channels (the network sees twice as many)");
    app.add_option("--size", size, "Input height and width");
    app.add_option("--batch", batch, "Batch size");
    app.add_option("--time-dim", time_dim, "Time embedding size");
    app.add_option("--fd-step", step, "Finite-difference step");
    app.add_option("--tolerance", tolerance, "Maximum relative error");
    app.add_option("--seed", seed, "Seed");
    // Negative control for tests: perturbs the conv weight gradient.
    app.add_flag("--corrupt-backward", corrupt)->group("");
  }

  int run(std::ostream& out) {
    nn::DenoiserConfig cfg;
    cfg.base_width = width;
    cfg.depth = depth;
    cfg.in_channels = 2 * channels;
    cfg.time_embed_dim = time_dim;
    try {
      cfg.validate();
      cfg.check_spatial(size, size);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    nn::GradCheckOptions opts;
    opts.batch = batch;
    opts.height = size;
    opts.width = size;
    opts.step = step;
    opts.seed = seed;
    nn::testing::set_corrupt_conv_backward(corrupt);
    nn::GradCheckReport report;
    try {
      report = nn::check_denoiser_gradients(cfg, opts);
    } catch (...) {
      nn::testing::set_corrupt_conv_backward(false);
      throw;
    }
    nn::testing::set_corrupt_conv_backward(false);
    out << "group,entries,rel_error\n";
    char buf[64];
    for (const auto& g : report.groups) {
      std::snprintf(buf, sizeof buf, "%.3e", g.rel_error);
      out << g.name << ',' << g.entries << ',' << buf << '\n';
    }
    const auto& worst = report.worst();
    std::snprintf(buf, sizeof buf, "%.3e", worst.rel_error);
    if (!report.passed(tolerance)) {
      throw CheckFailed("gradient check failed: worst group " + worst.name + " rel_error " + buf);
    }
    out << "ok: worst group " << worst.name << " rel_error " << buf << '\n';
    return kExitOk;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Residual-shifting diffusion super-resolution toolkit", "resshift"};
  app.require_subcommand(1);

  ScheduleCmd schedule_cmd;
  DiffuseCmd diffuse_cmd;
  TrainCmd train_cmd;
  SampleCmd sample_cmd;
  EvalCmd eval_cmd;
  GradcheckCmd gradcheck_cmd;
  auto* schedule_app = app.add_subcommand("schedule", "Print the shifting schedule as CSV");
  auto* diffuse_app = app.add_subcommand("diffuse", "Write forward-process states x_t");
  auto* train_app = app.add_subcommand("train", "Train the denoiser on procedural data");
  auto* sample_app = app.add_subcommand("sample", "Super-resolve one image");
  auto* eval_app = app.add_subcommand("eval", "Compute PSNR/SSIM/MSE reports");
  auto* gradcheck_app = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  schedule_cmd.add_to(*schedule_app);
  diffuse_cmd.add_to(*diffuse_app);
  train_cmd.add_to(*train_app);
  sample_cmd.add_to(*sample_app);
  eval_cmd.add_to(*eval_app);
  gradcheck_cmd.add_to(*gradcheck_app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*schedule_app) return schedule_cmd.run(out);
    if (*diffuse_app) return diffuse_cmd.run(out);
    if (*train_app) return train_cmd.run(out, err);
    if (*sample_app) return sample_cmd.run(out);
    if (*eval_app) return eval_cmd.run(out);
    if (*gradcheck_app) return gradcheck_cmd.run(out);
  } catch (const CheckFailed& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const TrainingDivergence& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace resshift
