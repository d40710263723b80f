#include "resshift/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "resshift/error.hpp"
#include "resshift/imageio.hpp"

namespace resshift {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw UsageError("invalid value '" + text + "' for " + key);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw UsageError("invalid boolean '" + text + "' for " + key + " (use true or false)");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Member>
Field number_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_number<T>(k, v);
          },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(member(const_cast<RunConfig&>(c)));
            } else {
              return std::to_string(member(const_cast<RunConfig&>(c)));
            }
          }};
}

#define RS_NUM(T, expr) number_field<T>([](RunConfig& c) -> T& { return c.expr; })

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"schedule.T", RS_NUM(int, schedule.steps)},
      {"schedule.p", RS_NUM(double, schedule.power)},
      {"schedule.kappa", RS_NUM(double, schedule.kappa)},
      {"denoiser.base_width", RS_NUM(int, denoiser.base_width)},
      {"denoiser.depth", RS_NUM(int, denoiser.depth)},
      {"denoiser.time_embed_dim", RS_NUM(int, denoiser.time_embed_dim)},
      {"degradation.kernel_size", RS_NUM(int, degradation.kernel_size)},
      {"degradation.iso_prob", RS_NUM(double, degradation.iso_prob)},
      {"degradation.width_min", RS_NUM(double, degradation.width_min)},
      {"degradation.width_max", RS_NUM(double, degradation.width_max)},
      {"degradation.down_modes",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          std::vector<DownMode> modes;
          for (const auto& name : split_list(v)) {
            try {
              modes.push_back(parse_down_mode(name));
            } catch (const InvalidParameter& e) {
              throw UsageError(k + ": " + e.what());
            }
          }
          c.degradation.down_modes = modes;
        },
        [](const RunConfig& c) {
          std::string s;
          for (auto m : c.degradation.down_modes) s += (s.empty() ? "" : ",") + std::string(to_string(m));
          return s;
        }}},
      {"degradation.gaussian_prob", RS_NUM(double, degradation.gaussian_prob)},
      {"degradation.gaussian_level_min", RS_NUM(double, degradation.gaussian_level_min)},
      {"degradation.gaussian_level_max", RS_NUM(double, degradation.gaussian_level_max)},
      {"degradation.poisson_scale_min", RS_NUM(double, degradation.poisson_scale_min)},
      {"degradation.poisson_scale_max", RS_NUM(double, degradation.poisson_scale_max)},
      {"degradation.scale_factor", RS_NUM(int, degradation.scale_factor)},
      {"dataset.count", RS_NUM(int, dataset.count)},
      {"dataset.val_count", RS_NUM(int, dataset.val_count)},
      {"dataset.height", RS_NUM(int, dataset.height)},
      {"dataset.width", RS_NUM(int, dataset.width)},
      {"dataset.channels", RS_NUM(int, dataset.channels)},
      {"dataset.pattern_mix",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          const auto items = split_list(v);
          if (items.size() != kPatternCount) {
            throw UsageError(k + " needs 4 comma-separated weights (gradient,checker,blob,stripes)");
          }
          for (std::size_t i = 0; i < kPatternCount; ++i) {
            c.dataset.pattern_mix[i] = parse_number<double>(k, items[i]);
          }
        },
        [](const RunConfig& c) {
          std::string s;
          for (double w : c.dataset.pattern_mix) s += (s.empty() ? "" : ",") + fmt(w);
          return s;
        }}},
      {"dataset.seed", RS_NUM(std::uint64_t, dataset.seed)},
      {"train.iterations", RS_NUM(std::uint64_t, train.iterations)},
      {"train.batch_size", RS_NUM(int, train.batch_size)},
      {"train.lr", RS_NUM(double, train.lr)},
      {"train.weighted_loss",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.weighted_loss = parse_bool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.train.weighted_loss ? "true" : "false"); }}},
      {"train.checkpoint_every", RS_NUM(std::uint64_t, train.checkpoint_every)},
      {"train.log_every", RS_NUM(std::uint64_t, train.log_every)},
      {"train.seed", RS_NUM(std::uint64_t, train.seed)},
      {"train.val_psnr_images", RS_NUM(int, train.val_psnr_images)},
  };
  return table;
}

#undef RS_NUM

}  // namespace

RunConfig::RunConfig() {
  // Toy-scale network; see README for the width choice.
  denoiser.base_width = 8;
  train.seed = default_seed();
  resolve();
}

void RunConfig::resolve() {
  denoiser.in_channels = 2 * dataset.channels;
  denoiser.steps = schedule.steps;
}

void RunConfig::validate() const {
  auto wrap = [](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const UsageError&) {
      throw;
    } catch (const Error& e) {
      throw UsageError(std::string(section) + ": " + e.what());
    }
  };
  wrap("schedule", [&] { schedule.validate(); });
  wrap("denoiser", [&] { denoiser.validate(); });
  wrap("degradation", [&] { degradation.validate(); });
  wrap("dataset", [&] { dataset.validate(1 << denoiser.depth); });
  wrap("dataset", [&] { dataset.validate(degradation.scale_factor); });
  if (denoiser.steps != schedule.steps) {
    throw UsageError("denoiser T (" + std::to_string(denoiser.steps) + ") differs from schedule T (" +
                     std::to_string(schedule.steps) + ")");
  }
  if (denoiser.in_channels != 2 * dataset.channels) {
    throw UsageError("denoiser in_channels must be twice the dataset channels");
  }
  if (train.batch_size <= 0) throw UsageError("train.batch_size must be positive");
  const int train_count = dataset.count - dataset.val_count;
  if (train.batch_size > train_count) {
    throw UsageError("train.batch_size exceeds the training split (" + std::to_string(train_count) +
                     " images)");
  }
  if (!(train.lr > 0.0)) throw UsageError("train.lr must be positive");
  if (train.log_every == 0) throw UsageError("train.log_every must be positive");
  if (train.val_psnr_images < 0 || train.val_psnr_images > dataset.val_count) {
    throw UsageError("train.val_psnr_images must be in [0, dataset.val_count]");
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw UsageError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
  resolve();
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

std::uint64_t default_seed(std::uint64_t fallback) {
  const char* env = std::getenv("RESSHIFT_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  std::uint64_t v = 0;
  const char* end = env + std::char_traits<char>::length(env);
  auto [p, ec] = std::from_chars(env, end, v);
  if (ec != std::errc() || p != end) {
    throw UsageError(std::string("RESSHIFT_SEED is not an unsigned integer: '") + env + "'");
  }
  return v;
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected 'section.key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  apply_config_text(cfg, read_file(path));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : fields()) keys.push_back(key);
  return keys;
}

}  // namespace resshift
