#include "resshift/imageio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "resshift/error.hpp"

namespace resshift {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw UsageError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------- netpbm

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

Image decode_image(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("netpbm: expected magic P5 or P6", 0);
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  if (pos >= bytes.size() || !(is_space(bytes[pos]) || bytes[pos] == '#')) {
    throw ParseError("netpbm: expected whitespace after magic", pos);
  }
  auto skip = [&]() {
    while (pos < bytes.size()) {
      if (is_space(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) {
    skip();
    const std::size_t start = pos;
    long long v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) throw ParseError(std::string("netpbm: ") + what + " too large", start);
      ++pos;
    }
    if (pos == start) throw ParseError(std::string("netpbm: expected ") + what, pos);
    return static_cast<int>(v);
  };

  const int width = number("width");
  const int height = number("height");
  const std::size_t maxval_at = pos;
  const int maxval = number("maxval");
  if (width <= 0 || height <= 0) throw ParseError("netpbm: zero image dimension", maxval_at);
  if (maxval != 255) {
    throw ParseError("netpbm: unsupported maxval " + std::to_string(maxval), maxval_at);
  }
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    throw ParseError("netpbm: expected whitespace after maxval", pos);
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < need) {
    throw ParseError("netpbm: truncated raster, expected " + std::to_string(need) + " bytes",
                     bytes.size());
  }
  Image img({channels, height, width});
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const auto v = static_cast<unsigned char>(bytes[pos++]);
        img.at(c, y, x) = v / 255.0;
      }
    }
  }
  return img;
}

Image read_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

std::string encode_image(const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ShapeError("write_image: only 1 or 3 channels can be stored, got " + img.shape().str());
  }
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!(img[i] >= 0.0 && img[i] <= 1.0)) {
      throw RangeError("write_image: value " + std::to_string(img[i]) + " at element " +
                       std::to_string(i) + " outside [0,1]");
    }
  }
  std::string out = (img.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.push_back(static_cast<char>(static_cast<unsigned char>(
            std::floor(img.at(c, y, x) * 255.0 + 0.5))));
      }
    }
  }
  return out;
}

void write_image(const Image& img, const std::filesystem::path& path) {
  write_file(path, encode_image(img));
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[4] = {'R', 'S', 'K', 'T'};
constexpr const char* kAdamFirst = "adam.m/";
constexpr const char* kAdamSecond = "adam.v/";

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

  void need(std::size_t n, const std::string& what) {
    if (b_.size() - pos_ < n) {
      throw CorruptCheckpoint("checkpoint: truncated while reading " + what + " at byte " +
                              std::to_string(pos_));
    }
  }
  std::uint8_t u8(const std::string& what) {
    need(1, what);
    return static_cast<std::uint8_t>(b_[pos_++]);
  }
  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(b_[pos_++])} << (8 * i);
    return v;
  }
  std::uint64_t u64(const std::string& what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(b_[pos_++])} << (8 * i);
    return v;
  }
  double f64(const std::string& what) { return std::bit_cast<double>(u64(what)); }
  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& b_;
  std::size_t pos_ = 0;
};

int to_int(std::uint32_t v, const char* what) {
  if (v > 1u << 30) throw CorruptCheckpoint(std::string("checkpoint: implausible ") + what);
  return static_cast<int>(v);
}

void write_record(Writer& w, const std::string& name, const std::vector<int>& shape,
                  std::span<const double> data) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(shape.size()));
  for (int d : shape) w.u32(static_cast<std::uint32_t>(d));
  for (double v : data) w.f64(v);
}

}  // namespace

Checkpoint make_checkpoint(const nn::Denoiser& net, const ScheduleParams& schedule,
                           std::uint64_t train_step, std::uint64_t seed,
                           const nn::AdamState* adam) {
  Checkpoint c;
  c.denoiser = net.config();
  c.schedule = schedule;
  c.train_step = train_step;
  c.seed = seed;
  for (const auto& p : net.parameters()) {
    const auto d = p.value.data();
    c.tensors.push_back({p.name, p.value.shape(), std::vector<double>(d.begin(), d.end())});
  }
  if (adam != nullptr) {
    nn::AdamState s = *adam;
    s.first_moment.clear();
    s.second_moment.clear();
    c.adam = s;
    if (!adam->first_moment.empty()) {
      const auto& params = net.parameters();
      if (adam->first_moment.size() != params.size()) {
        throw ShapeError("make_checkpoint: optimizer state does not match the network");
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        c.tensors.push_back({kAdamFirst + params[i].name, params[i].value.shape(),
                             adam->first_moment[i]});
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        c.tensors.push_back({kAdamSecond + params[i].name, params[i].value.shape(),
                             adam->second_moment[i]});
      }
    }
  }
  return c;
}

namespace {

const NamedTensor& find_record(const Checkpoint& ckpt, const std::string& name,
                               const std::vector<int>& shape) {
  for (const auto& t : ckpt.tensors) {
    if (t.name == name) {
      if (t.shape != shape) {
        throw ConfigConflict("checkpoint record " + name + " has shape " +
                             nn::shape_str(t.shape) + ", network expects " +
                             nn::shape_str(shape));
      }
      return t;
    }
  }
  throw CorruptCheckpoint("checkpoint: missing record " + name);
}

}  // namespace

void restore(const Checkpoint& ckpt, nn::Denoiser& net, nn::AdamState* adam) {
  if (!(ckpt.denoiser == net.config())) {
    throw ConfigConflict("checkpoint denoiser config does not match the network");
  }
  auto& params = net.parameters();
  for (auto& p : params) {
    const NamedTensor& t = find_record(ckpt, p.name, p.value.shape());
    std::copy(t.data.begin(), t.data.end(), p.value.data().begin());
  }
  if (adam == nullptr) return;
  if (!ckpt.adam) {
    *adam = nn::AdamState{};
    return;
  }
  const bool has_moments = ckpt.adam->step_count > 0;
  *adam = *ckpt.adam;
  adam->first_moment.clear();
  adam->second_moment.clear();
  if (!has_moments) return;
  for (auto& p : params) {
    adam->first_moment.push_back(find_record(ckpt, kAdamFirst + p.name, p.value.shape()).data);
  }
  for (auto& p : params) {
    adam->second_moment.push_back(find_record(ckpt, kAdamSecond + p.name, p.value.shape()).data);
  }
}

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(c.format_version);
  w.u32(static_cast<std::uint32_t>(c.denoiser.in_channels));
  w.u32(static_cast<std::uint32_t>(c.denoiser.base_width));
  w.u32(static_cast<std::uint32_t>(c.denoiser.depth));
  w.u32(static_cast<std::uint32_t>(c.denoiser.time_embed_dim));
  w.u32(static_cast<std::uint32_t>(c.denoiser.steps));
  w.u32(static_cast<std::uint32_t>(c.schedule.steps));
  w.f64(c.schedule.power);
  w.f64(c.schedule.kappa);
  w.u64(c.train_step);
  w.u64(c.seed);
  w.u8(c.adam ? 1 : 0);
  if (c.adam) {
    w.u64(c.adam->step_count);
    w.f64(c.adam->lr);
    w.f64(c.adam->beta1);
    w.f64(c.adam->beta2);
    w.f64(c.adam->eps);
  }
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    if (nn::shape_numel(t.shape) != t.data.size()) {
      throw ShapeError("checkpoint record " + t.name + ": payload does not match shape");
    }
    write_record(w, t.name, t.shape, t.data);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.str(4, "magic") != std::string(kMagic, 4)) {
    throw CorruptCheckpoint("checkpoint: bad magic (expected RSKT)");
  }
  Checkpoint c;
  c.format_version = r.u32("version");
  if (c.format_version != Checkpoint::kVersion) {
    throw CorruptCheckpoint("checkpoint: unsupported version " + std::to_string(c.format_version));
  }
  c.denoiser.in_channels = to_int(r.u32("in_channels"), "in_channels");
  c.denoiser.base_width = to_int(r.u32("base_width"), "base_width");
  c.denoiser.depth = to_int(r.u32("depth"), "depth");
  c.denoiser.time_embed_dim = to_int(r.u32("time_embed_dim"), "time_embed_dim");
  c.denoiser.steps = to_int(r.u32("steps"), "steps");
  c.schedule.steps = to_int(r.u32("schedule T"), "schedule T");
  c.schedule.power = r.f64("schedule p");
  c.schedule.kappa = r.f64("schedule kappa");
  c.train_step = r.u64("train_step");
  c.seed = r.u64("seed");
  const std::uint8_t has_adam = r.u8("has_adam");
  if (has_adam > 1) throw CorruptCheckpoint("checkpoint: bad optimizer flag");
  if (has_adam == 1) {
    nn::AdamState s;
    s.step_count = r.u64("adam step_count");
    s.lr = r.f64("adam lr");
    s.beta1 = r.f64("adam beta1");
    s.beta2 = r.f64("adam beta2");
    s.eps = r.f64("adam eps");
    c.adam = s;
  }
  try {
    c.denoiser.validate();
    c.schedule.validate();
  } catch (const Error& e) {
    throw CorruptCheckpoint(std::string("checkpoint: invalid header: ") + e.what());
  }

  const std::uint32_t count = r.u32("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "record " + std::to_string(i);
    NamedTensor t;
    const std::uint32_t name_len = r.u32(where + " name length");
    if (name_len == 0 || name_len > 4096) {
      throw CorruptCheckpoint("checkpoint: " + where + " has invalid name length " +
                              std::to_string(name_len));
    }
    t.name = r.str(name_len, where + " name");
    const std::uint32_t rank = r.u32(t.name + " rank");
    if (rank == 0 || rank > 8) {
      throw CorruptCheckpoint("checkpoint: record " + t.name + " has invalid rank " +
                              std::to_string(rank));
    }
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32(t.name + " dims");
      if (dim == 0 || dim > (1u << 24)) {
        throw CorruptCheckpoint("checkpoint: record " + t.name + " has invalid dimension " +
                                std::to_string(dim));
      }
      t.shape.push_back(static_cast<int>(dim));
      total *= dim;
      if (total > (std::size_t{1} << 32)) {
        throw CorruptCheckpoint("checkpoint: record " + t.name + " is implausibly large");
      }
    }
    r.need(total * 8, t.name + " payload");
    t.data.resize(total);
    for (double& v : t.data) v = r.f64(t.name);
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) {
    throw CorruptCheckpoint("checkpoint: " + std::to_string(bytes.size() - r.pos()) +
                            " trailing bytes after the last record");
  }
  try {
    const NoiseSchedule s = build_schedule(c.schedule);
    if (s.eta(s.steps()) != kEtaFinal) throw InvalidParameter("final eta mismatch");
  } catch (const Error& e) {
    throw CorruptCheckpoint(std::string("checkpoint: schedule does not rebuild: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

void require_matching_schedule(const Checkpoint& ckpt, const ScheduleParams& expected) {
  if (ckpt.schedule.steps != expected.steps) {
    throw ConfigConflict("checkpoint was trained with T=" + std::to_string(ckpt.schedule.steps) +
                         " but T=" + std::to_string(expected.steps) + " was requested");
  }
  if (ckpt.schedule.power != expected.power || ckpt.schedule.kappa != expected.kappa) {
    throw ConfigConflict("checkpoint schedule (p, kappa) differs from the requested schedule");
  }
}

}  // namespace resshift
