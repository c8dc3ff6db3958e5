#pragma once
// Binary file formats. Tensor file: "BDTF" magic, u32 LE version, then one
// self-describing record per tensor (mode byte, rank byte, u64 LE dims, f64
// LE row-major values) until EOF. Checkpoint: "BDCK" magic, u32 LE version,
// u64 LE length-prefixed JSON descriptor, then the flat parameter array as
// f64 LE in declaration order. Exact round-trips; truncation, bad magic,
// and version mismatches are format errors.

#include <bit>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "denoiser.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "tensor.hpp"

namespace bdlab {

inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u8(std::ostream& os, std::uint8_t x) { put_bytes(os, &x, 1); }

inline void put_u32(std::ostream& os, std::uint32_t x) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  put_bytes(os, b, 8);
}

inline void put_f64(std::ostream& os, double x) { put_u64(os, std::bit_cast<std::uint64_t>(x)); }

inline void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw std::runtime_error(std::string("format error: truncated file reading ") + what);
}

inline std::uint8_t get_u8(std::istream& is, const char* what) {
  std::uint8_t x;
  get_bytes(is, &x, 1, what);
  return x;
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  get_bytes(is, b, 4, what);
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return x;
}

inline std::uint64_t get_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  get_bytes(is, b, 8, what);
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return x;
}

inline double get_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(get_u64(is, what));
}

inline void check_magic(std::istream& is, const char* magic, const char* what) {
  char b[4];
  get_bytes(is, b, 4, what);
  if (std::string(b, 4) != magic)
    throw std::runtime_error(std::string("format error: bad magic for ") + what);
}

}  // namespace detail

inline void save_tensors(const std::string& path, const std::vector<Tensor>& tensors) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_tensors: cannot open " + path);
  f.write("BDTF", 4);
  detail::put_u32(f, kTensorFormatVersion);
  for (const Tensor& t : tensors) {
    detail::put_u8(f, static_cast<std::uint8_t>(t.mode));
    detail::put_u8(f, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) detail::put_u64(f, static_cast<std::uint64_t>(d));
    for (double x : t.v) detail::put_f64(f, x);
  }
  if (!f) throw std::runtime_error("save_tensors: write failed for " + path);
}

inline std::vector<Tensor> load_tensors(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_tensors: cannot open " + path);
  detail::check_magic(f, "BDTF", "tensor file");
  const auto version = detail::get_u32(f, "tensor file version");
  if (version != kTensorFormatVersion)
    throw std::runtime_error("format error: unsupported tensor file version " +
                             std::to_string(version));
  std::vector<Tensor> out;
  while (f.peek() != std::char_traits<char>::eof()) {
    const auto mode = detail::get_u8(f, "tensor mode");
    if (mode > 1) throw std::runtime_error("format error: unknown tensor mode");
    const auto rank = detail::get_u8(f, "tensor rank");
    std::vector<std::int64_t> dims(rank);
    std::int64_t total = 1;
    for (auto& d : dims) {
      d = static_cast<std::int64_t>(detail::get_u64(f, "tensor dims"));
      if (d <= 0 || d > (1 << 24)) throw std::runtime_error("format error: corrupt tensor dims");
      total *= d;
      if (total > (1 << 28)) throw std::runtime_error("format error: corrupt tensor dims");
    }
    Tensor t(static_cast<TensorMode>(mode), dims);
    for (double& x : t.v) x = detail::get_f64(f, "tensor values");
    out.push_back(std::move(t));
  }
  return out;
}

struct ScheduleSpec {
  int T = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  NoiseSchedule to_schedule() const { return NoiseSchedule::linear(T, beta_start, beta_end); }
};

struct Checkpoint {
  DenoiserParams params;
  ScheduleSpec schedule;
  std::string config_hash;
  int epoch = 0;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  ck.params.validate();
  nlohmann::json desc;
  desc["arch"]["mode"] = ck.params.arch.mode == TensorMode::Vector ? "vector" : "image";
  desc["arch"]["data_dims"] = ck.params.arch.data_dims;
  desc["arch"]["hidden"] = ck.params.arch.hidden;
  desc["arch"]["time_embed_dim"] = ck.params.arch.time_embed_dim;
  desc["schedule"]["kind"] = "linear";
  desc["schedule"]["T"] = ck.schedule.T;
  desc["schedule"]["beta_start"] = ck.schedule.beta_start;
  desc["schedule"]["beta_end"] = ck.schedule.beta_end;
  desc["param_count"] = ck.params.arch.param_count();
  desc["provenance"]["config_hash"] = ck.config_hash;
  desc["provenance"]["epoch"] = ck.epoch;
  const std::string text = desc.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write("BDCK", 4);
  detail::put_u32(f, kCheckpointFormatVersion);
  detail::put_u64(f, text.size());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double x : ck.params.w) detail::put_f64(f, x);
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  detail::check_magic(f, "BDCK", "checkpoint");
  const auto version = detail::get_u32(f, "checkpoint version");
  if (version != kCheckpointFormatVersion)
    throw std::runtime_error("format error: unsupported checkpoint version " +
                             std::to_string(version));
  const auto len = detail::get_u64(f, "descriptor length");
  if (len > (1 << 24)) throw std::runtime_error("format error: corrupt descriptor length");
  std::string text(len, '\0');
  detail::get_bytes(f, text.data(), len, "descriptor");
  nlohmann::json desc;
  try {
    desc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("format error: corrupt checkpoint descriptor");
  }

  Checkpoint ck;
  const std::string mode = desc.at("arch").at("mode").get<std::string>();
  if (mode != "vector" && mode != "image")
    throw std::runtime_error("format error: unknown architecture mode");
  ck.params.arch.mode = mode == "vector" ? TensorMode::Vector : TensorMode::Image;
  ck.params.arch.data_dims = desc.at("arch").at("data_dims").get<std::vector<std::int64_t>>();
  ck.params.arch.hidden = desc.at("arch").at("hidden").get<std::vector<std::int64_t>>();
  ck.params.arch.time_embed_dim = desc.at("arch").at("time_embed_dim").get<std::int64_t>();
  if (desc.at("schedule").at("kind").get<std::string>() != "linear")
    throw std::runtime_error("format error: unknown schedule kind");
  ck.schedule.T = desc.at("schedule").at("T").get<int>();
  ck.schedule.beta_start = desc.at("schedule").at("beta_start").get<double>();
  ck.schedule.beta_end = desc.at("schedule").at("beta_end").get<double>();
  ck.config_hash = desc.at("provenance").at("config_hash").get<std::string>();
  ck.epoch = desc.at("provenance").at("epoch").get<int>();

  const auto count = desc.at("param_count").get<std::int64_t>();
  if (count != ck.params.arch.param_count())
    throw std::runtime_error("format error: parameter count disagrees with descriptor");
  ck.params.w.resize(static_cast<std::size_t>(count));
  for (double& x : ck.params.w) x = detail::get_f64(f, "parameters");
  if (f.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("format error: trailing bytes in checkpoint");
  return ck;
}

inline std::uint64_t file_fnv1a(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("file_fnv1a: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (f) {
    f.read(buf, sizeof(buf));
    const auto got = static_cast<std::size_t>(f.gcount());
    h = fnv1a64(buf, got, h);
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace bdlab
