#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "bdlab/io.hpp"

using namespace bdlab;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("bdlab_io_" + name)).string();
}

struct PathGuard {
  std::string path;
  explicit PathGuard(std::string p) : path(std::move(p)) {}
  ~PathGuard() { std::remove(path.c_str()); }
};

DenoiserParams sample_params() {
  DenoiserArch a;
  a.mode = TensorMode::Vector;
  a.data_dims = {2};
  a.hidden = {5};
  a.time_embed_dim = 4;
  return init_params(a, 3);
}

}  // namespace

TEST(Io, TensorRoundTripBitIdentical) {
  PathGuard g(temp_path("round.bdtf"));
  std::vector<Tensor> ts;
  Tensor v = Tensor::vec(4);
  v.v = {0.0, -0.0, 1e-308, std::numeric_limits<double>::max()};
  ts.push_back(v);
  Tensor img = Tensor::image(2, 3);
  img.v = {1.5, -2.25, 0.1, 0.2, 0.3, -0.0};
  ts.push_back(img);
  save_tensors(g.path, ts);
  const auto back = load_tensors(g.path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].mode, TensorMode::Vector);
  EXPECT_EQ(back[0].dims, (std::vector<std::int64_t>{4}));
  EXPECT_EQ(back[1].mode, TensorMode::Image);
  EXPECT_EQ(back[1].dims, (std::vector<std::int64_t>{2, 3}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < back[i].v.size(); ++j) {
      // Bit-level equality (distinguishes -0.0 from 0.0).
      ASSERT_EQ(std::bit_cast<std::uint64_t>(back[i].v[j]),
                std::bit_cast<std::uint64_t>(ts[i].v[j]));
    }
}

TEST(Io, EmptyTensorFileValid) {
  PathGuard g(temp_path("empty.bdtf"));
  save_tensors(g.path, {});
  EXPECT_TRUE(load_tensors(g.path).empty());
}

TEST(Io, TensorFileByteStable) {
  PathGuard g1(temp_path("stable1.bdtf")), g2(temp_path("stable2.bdtf"));
  std::vector<Tensor> ts = {Tensor::vec(3, 0.25)};
  save_tensors(g1.path, ts);
  save_tensors(g2.path, ts);
  EXPECT_EQ(file_fnv1a(g1.path), file_fnv1a(g2.path));
}

TEST(Io, TensorTruncationDetected) {
  PathGuard g(temp_path("trunc.bdtf"));
  save_tensors(g.path, {Tensor::vec(4, 1.0)});
  const auto full = std::filesystem::file_size(g.path);
  std::filesystem::resize_file(g.path, full - 5);
  EXPECT_THROW(load_tensors(g.path), std::runtime_error);
}

TEST(Io, TensorBadMagic) {
  PathGuard g(temp_path("magic.bdtf"));
  std::ofstream f(g.path, std::ios::binary);
  f.write("NOPE\1\0\0\0", 8);
  f.close();
  EXPECT_THROW(load_tensors(g.path), std::runtime_error);
}

TEST(Io, TensorBadVersion) {
  PathGuard g(temp_path("version.bdtf"));
  std::ofstream f(g.path, std::ios::binary);
  f.write("BDTF", 4);
  const unsigned char v2[4] = {2, 0, 0, 0};
  f.write(reinterpret_cast<const char*>(v2), 4);
  f.close();
  EXPECT_THROW(load_tensors(g.path), std::runtime_error);
}

TEST(Io, TensorCorruptModeOrDims) {
  {
    PathGuard g(temp_path("mode.bdtf"));
    std::ofstream f(g.path, std::ios::binary);
    f.write("BDTF", 4);
    const unsigned char v1[4] = {1, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(v1), 4);
    const unsigned char rec[2] = {7, 1};  // unknown mode
    f.write(reinterpret_cast<const char*>(rec), 2);
    f.close();
    EXPECT_THROW(load_tensors(g.path), std::runtime_error);
  }
  {
    PathGuard g(temp_path("dims.bdtf"));
    std::ofstream f(g.path, std::ios::binary);
    f.write("BDTF", 4);
    const unsigned char v1[4] = {1, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(v1), 4);
    const unsigned char rec[2] = {0, 1};
    f.write(reinterpret_cast<const char*>(rec), 2);
    const unsigned char huge[8] = {0, 0, 0, 0, 0, 0, 0, 0x7f};  // absurd dim
    f.write(reinterpret_cast<const char*>(huge), 8);
    f.close();
    EXPECT_THROW(load_tensors(g.path), std::runtime_error);
  }
}

TEST(Io, MissingFiles) {
  EXPECT_THROW(load_tensors(temp_path("no_such.bdtf")), std::runtime_error);
  EXPECT_THROW(load_checkpoint(temp_path("no_such.bdck")), std::runtime_error);
  EXPECT_THROW(file_fnv1a(temp_path("no_such.bin")), std::runtime_error);
}

TEST(Io, CheckpointRoundTrip) {
  PathGuard g(temp_path("round.bdck"));
  Checkpoint ck;
  ck.params = sample_params();
  ck.schedule.T = 42;
  ck.schedule.beta_start = 2e-4;
  ck.schedule.beta_end = 0.015;
  ck.config_hash = "deadbeefdeadbeef";
  ck.epoch = 7;
  save_checkpoint(g.path, ck);
  const Checkpoint back = load_checkpoint(g.path);
  EXPECT_TRUE(back.params.arch == ck.params.arch);
  EXPECT_EQ(back.params.w, ck.params.w);
  EXPECT_EQ(back.schedule.T, 42);
  EXPECT_DOUBLE_EQ(back.schedule.beta_start, 2e-4);
  EXPECT_DOUBLE_EQ(back.schedule.beta_end, 0.015);
  EXPECT_EQ(back.config_hash, "deadbeefdeadbeef");
  EXPECT_EQ(back.epoch, 7);
}

TEST(Io, CheckpointTrailingBytes) {
  PathGuard g(temp_path("trail.bdck"));
  Checkpoint ck;
  ck.params = sample_params();
  save_checkpoint(g.path, ck);
  std::ofstream f(g.path, std::ios::binary | std::ios::app);
  f.write("x", 1);
  f.close();
  EXPECT_THROW(load_checkpoint(g.path), std::runtime_error);
}

TEST(Io, CheckpointTruncated) {
  PathGuard g(temp_path("cktrunc.bdck"));
  Checkpoint ck;
  ck.params = sample_params();
  save_checkpoint(g.path, ck);
  const auto full = std::filesystem::file_size(g.path);
  std::filesystem::resize_file(g.path, full - 3);
  EXPECT_THROW(load_checkpoint(g.path), std::runtime_error);
}

TEST(Io, CheckpointCorruptDescriptor) {
  PathGuard g(temp_path("desc.bdck"));
  std::ofstream f(g.path, std::ios::binary);
  f.write("BDCK", 4);
  const unsigned char v1[4] = {1, 0, 0, 0};
  f.write(reinterpret_cast<const char*>(v1), 4);
  const std::string bogus = "this is not json";
  const std::uint64_t len = bogus.size();
  unsigned char lb[8];
  for (int i = 0; i < 8; ++i) lb[i] = static_cast<unsigned char>((len >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(lb), 8);
  f.write(bogus.data(), static_cast<std::streamsize>(bogus.size()));
  f.close();
  EXPECT_THROW(load_checkpoint(g.path), std::runtime_error);
}

TEST(Io, CheckpointByteStable) {
  PathGuard g1(temp_path("stable1.bdck")), g2(temp_path("stable2.bdck"));
  Checkpoint ck;
  ck.params = sample_params();
  ck.config_hash = "00ff";
  save_checkpoint(g1.path, ck);
  save_checkpoint(g2.path, ck);
  EXPECT_EQ(file_fnv1a(g1.path), file_fnv1a(g2.path));
}

TEST(Io, FileHashMatchesInMemoryHash) {
  PathGuard g(temp_path("hash.bin"));
  const std::string payload = "the quick brown fox";
  std::ofstream f(g.path, std::ios::binary);
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  f.close();
  EXPECT_EQ(file_fnv1a(g.path), fnv1a64(payload.data(), payload.size()));
}

TEST(Io, Hex64Format) {
  EXPECT_EQ(hex64(0x0123456789abcdefull), "0123456789abcdef");
  EXPECT_EQ(hex64(0), "0000000000000000");
  EXPECT_EQ(hex64(0xffffffffffffffffull), "ffffffffffffffff");
}

TEST(Io, ScheduleSpecBuilds) {
  ScheduleSpec sp;
  sp.T = 10;
  sp.beta_start = 0.01;
  sp.beta_end = 0.05;
  const NoiseSchedule s = sp.to_schedule();
  EXPECT_EQ(s.T(), 10);
  EXPECT_DOUBLE_EQ(s.beta(1), 0.01);
  EXPECT_DOUBLE_EQ(s.beta(10), 0.05);
}
