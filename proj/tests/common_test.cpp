#include <cmath>
#include <filesystem>
#include <set>

#include "gtest/gtest.h"
#include "seizure/common.hpp"

namespace seizure {
namespace {

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const uint64_t va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
  }
}

TEST(RngTest, UniformAndBelowRanges) {
  Rng rng(1);
  std::set<uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const uint64_t k = rng.below(7);
    EXPECT_LT(k, 7u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(RngTest, NormalMoments) {
  Rng rng(2);
  double sum = 0.0, ss = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    ss += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}

TEST(RngTest, ForksAreIndependentAndStable) {
  Rng root(5);
  Rng f1 = root.fork(1), f1b = Rng(5).fork(1), f2 = root.fork(2);
  const uint64_t a = f1.next_u64();
  EXPECT_EQ(a, f1b.next_u64());
  EXPECT_NE(a, f2.next_u64());
}

TEST(ShuffleTest, IsAPermutation) {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  Rng rng(3);
  shuffle(v, rng);
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  EXPECT_NE(v[0] * 100 + v[1], 1);
}

TEST(Crc32Test, StandardCheckValue) {
  const std::string text = "123456789";
  EXPECT_EQ(crc32({reinterpret_cast<const uint8_t*>(text.data()), text.size()}), 0xCBF43926u);
}

TEST(FormatTest, RoundTripsExactly) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.123456, 3), "0.123");
}

TEST(SplitTest, KeepsEmptyFields) {
  EXPECT_EQ(split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
}

TEST(FileTest, AtomicWriteThenRead) {
  const auto dir = std::filesystem::temp_directory_path() / "seizure_common_test";
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "x.txt", "hello");
  EXPECT_EQ(read_file(dir / "x.txt"), "hello");
  write_file_atomic(dir / "x.txt", "bye");
  EXPECT_EQ(read_file(dir / "x.txt"), "bye");
  try {
    read_file(dir / "missing.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace seizure
