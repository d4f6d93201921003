#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seizure {

// Machine-readable error category; the CLI serializes it on stderr.
enum class ErrorCode {
  kInvalidInput,
  kParse,
  kShape,
  kIo,
  kChecksum,
  kVersion,
  kDivergence,
  kNumeric,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Seeded generator with distribution code owned here, so sequences do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  double normal();
  // Derives an independent stream, e.g. one per record.
  Rng fork(uint64_t stream);

 private:
  uint64_t state_[4];
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
}

uint32_t crc32(std::span<const uint8_t> bytes);

// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

// Shortest decimal that round-trips the double exactly.
std::string format_double(double v);
// Fixed significant-digit formatting for report tables.
std::string format_double(double v, int significant_digits);

std::vector<std::string> split(std::string_view text, char sep);

// Keeps large tensor buffers on the heap instead of fresh mmap pages, which
// otherwise dominate elementwise layer time. Idempotent.
void tune_allocator();

}  // namespace seizure
