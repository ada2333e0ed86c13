#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtbo {

/// A point in the unit hypercube [0,1]^D.
using Point = std::vector<double>;

/// Black-box objective as seen by the optimizer: returns one noisy observation.
using Evaluator = std::function<double(std::span<const double>)>;

using Rng = std::mt19937_64;

/// Raised for invalid run or component configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Derives an independent, reproducible stream from a base seed and a stream tag.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Fixed-length bit vector over dimensions. Used both for test groups and for
/// activity states.
class DimMask {
 public:
  DimMask() = default;
  explicit DimMask(std::size_t dims) : dims_(dims), words_((dims + 63) / 64, 0) {}

  static DimMask from_indices(std::size_t dims, std::span<const std::size_t> indices) {
    DimMask m(dims);
    for (auto i : indices) m.set(i);
    return m;
  }

  std::size_t dims() const { return dims_; }
  std::size_t word_count() const { return words_.size(); }
  std::span<const std::uint64_t> words() const { return words_; }

  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i) {
    if (i >= dims_) throw std::out_of_range("DimMask index out of range");
    words_[i >> 6] |= std::uint64_t{1} << (i & 63);
  }
  void reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  void assign(std::size_t i, bool v) { v ? set(i) : reset(i); }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  bool none() const {
    for (auto w : words_)
      if (w) return false;
    return true;
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < words_.size(); ++k) {
      auto w = words_[k];
      while (w) {
        out.push_back(k * 64 + static_cast<std::size_t>(std::countr_zero(w)));
        w &= w - 1;
      }
    }
    return out;
  }

  friend bool operator==(const DimMask&, const DimMask&) = default;

 private:
  std::size_t dims_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace gtbo
