#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsnn/errors.hpp"

namespace rsnn {

/// Binary spike sequence, LSB-first in time: element t is the spike at step t.
class SpikeTrain {
public:
  SpikeTrain() = default;

  /// All-zero train of the given length.
  explicit SpikeTrain(std::size_t len) : bits_(len, 0) {
    if (len == 0) throw ShapeError("spike train must have at least one time step");
  }

  SpikeTrain(std::initializer_list<int> bits) : SpikeTrain(std::vector<int>(bits)) {}

  explicit SpikeTrain(const std::vector<int>& bits) {
    if (bits.empty()) throw ShapeError("spike train must have at least one time step");
    bits_.reserve(bits.size());
    for (int b : bits) {
      if (b != 0 && b != 1) throw RangeError("spike value must be 0 or 1, got " + std::to_string(b));
      bits_.push_back(static_cast<std::uint8_t>(b));
    }
  }

  /// Parses a '0'/'1' string, first character is t = 0. A single '|' is ignored.
  static SpikeTrain parse(std::string_view text) {
    std::vector<int> bits;
    bool seen_bar = false;
    for (char c : text) {
      if (c == '0' || c == '1') {
        bits.push_back(c - '0');
      } else if (c == '|' && !seen_bar) {
        seen_bar = true;
      } else {
        throw RangeError(std::string("invalid spike character '") + c + "'");
      }
    }
    return SpikeTrain(bits);
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }

  int operator[](std::size_t t) const noexcept { return bits_[t]; }
  int at(std::size_t t) const {
    if (t >= bits_.size()) throw RangeError("time step out of range");
    return bits_[t];
  }

  void set(std::size_t t, int bit) {
    if (bit != 0 && bit != 1) throw RangeError("spike value must be 0 or 1");
    bits_.at(t) = static_cast<std::uint8_t>(bit);
  }

  /// Sub-sequence [first, first + count).
  SpikeTrain slice(std::size_t first, std::size_t count) const {
    if (first + count > bits_.size()) throw RangeError("slice out of range");
    SpikeTrain r;
    r.bits_.assign(bits_.begin() + static_cast<std::ptrdiff_t>(first),
                   bits_.begin() + static_cast<std::ptrdiff_t>(first + count));
    return r;
  }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::string str() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(static_cast<char>('0' + b));
    return s;
  }

  friend bool operator==(const SpikeTrain&, const SpikeTrain&) = default;

private:
  std::vector<std::uint8_t> bits_;
};

/// Radix-mode timing parameters. The LIF constants are fixed in radix mode.
class RadixConfig {
public:
  static constexpr int v_th = 0;
  static constexpr int v_r = 1;
  static constexpr int kappa_num = 1;
  static constexpr int kappa_den = 2;
  /// t_prime is capped so every stream value fits a signed 64-bit integer.
  static constexpr int max_t_prime = 62;

  RadixConfig(int steps, int delta_t) : steps_(steps), delta_t_(delta_t) {
    if (steps < 1) throw ParameterError("T must be >= 1");
    if (delta_t < 0) throw ParameterError("delta_T must be >= 0");
    if (steps + delta_t > max_t_prime) throw ParameterError("T + delta_T must be <= 62");
  }

  int steps() const noexcept { return steps_; }
  int delta_t() const noexcept { return delta_t_; }
  int t_prime() const noexcept { return steps_ + delta_t_; }

  friend bool operator==(const RadixConfig&, const RadixConfig&) = default;

private:
  int steps_;
  int delta_t_;
};

}  // namespace rsnn
