#pragma once

// Integer helpers shared by the simulator, the transforms and the oracle.
// Two accumulator families are supported: std::int64_t with checked
// arithmetic, and any arbitrary-precision signed integer type (e.g.
// boost::multiprecision::cpp_int) where overflow cannot happen.

#include <concepts>
#include <cstdint>
#include <type_traits>

#include "rsnn/errors.hpp"

namespace rsnn {

using Int = std::int64_t;

template <class T>
concept Accumulator = requires(T a, T b) {
  { a + b } -> std::convertible_to<T>;
  { a - b } -> std::convertible_to<T>;
  { a * b } -> std::convertible_to<T>;
  { a / b } -> std::convertible_to<T>;
  { a % b } -> std::convertible_to<T>;
  { a < b } -> std::convertible_to<bool>;
  T(Int{0});
};

template <Accumulator A>
A checked_add(const A& a, const A& b) {
  if constexpr (std::is_same_v<A, Int>) {
    Int r;
    if (__builtin_add_overflow(a, b, &r)) throw OverflowError("64-bit accumulator overflow in addition");
    return r;
  } else {
    return a + b;
  }
}

template <Accumulator A>
A checked_sub(const A& a, const A& b) {
  if constexpr (std::is_same_v<A, Int>) {
    Int r;
    if (__builtin_sub_overflow(a, b, &r)) throw OverflowError("64-bit accumulator overflow in subtraction");
    return r;
  } else {
    return a - b;
  }
}

template <Accumulator A>
A checked_mul(const A& a, const A& b) {
  if constexpr (std::is_same_v<A, Int>) {
    Int r;
    if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("64-bit accumulator overflow in multiplication");
    return r;
  } else {
    return a * b;
  }
}

/// 2^k as an accumulator value. k must be < 63 for Int.
template <Accumulator A>
A pow2(unsigned k) {
  if constexpr (std::is_same_v<A, Int>) {
    if (k >= 63) throw OverflowError("2^k does not fit 64-bit accumulator");
    return Int{1} << k;
  } else {
    A r(Int{1});
    for (unsigned i = 0; i < k; ++i) r = r * A(Int{2});
    return r;
  }
}

/// Mathematical (non-negative) residue modulo 2.
template <Accumulator A>
int mod2(const A& x) {
  return (x % A(Int{2})) != A(Int{0}) ? 1 : 0;
}

/// floor(x / 2^k) for any sign of x.
template <Accumulator A>
A floor_div_pow2(const A& x, unsigned k) {
  if constexpr (std::is_same_v<A, Int>) {
    if (k >= 63) return x < 0 ? Int{-1} : Int{0};
    return x >> k;  // arithmetic shift since C++20
  } else {
    const A d = pow2<A>(k);
    A q = x / d;
    if (x < A(Int{0}) && q * d != x) q = q - A(Int{1});
    return q;
  }
}

/// x mod 2^k, always in [0, 2^k).
template <Accumulator A>
A mod_pow2(const A& x, unsigned k) {
  return x - floor_div_pow2(x, k) * pow2<A>(k);
}

/// Bit t of the two's-complement expansion of x (sign-extended).
template <Accumulator A>
int bit_at(const A& x, unsigned t) {
  return mod2(floor_div_pow2(x, t));
}

}  // namespace rsnn
