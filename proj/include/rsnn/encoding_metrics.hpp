#pragma once

// Representation error of radix encoding against deterministic rate encoding.
// Both errors are expressed on the [0, 1] activation scale: a radix output
// S_out with residue r represents (S_out + r) / 2^T, so dropping the residue
// costs r / 2^T; a rate train of k spikes in T steps represents k / T.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rsnn/errors.hpp"
#include "rsnn/lif.hpp"
#include "rsnn/model.hpp"
#include "rsnn/oracle.hpp"
#include "rsnn/transform.hpp"

namespace rsnn {

struct ErrorSample {
  double target = 0.0;
  double radix_error = std::numeric_limits<double>::quiet_NaN();
  double rate_error = std::numeric_limits<double>::quiet_NaN();
};

/// Nearest spike count k in [0, T] for target x; ties go to the lower k.
inline int rate_count(double x, int T) {
  int best = 0;
  double err = std::fabs(x);
  for (int k = 1; k <= T; ++k) {
    const double e = std::fabs(x - static_cast<double>(k) / T);
    if (e < err) {
      err = e;
      best = k;
    }
  }
  return best;
}

inline double rate_error(double x, int T) { return std::fabs(x - static_cast<double>(rate_count(x, T)) / T); }

inline std::vector<ErrorSample> rate_errors(std::span<const double> targets, int T) {
  if (T < 1) throw ParameterError("T must be >= 1");
  std::vector<ErrorSample> out;
  out.reserve(targets.size());
  for (double x : targets) {
    if (!(x >= 0.0 && x <= 1.0)) throw RangeError("rate target must lie in [0, 1]");
    ErrorSample s;
    s.target = x;
    s.rate_error = rate_error(x, T);
    out.push_back(s);
  }
  return out;
}

/// Uniform doubles in [0, 1) from a seeded 64-bit Mersenne twister (53-bit mantissa).
inline std::vector<double> uniform_targets(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = std::ldexp(static_cast<double>(rng() >> 11), -53);
  return x;
}

/// Residue of D = floor(x 2^T') normalized by 2^T.
inline double radix_error(double x, int T, int delta_t) {
  const auto D = static_cast<std::uint64_t>(std::floor(std::ldexp(x, T + delta_t)));
  const std::uint64_t num = delta_t >= 64 ? D : (D & ((std::uint64_t{1} << delta_t) - 1));
  return std::ldexp(static_cast<double>(num), -(T + delta_t));
}

struct UniformSampler {};

/// Sampler mode: targets uniform on [0, 1). Rate error is filled in for the same targets.
inline std::vector<ErrorSample> radix_errors(UniformSampler, int T, int delta_t, std::size_t n_samples,
                                             std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("n_samples must be >= 1");
  const RadixConfig cfg(T, delta_t);
  const auto xs = uniform_targets(n_samples, seed);
  std::vector<ErrorSample> out(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    out[i].target = xs[i];
    out[i].radix_error = radix_error(xs[i], cfg.steps(), cfg.delta_t());
    out[i].rate_error = rate_error(xs[i], cfg.steps());
  }
  return out;
}

/// Layer mode: residues read from actual simulations of `layer` on random
/// inputs. Only valid-class neurons contribute; target is D / 2^T'.
inline std::vector<ErrorSample> radix_errors(const SnnLayer& layer, const RadixConfig& cfg, std::size_t n_samples,
                                             std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  const std::uint64_t span = std::uint64_t{1} << cfg.steps();
  const auto lowered = lower(layer);
  std::vector<ErrorSample> out;
  std::vector<SpikeTrain> in(layer.spec.input_count());
  std::vector<Int> S(in.size());
  for (std::size_t round = 0; out.size() < n_samples; ++round) {
    if (out.empty() && round >= 1000) throw ParameterError("layer produced no valid-class neurons");
    for (std::size_t k = 0; k < in.size(); ++k) {
      S[k] = static_cast<Int>(rng() % span);
      in[k] = wdt_inv(S[k], cfg.steps());
    }
    const auto runs = simulate_layer<Int>(in, layer, cfg);
    for (std::size_t m = 0; m < runs.size() && out.size() < n_samples; ++m) {
      Int D = layer.bias_of(m);
      for (const auto& s : lowered[m]) D += S[s.input] * s.weight;
      if (classify(D, cfg) != NeuronClass::valid) continue;
      const auto r = residue_of(runs[m].full_stream, cfg.delta_t());
      ErrorSample e;
      e.target = std::ldexp(static_cast<double>(D), -cfg.t_prime());
      e.radix_error = std::ldexp(r.value(), -cfg.steps());
      e.rate_error = rate_error(e.target, cfg.steps());
      out.push_back(e);
    }
  }
  return out;
}

struct ErrorStats {
  double rmse = 0.0;
  double max = 0.0;
  double min = 0.0;
};

inline ErrorStats rmse(std::span<const double> errors) {
  if (errors.empty()) throw ParameterError("rmse of an empty sample");
  ErrorStats st;
  st.max = -std::numeric_limits<double>::infinity();
  st.min = std::numeric_limits<double>::infinity();
  long double acc = 0.0L;
  for (double e : errors) {
    acc += static_cast<long double>(e) * e;
    st.max = std::max(st.max, e);
    st.min = std::min(st.min, e);
  }
  st.rmse = static_cast<double>(std::sqrt(acc / static_cast<long double>(errors.size())));
  return st;
}

enum class Encoding { radix, rate };

inline std::vector<double> column(std::span<const ErrorSample> s, Encoding which) {
  std::vector<double> v;
  v.reserve(s.size());
  for (const auto& e : s) v.push_back(which == Encoding::radix ? e.radix_error : e.rate_error);
  return v;
}

struct CompareRow {
  int steps = 0;
  ErrorStats radix;
  ErrorStats rate;
  double ratio() const { return radix.rmse / rate.rmse; }
};

/// Radix vs rate RMSE for each T in [t_lo, t_hi], same targets for every row.
inline std::vector<CompareRow> compare_table(int t_lo, int t_hi, int delta_t, std::size_t n_samples,
                                             std::uint64_t seed) {
  if (t_lo < 1 || t_hi < t_lo) throw ParameterError("empty T range");
  std::vector<CompareRow> rows;
  for (int T = t_lo; T <= t_hi; ++T) {
    const auto s = radix_errors(UniformSampler{}, T, delta_t, n_samples, seed);
    CompareRow row;
    row.steps = T;
    row.radix = rmse(column(s, Encoding::radix));
    row.rate = rmse(column(s, Encoding::rate));
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_compare_csv(std::span<const CompareRow> rows) {
  std::ostringstream os;
  os << "T,radix_rmse,rate_rmse,ratio,radix_max,radix_min,rate_max,rate_min\n";
  os << std::setprecision(9);
  for (const auto& r : rows)
    os << r.steps << ',' << r.radix.rmse << ',' << r.rate.rmse << ',' << r.ratio() << ',' << r.radix.max << ','
       << r.radix.min << ',' << r.rate.max << ',' << r.rate.min << '\n';
  return os.str();
}

/// Whitespace-separated columns with a '#' header, readable by gnuplot.
inline std::string format_compare_gnuplot(std::span<const CompareRow> rows) {
  std::ostringstream os;
  os << "# T radix_rmse rate_rmse ratio radix_max radix_min rate_max rate_min\n";
  os << std::setprecision(9);
  for (const auto& r : rows)
    os << r.steps << ' ' << r.radix.rmse << ' ' << r.rate.rmse << ' ' << r.ratio() << ' ' << r.radix.max << ' '
       << r.radix.min << ' ' << r.rate.max << ' ' << r.rate.min << '\n';
  return os.str();
}

inline std::string format_compare_markdown(std::span<const CompareRow> rows) {
  std::ostringstream os;
  os << "| T | radix RMSE | rate RMSE | radix/rate |\n|---|---|---|---|\n";
  os << std::setprecision(4);
  for (const auto& r : rows) os << "| " << r.steps << " | " << r.radix.rmse << " | " << r.rate.rmse << " | " << r.ratio() << " |\n";
  return os.str();
}

}  // namespace rsnn
