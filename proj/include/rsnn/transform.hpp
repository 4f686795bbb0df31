#pragma once

// Data and parameter transforms between the spike domain (binary trains,
// integer parameters) and the ANN domain (integer activations S, real
// parameters W = 2^-dT w), plus residue arithmetic and batch-norm folding.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rsnn/errors.hpp"
#include "rsnn/integer.hpp"
#include "rsnn/model.hpp"
#include "rsnn/spike_train.hpp"

namespace rsnn {

/// S = sum_t 2^t s(t).
inline std::uint64_t wdt(const SpikeTrain& s) {
  if (s.size() > 63) throw RangeError("spike train longer than 63 steps");
  std::uint64_t v = 0;
  for (std::size_t t = 0; t < s.size(); ++t) v |= static_cast<std::uint64_t>(s[t]) << t;
  return v;
}

/// Bit t of S, for t < T. Requires 0 <= S < 2^T.
inline SpikeTrain wdt_inv(std::uint64_t S, int T) {
  if (T < 1 || T > 63) throw RangeError("T must be in [1, 63]");
  if (S >> T) throw RangeError("S = " + std::to_string(S) + " does not fit " + std::to_string(T) + " steps");
  SpikeTrain s(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) s.set(static_cast<std::size_t>(t), static_cast<int>((S >> t) & 1U));
  return s;
}

inline SpikeTrain wdt_inv(Int S, int T) {
  if (S < 0) throw RangeError("S must be non-negative, got " + std::to_string(S));
  return wdt_inv(static_cast<std::uint64_t>(S), T);
}

/// W = w * 2^-dT. Exact for |w| < 2^53.
inline double wpt(Int w, int delta_t) { return std::ldexp(static_cast<double>(w), -delta_t); }

struct QuantizedParam {
  Int value = 0;
  double error = 0.0;  // |W - value * 2^-dT|
  friend bool operator==(const QuantizedParam&, const QuantizedParam&) = default;
};

/// w = round-half-to-even(W * 2^dT), checked against a two's-complement width.
inline QuantizedParam wpt_inv(double W, int delta_t, int bits = 64) {
  if (!std::isfinite(W)) throw RangeError("non-finite parameter");
  const double scaled = std::ldexp(W, delta_t);
  const double r = std::nearbyint(scaled);  // default rounding mode: ties to even
  if (std::fabs(r) >= 0x1p62) throw WidthError("parameter " + std::to_string(W) + " overflows 64-bit range");
  const Int w = static_cast<Int>(r);
  if (!fits_signed(w, bits))
    throw WidthError("parameter " + std::to_string(W) + " -> " + std::to_string(w) + " exceeds " +
                     std::to_string(bits) + "-bit range");
  return {w, std::fabs(W - wpt(w, delta_t))};
}

/// Exact dyadic residue numerator / 2^dT carried by the discarded stream prefix.
struct Residue {
  std::uint64_t numerator = 0;
  int delta_t = 0;

  double value() const { return std::ldexp(static_cast<double>(numerator), -delta_t); }
  friend bool operator==(const Residue&, const Residue&) = default;
};

inline Residue residue_of(const SpikeTrain& full_stream, int delta_t) {
  if (delta_t < 0 || static_cast<std::size_t>(delta_t) > full_stream.size())
    throw RangeError("delta_T exceeds stream length");
  Residue r{0, delta_t};
  for (int t = 0; t < delta_t; ++t)
    r.numerator |= static_cast<std::uint64_t>(full_stream[static_cast<std::size_t>(t)]) << t;
  return r;
}

struct ConversionResult {
  SnnModel model;
  std::vector<double> max_error;  // per layer, over weights and biases
};

/// W, B -> w, b with round-half-to-even. Width violations across the whole
/// model are collected into one WidthError.
inline ConversionResult ann_to_snn(const AnnModel& a) {
  ConversionResult res;
  res.model.cfg = a.cfg;
  res.model.weight_bits = a.weight_bits;
  res.model.bias_bits = a.bias_bits;
  const int dT = a.cfg.delta_t();
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& L = a.layers[i];
    if (L.weights.size() != L.spec.weight_count() || L.biases.size() != L.spec.bias_count())
      throw ShapeError("layer " + std::to_string(i) + ": parameter count does not match shape");
    SnnLayer out;
    out.spec = L.spec;
    double worst = 0.0;
    const int bb = bias_bits_for(a.weight_bits, a.bias_bits, a.cfg, L.spec);
    auto convert = [&](double W, int bits, const char* what, std::size_t k) -> Int {
      try {
        auto q = wpt_inv(W, dT, bits);
        worst = std::max(worst, q.error);
        return q.value;
      } catch (const Error& e) {
        problems.push_back("layer " + std::to_string(i) + " " + what + "[" + std::to_string(k) + "]: " + e.what());
        return 0;
      }
    };
    out.weights.reserve(L.weights.size());
    for (std::size_t k = 0; k < L.weights.size(); ++k) out.weights.push_back(convert(L.weights[k], a.weight_bits, "weight", k));
    out.biases.reserve(L.biases.size());
    for (std::size_t k = 0; k < L.biases.size(); ++k) out.biases.push_back(convert(L.biases[k], bb, "bias", k));
    res.model.layers.push_back(std::move(out));
    res.max_error.push_back(worst);
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " parameter(s) out of range:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw WidthError(msg);
  }
  return res;
}

inline AnnModel snn_to_ann(const SnnModel& m) {
  AnnModel a;
  a.cfg = m.cfg;
  a.weight_bits = m.weight_bits;
  a.bias_bits = m.bias_bits;
  const int dT = m.cfg.delta_t();
  for (const auto& L : m.layers) {
    AnnLayer out;
    out.spec = L.spec;
    out.weights.reserve(L.weights.size());
    for (Int w : L.weights) out.weights.push_back(wpt(w, dT));
    out.biases.reserve(L.biases.size());
    for (Int b : L.biases) out.biases.push_back(wpt(b, dT));
    a.layers.push_back(std::move(out));
  }
  return a;
}

/// Per neuron: does sum_n S_n W_nm + B_m >= 0 hold? Evaluated exactly as D_m >= 0.
inline std::vector<bool> check_condition(std::span<const Int> S_in, const SnnLayer& layer) {
  if (S_in.size() != layer.spec.input_count()) throw ShapeError("activation count does not match layer inputs");
  std::vector<bool> ok(layer.spec.neuron_count());
  for (std::size_t m = 0; m < ok.size(); ++m) {
    Int d = layer.bias_of(m);
    for (const auto& s : synapses_of(layer, m)) d = checked_add(d, checked_mul(S_in[s.input], s.weight));
    ok[m] = d >= 0;
  }
  return ok;
}

struct FoldedParams {
  std::vector<double> weights;
  std::vector<double> biases;
};

/// Folds y = gamma (x - mean) / sqrt(var + eps) + beta into the preceding
/// affine map. Per-channel parameters are indexed like the bias vector.
inline FoldedParams fold_batchnorm(const LayerSpec& spec, std::span<const double> W, std::span<const double> B,
                                   const BatchNormParams& bn) {
  const std::size_t C = spec.bias_count();
  if (W.size() != spec.weight_count() || B.size() != C) throw ShapeError("parameter count does not match shape");
  if (bn.gamma.size() != C || bn.beta.size() != C || bn.mean.size() != C || bn.var.size() != C)
    throw ShapeError("batch-norm parameter count does not match channels");
  std::vector<double> scale(C);
  for (std::size_t c = 0; c < C; ++c) {
    const double denom = bn.var[c] + bn.eps;
    if (!(denom > 0.0)) throw ParameterError("var + eps must be positive (channel " + std::to_string(c) + ")");
    scale[c] = bn.gamma[c] / std::sqrt(denom);
  }
  FoldedParams f;
  f.weights.assign(W.begin(), W.end());
  f.biases.resize(C);
  if (spec.kind == LayerKind::dense) {
    for (std::size_t n = 0; n < spec.n_in; ++n)
      for (std::size_t m = 0; m < spec.m_out; ++m) f.weights[n * spec.m_out + m] *= scale[m];
  } else {
    const std::size_t per = spec.synapses_per_neuron();
    for (std::size_t co = 0; co < C; ++co)
      for (std::size_t k = 0; k < per; ++k) f.weights[co * per + k] *= scale[co];
  }
  for (std::size_t c = 0; c < C; ++c) f.biases[c] = (B[c] - bn.mean[c]) * scale[c] + bn.beta[c];
  return f;
}

/// Folds every batch-norm block of the model into its layer.
inline AnnModel fold_batchnorm(const AnnModel& a) {
  AnnModel out = a;
  for (auto& L : out.layers) {
    if (!L.batchnorm) continue;
    auto f = fold_batchnorm(L.spec, L.weights, L.biases, *L.batchnorm);
    L.weights = std::move(f.weights);
    L.biases = std::move(f.biases);
    L.batchnorm.reset();
  }
  return out;
}

}  // namespace rsnn
