#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rsnn/errors.hpp"
#include "rsnn/integer.hpp"
#include "rsnn/spike_train.hpp"

namespace rsnn {

enum class LayerKind { dense, conv2d };

/// How a neuron's output window is finalized.
/// raw: the last T steps of the stream, verbatim.
/// rectify: all-zero window when the final membrane potential is <= -1.
/// rectify_saturate: rectify, plus all-one window when it is >= 1.
enum class ReadoutMode { raw, rectify, rectify_saturate };

inline std::string_view to_string(LayerKind k) { return k == LayerKind::dense ? "dense" : "conv2d"; }

inline std::string_view to_string(ReadoutMode r) {
  switch (r) {
    case ReadoutMode::raw: return "raw";
    case ReadoutMode::rectify: return "rectify";
    case ReadoutMode::rectify_saturate: return "rectify_saturate";
  }
  return "raw";
}

inline LayerKind parse_layer_kind(std::string_view s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "conv2d") return LayerKind::conv2d;
  throw FormatError("unknown layer kind '" + std::string(s) + "'");
}

inline ReadoutMode parse_readout(std::string_view s) {
  if (s == "raw") return ReadoutMode::raw;
  if (s == "rectify") return ReadoutMode::rectify;
  if (s == "rectify_saturate") return ReadoutMode::rectify_saturate;
  throw FormatError("unknown readout mode '" + std::string(s) + "'");
}

/// Convolution geometry. Input spatial size is implied by the output size.
struct ConvShape {
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t out_channels = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;

  long in_h() const {
    return static_cast<long>((out_h - 1) * stride + kernel_h) - 2 * static_cast<long>(padding);
  }
  long in_w() const {
    return static_cast<long>((out_w - 1) * stride + kernel_w) - 2 * static_cast<long>(padding);
  }

  friend bool operator==(const ConvShape&, const ConvShape&) = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t n_in = 0;   // dense only
  std::size_t m_out = 0;  // dense only
  ConvShape conv{};       // conv2d only
  ReadoutMode readout = ReadoutMode::raw;

  static LayerSpec dense(std::size_t n, std::size_t m, ReadoutMode r = ReadoutMode::raw) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.n_in = n;
    s.m_out = m;
    s.readout = r;
    return s;
  }

  static LayerSpec conv2d(const ConvShape& c, ReadoutMode r = ReadoutMode::raw) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.conv = c;
    s.readout = r;
    return s;
  }

  /// Synapses per neuron (the N of the integration sum).
  std::size_t synapses_per_neuron() const {
    if (kind == LayerKind::dense) return n_in;
    return conv.groups == 0 ? 0 : conv.in_channels / conv.groups * conv.kernel_h * conv.kernel_w;
  }

  /// Neurons in the layer (the M of the integration sum).
  std::size_t neuron_count() const {
    if (kind == LayerKind::dense) return m_out;
    return conv.out_channels * conv.out_h * conv.out_w;
  }

  /// Spike trains consumed by the layer.
  std::size_t input_count() const {
    if (kind == LayerKind::dense) return n_in;
    const long h = conv.in_h(), w = conv.in_w();
    return (h > 0 && w > 0) ? conv.in_channels * static_cast<std::size_t>(h * w) : 0;
  }

  std::size_t weight_count() const {
    if (kind == LayerKind::dense) return n_in * m_out;
    return conv.out_channels * synapses_per_neuron();
  }

  std::size_t bias_count() const { return kind == LayerKind::dense ? m_out : conv.out_channels; }

  /// Index into the bias vector for neuron m.
  std::size_t bias_index(std::size_t m) const {
    return kind == LayerKind::dense ? m : m / (conv.out_h * conv.out_w);
  }

  /// Multiply-accumulate count N * M.
  std::uint64_t macs() const {
    return static_cast<std::uint64_t>(synapses_per_neuron()) * static_cast<std::uint64_t>(neuron_count());
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// One incoming connection of a neuron after conv lowering.
struct Synapse {
  std::size_t input = 0;
  Int weight = 0;
  friend bool operator==(const Synapse&, const Synapse&) = default;
};

struct SnnLayer {
  LayerSpec spec;
  std::vector<Int> weights;  // dense: [n][m]; conv2d: [c_out][c_in/groups][k_h][k_w]
  std::vector<Int> biases;   // dense: [m]; conv2d: [c_out]

  Int bias_of(std::size_t m) const { return biases.at(spec.bias_index(m)); }

  friend bool operator==(const SnnLayer&, const SnnLayer&) = default;
};

struct SnnModel {
  RadixConfig cfg{1, 0};
  int weight_bits = 8;
  std::optional<int> bias_bits;  // unset: weight_bits + T + ceil(log2 N) per layer
  std::vector<SnnLayer> layers;
  std::string note;

  friend bool operator==(const SnnModel&, const SnnModel&) = default;
};

struct BatchNormParams {
  std::vector<double> gamma, beta, mean, var;
  double eps = 1e-5;
  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

/// Real-valued layer on the S-scale: activations are integers 0 ... 2^T - 1.
struct AnnLayer {
  LayerSpec spec;
  std::vector<double> weights;  // same layout as SnnLayer
  std::vector<double> biases;
  std::optional<BatchNormParams> batchnorm;

  friend bool operator==(const AnnLayer&, const AnnLayer&) = default;
};

struct AnnModel {
  RadixConfig cfg{1, 0};
  int weight_bits = 8;
  std::optional<int> bias_bits;
  std::vector<AnnLayer> layers;

  friend bool operator==(const AnnModel&, const AnnModel&) = default;
};

inline int ceil_log2(std::uint64_t n) {
  int k = 0;
  while ((std::uint64_t{1} << k) < n) ++k;
  return k;
}

/// Bias width for a layer: explicit, or weight_bits + T + ceil(log2 N).
inline int bias_bits_for(int weight_bits, std::optional<int> bias_bits, const RadixConfig& cfg,
                         const LayerSpec& spec) {
  if (bias_bits) return *bias_bits;
  return weight_bits + cfg.steps() + ceil_log2(std::max<std::size_t>(spec.synapses_per_neuron(), 1));
}

inline int bias_bits_for(const SnnModel& m, const LayerSpec& spec) {
  return bias_bits_for(m.weight_bits, m.bias_bits, m.cfg, spec);
}

/// Two's-complement range [-2^(bits-1), 2^(bits-1) - 1].
inline bool fits_signed(Int v, int bits) {
  if (bits >= 64) return true;
  const Int hi = (Int{1} << (bits - 1)) - 1;
  const Int lo = -(Int{1} << (bits - 1));
  return v >= lo && v <= hi;
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
};

namespace detail {

inline void validate_shape(const LayerSpec& s, std::size_t idx, std::vector<std::string>& out) {
  const std::string at = "layer " + std::to_string(idx) + ": ";
  if (s.kind == LayerKind::dense) {
    if (s.n_in < 1) out.push_back(at + "shape: N must be >= 1");
    if (s.m_out < 1) out.push_back(at + "shape: M must be >= 1");
    return;
  }
  const auto& c = s.conv;
  if (c.in_channels < 1 || c.out_channels < 1 || c.kernel_h < 1 || c.kernel_w < 1 || c.out_h < 1 ||
      c.out_w < 1 || c.stride < 1 || c.groups < 1) {
    out.push_back(at + "shape: conv dimensions must be >= 1");
    return;
  }
  if (c.in_channels % c.groups != 0 || c.out_channels % c.groups != 0)
    out.push_back(at + "shape: channels not divisible by groups");
  if (c.in_h() < 1 || c.in_w() < 1) out.push_back(at + "shape: implied input size is not positive");
}

}  // namespace detail

/// Checks shapes, parameter counts, widths and layer chaining.
inline ValidationReport validate_model(const SnnModel& m) {
  ValidationReport rep;
  auto& v = rep.violations;
  if (m.weight_bits < 2 || m.weight_bits > 32) v.push_back("weight_bits must be in [2, 32]");
  if (m.bias_bits && (*m.bias_bits < 2 || *m.bias_bits > 62)) v.push_back("bias_bits must be in [2, 62]");
  if (m.layers.empty()) v.push_back("model has no layers");
  if (!rep.ok()) return rep;

  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& L = m.layers[i];
    const std::string at = "layer " + std::to_string(i) + ": ";
    const auto before = v.size();
    detail::validate_shape(L.spec, i, v);
    if (v.size() != before) continue;
    if (L.weights.size() != L.spec.weight_count())
      v.push_back(at + "shape: expected " + std::to_string(L.spec.weight_count()) + " weights, got " +
                  std::to_string(L.weights.size()));
    if (L.biases.size() != L.spec.bias_count())
      v.push_back(at + "shape: expected " + std::to_string(L.spec.bias_count()) + " biases, got " +
                  std::to_string(L.biases.size()));
    for (std::size_t k = 0; k < L.weights.size(); ++k) {
      if (!fits_signed(L.weights[k], m.weight_bits)) {
        v.push_back(at + "width: weight[" + std::to_string(k) + "] = " + std::to_string(L.weights[k]) +
                    " exceeds " + std::to_string(m.weight_bits) + "-bit range");
      }
    }
    const int bb = bias_bits_for(m, L.spec);
    for (std::size_t k = 0; k < L.biases.size(); ++k) {
      if (!fits_signed(L.biases[k], bb)) {
        v.push_back(at + "width: bias[" + std::to_string(k) + "] = " + std::to_string(L.biases[k]) +
                    " exceeds " + std::to_string(bb) + "-bit range");
      }
    }
    if (i + 1 < m.layers.size()) {
      const auto out = L.spec.neuron_count();
      const auto in = m.layers[i + 1].spec.input_count();
      if (out != in)
        v.push_back(at + "shape: " + std::to_string(out) + " outputs feed layer " + std::to_string(i + 1) +
                    " expecting " + std::to_string(in) + " inputs");
    }
  }
  return rep;
}

/// Connection of neuron m to one input, by position in the weight array.
struct Tap {
  std::size_t input = 0;
  std::size_t weight_index = 0;
};

/// Incoming taps of neuron m. Padded conv taps are dropped (they only see zero spikes).
inline std::vector<Tap> taps_of(const LayerSpec& s, std::size_t m) {
  std::vector<Tap> taps;
  if (s.kind == LayerKind::dense) {
    taps.reserve(s.n_in);
    for (std::size_t n = 0; n < s.n_in; ++n) taps.push_back({n, n * s.m_out + m});
    return taps;
  }
  const auto& c = s.conv;
  const long in_h = c.in_h(), in_w = c.in_w();
  const std::size_t plane = c.out_h * c.out_w;
  const std::size_t co = m / plane;
  const std::size_t oy = (m % plane) / c.out_w;
  const std::size_t ox = m % c.out_w;
  const std::size_t cin_g = c.in_channels / c.groups;
  const std::size_t g = co / (c.out_channels / c.groups);
  taps.reserve(cin_g * c.kernel_h * c.kernel_w);
  for (std::size_t ci = 0; ci < cin_g; ++ci) {
    for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
        const long iy = static_cast<long>(oy * c.stride + ky) - static_cast<long>(c.padding);
        const long ix = static_cast<long>(ox * c.stride + kx) - static_cast<long>(c.padding);
        if (iy < 0 || ix < 0 || iy >= in_h || ix >= in_w) continue;
        const std::size_t channel = g * cin_g + ci;
        const std::size_t input =
            channel * static_cast<std::size_t>(in_h * in_w) + static_cast<std::size_t>(iy * in_w + ix);
        taps.push_back({input, ((co * cin_g + ci) * c.kernel_h + ky) * c.kernel_w + kx});
      }
    }
  }
  return taps;
}

inline std::vector<Synapse> synapses_of(const SnnLayer& layer, std::size_t m) {
  const auto taps = taps_of(layer.spec, m);
  std::vector<Synapse> syn;
  syn.reserve(taps.size());
  for (const auto& t : taps) syn.push_back({t.input, layer.weights.at(t.weight_index)});
  return syn;
}

/// Explicit per-neuron connectivity for the whole layer.
inline std::vector<std::vector<Synapse>> lower(const SnnLayer& layer) {
  std::vector<std::vector<Synapse>> out(layer.spec.neuron_count());
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = synapses_of(layer, m);
  return out;
}

}  // namespace rsnn
