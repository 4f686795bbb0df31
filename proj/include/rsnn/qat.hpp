#pragma once

// Quantization-aware training of small dense networks with straight-through
// gradients, and the train -> convert -> simulate path built on it.
//
// Units: activations travel as a = S / 2^T in [0, 1). Weights W are shared
// with the ANN domain; biases are trained as beta = B / 2^T so that
// z = sum a W + beta = (sum S W + B) / 2^T.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
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

// ---------------------------------------------------------------------------
// Data

struct ToyDataset {
  std::size_t features = 0;
  std::size_t classes = 0;
  std::vector<std::vector<double>> train_x, test_x;  // each value in [0, 1)
  std::vector<int> train_y, test_y;
};

struct BlobParams {
  std::size_t classes = 3;
  std::size_t features = 8;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 100;
  double spread = 0.06;
  double center_lo = 0.15;
  double center_hi = 0.85;
  std::uint64_t seed = 42;
};

/// Gaussian blobs clipped into [0, 1). Train and test points are separate draws.
inline ToyDataset make_blobs(const BlobParams& p) {
  if (p.classes < 2 || p.features < 1) throw ParameterError("blobs need >= 2 classes and >= 1 feature");
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> center(p.center_lo, p.center_hi);
  std::normal_distribution<double> noise(0.0, p.spread);
  std::vector<std::vector<double>> centers(p.classes, std::vector<double>(p.features));
  for (auto& c : centers)
    for (auto& v : c) v = center(rng);
  const double top = std::nextafter(1.0, 0.0);
  auto draw = [&](std::size_t per, std::vector<std::vector<double>>& xs, std::vector<int>& ys) {
    for (std::size_t i = 0; i < per; ++i) {
      for (std::size_t c = 0; c < p.classes; ++c) {
        std::vector<double> x(p.features);
        for (std::size_t f = 0; f < p.features; ++f) x[f] = std::clamp(centers[c][f] + noise(rng), 0.0, top);
        xs.push_back(std::move(x));
        ys.push_back(static_cast<int>(c));
      }
    }
  };
  ToyDataset d;
  d.features = p.features;
  d.classes = p.classes;
  draw(p.train_per_class, d.train_x, d.train_y);
  draw(p.test_per_class, d.test_x, d.test_y);
  return d;
}

namespace detail {

inline std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace detail

/// Loads an IDX image/label pair (unsigned-byte data). Pixels are scaled by
/// 1/256; the first n_train items form the training split, the rest the test split.
inline ToyDataset load_idx(const std::string& images_path, const std::string& labels_path, std::size_t n_train) {
  std::ifstream img(images_path, std::ios::binary), lab(labels_path, std::ios::binary);
  if (!img) throw Error("cannot open '" + images_path + "'");
  if (!lab) throw Error("cannot open '" + labels_path + "'");
  const auto img_magic = detail::read_be32(img);
  if ((img_magic >> 8) != 0x08 || (img_magic & 0xFF) < 1) throw FormatError("not an unsigned-byte IDX image file");
  const auto dims = img_magic & 0xFF;
  const auto count = detail::read_be32(img);
  std::size_t features = 1;
  for (std::uint32_t d = 1; d < dims; ++d) features *= detail::read_be32(img);
  if (detail::read_be32(lab) != 0x00000801) throw FormatError("not an IDX label file");
  if (detail::read_be32(lab) != count) throw FormatError("image and label counts differ");
  if (n_train > count) throw ParameterError("n_train exceeds item count");

  ToyDataset d;
  d.features = features;
  std::vector<unsigned char> buf(features);
  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(features)))
      throw FormatError("truncated IDX image data");
    char y;
    if (!lab.read(&y, 1)) throw FormatError("truncated IDX label data");
    std::vector<double> x(features);
    for (std::size_t f = 0; f < features; ++f) x[f] = buf[f] / 256.0;
    const int label = static_cast<unsigned char>(y);
    max_label = std::max(max_label, label);
    if (i < n_train) {
      d.train_x.push_back(std::move(x));
      d.train_y.push_back(label);
    } else {
      d.test_x.push_back(std::move(x));
      d.test_y.push_back(label);
    }
  }
  d.classes = static_cast<std::size_t>(max_label) + 1;
  return d;
}

// ---------------------------------------------------------------------------
// Quantizers

struct QuantizedActivation {
  Int S = 0;
  double grad = 0.0;  // 1 where the quantizer passes gradients straight through
};

/// S = clamp(floor(a 2^T), 0, 2^T - 1); gradient passes for 0 <= a < 1.
inline QuantizedActivation act_quantize(double a, int T) {
  const double hi = std::ldexp(1.0, T) - 1.0;
  const double s = std::clamp(std::floor(std::ldexp(a, T)), 0.0, hi);
  return {static_cast<Int>(s), (a >= 0.0 && a < 1.0) ? 1.0 : 0.0};
}

struct QuantizedWeight {
  Int w = 0;
  double grad = 0.0;
};

/// w = clamp(round-half-to-even(W 2^dT), -2^(wb-1), 2^(wb-1) - 1); gradient passes inside the clamp range.
inline QuantizedWeight weight_quantize(double W, int delta_t, int bits) {
  const double lo = -std::ldexp(1.0, bits - 1), hi = std::ldexp(1.0, bits - 1) - 1.0;
  const double r = std::nearbyint(std::ldexp(W, delta_t));
  const bool inside = r >= lo && r <= hi;
  return {static_cast<Int>(std::clamp(r, lo, hi)), inside ? 1.0 : 0.0};
}

/// Learning rate halves every `halving` epochs.
inline double learning_rate(double lr0, int epoch, int halving = 30) {
  return std::ldexp(lr0, -(epoch / halving));
}

// ---------------------------------------------------------------------------
// Quantized ANN forward pass

struct QuantizedForward {
  std::vector<std::vector<Int>> activations;  // per layer, S values after the clamp
  std::vector<double> logits;                 // last layer sum S W + B before the clamp
};

/// Per layer: D/2^dT = sum S W + B accumulated in double, then
/// S_out = clamp(floor(.), 0, 2^T - 1). Exact for on-grid parameters.
inline QuantizedForward quantized_forward(const AnnModel& a, std::span<const Int> S_in) {
  if (a.layers.empty()) throw ShapeError("model has no layers");
  const Int top = (Int{1} << a.cfg.steps()) - 1;
  QuantizedForward out;
  std::vector<Int> cur(S_in.begin(), S_in.end());
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& L = a.layers[l];
    if (cur.size() != L.spec.input_count())
      throw ShapeError("layer " + std::to_string(l) + " expects " + std::to_string(L.spec.input_count()) +
                       " inputs, got " + std::to_string(cur.size()));
    if (L.weights.size() != L.spec.weight_count() || L.biases.size() != L.spec.bias_count())
      throw ShapeError("layer " + std::to_string(l) + ": parameter count does not match shape");
    const std::size_t M = L.spec.neuron_count();
    std::vector<Int> next(M);
    std::vector<double> pre(M);
    for (std::size_t m = 0; m < M; ++m) {
      double acc = L.biases[L.spec.bias_index(m)];
      for (const auto& t : taps_of(L.spec, m)) acc += static_cast<double>(cur[t.input]) * L.weights[t.weight_index];
      pre[m] = acc;
      next[m] = static_cast<Int>(std::clamp(std::floor(acc), 0.0, static_cast<double>(top)));
    }
    out.activations.push_back(next);
    if (l + 1 == a.layers.size()) out.logits = std::move(pre);
    cur = std::move(next);
  }
  return out;
}

/// Index of the largest value; ties go to the lowest index.
template <class T>
std::size_t argmax(std::span<const T> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline std::vector<Int> quantize_input(std::span<const double> x, int T) {
  std::vector<Int> S(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) S[i] = act_quantize(x[i], T).S;
  return S;
}

/// Class predicted by the quantized ANN: argmax of the clamped output activations.
inline std::size_t predict_quantized(const AnnModel& a, std::span<const double> x) {
  const auto S = quantize_input(x, a.cfg.steps());
  const auto f = quantized_forward(a, S);
  return argmax<Int>(f.activations.back());
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int epochs = 60;
  double lr = 0.05;
  int lr_halving_epochs = 30;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
  int steps = 8;    // T, activation bits
  int delta_t = 8;  // weight fractional bits
  int weight_bits = 8;
  std::optional<int> bias_bits;
  double logit_scale = 8.0;  // softmax temperature on z = pre / 2^T
  bool quantize = true;      // false trains the full-precision reference
};

/// Shadow (full-precision) parameters of a dense network.
struct Mlp {
  std::vector<std::size_t> sizes;           // input, hidden..., output
  std::vector<std::vector<double>> weight;  // layer l: [n][m], sizes[l] x sizes[l+1]
  std::vector<std::vector<double>> beta;    // layer l: [m], bias / 2^T

  std::size_t layer_count() const { return weight.size(); }
};

inline Mlp init_mlp(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw ParameterError("topology needs at least input and output sizes");
  for (auto s : sizes)
    if (s == 0) throw ParameterError("layer sizes must be positive");
  Mlp p;
  p.sizes = sizes;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double lim = std::min(0.4, std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1])));
    std::uniform_real_distribution<double> u(-lim, lim);
    std::vector<double> w(sizes[l] * sizes[l + 1]);
    for (auto& v : w) v = u(rng);
    p.weight.push_back(std::move(w));
    p.beta.emplace_back(sizes[l + 1], 0.05);
  }
  return p;
}

/// Quantized view of the shadow parameters plus straight-through masks.
struct QuantizedParams {
  std::vector<std::vector<double>> weight, beta;            // on-grid values used in the forward pass
  std::vector<std::vector<double>> weight_mask, beta_mask;  // d(quantized)/d(shadow) under STE
};

inline int mlp_bias_bits(const TrainConfig& cfg, std::size_t fan_in) {
  const RadixConfig rc(cfg.steps, cfg.delta_t);
  return bias_bits_for(cfg.weight_bits, cfg.bias_bits, rc, LayerSpec::dense(fan_in, 1));
}

inline QuantizedParams quantize_params(const Mlp& p, const TrainConfig& cfg) {
  QuantizedParams q;
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    std::vector<double> w(p.weight[l].size()), wm(w.size()), b(p.beta[l].size()), bm(b.size());
    const int bb = mlp_bias_bits(cfg, p.sizes[l]);
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (!cfg.quantize) {
        w[k] = p.weight[l][k];
        wm[k] = 1.0;
        continue;
      }
      const auto r = weight_quantize(p.weight[l][k], cfg.delta_t, cfg.weight_bits);
      w[k] = wpt(r.w, cfg.delta_t);
      wm[k] = r.grad;
    }
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (!cfg.quantize) {
        b[k] = p.beta[l][k];
        bm[k] = 1.0;
        continue;
      }
      // beta is B / 2^T, B lives on the 2^-dT grid with bb-bit integer numerator.
      const auto r = weight_quantize(std::ldexp(p.beta[l][k], cfg.steps), cfg.delta_t, bb);
      b[k] = std::ldexp(static_cast<double>(r.w), -(cfg.delta_t + cfg.steps));
      bm[k] = r.grad;
    }
    q.weight.push_back(std::move(w));
    q.weight_mask.push_back(std::move(wm));
    q.beta.push_back(std::move(b));
    q.beta_mask.push_back(std::move(bm));
  }
  return q;
}

/// Activations and pre-activations of one forward pass.
struct Trace {
  std::vector<std::vector<double>> act;       // act[0] = quantized input, act[l+1] = output of hidden layer l
  std::vector<std::vector<double>> z;         // z[l] = pre-activation of layer l (normalized)
  std::vector<std::vector<double>> act_mask;  // STE mask of hidden layer l
};

inline std::vector<double> quantize_features(std::span<const double> x, const TrainConfig& cfg) {
  std::vector<double> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    a[i] = cfg.quantize ? std::ldexp(static_cast<double>(act_quantize(x[i], cfg.steps).S), -cfg.steps)
                        : std::clamp(x[i], 0.0, 1.0);
  return a;
}

/// Forward pass. With `frozen`, every activation quantizer is replaced by its
/// first-order surrogate around the frozen trace: a = a0 + mask0 (z - z0).
inline Trace forward(const Mlp& p, const QuantizedParams& q, std::span<const double> input, const TrainConfig& cfg,
                     const Trace* frozen = nullptr) {
  Trace tr;
  tr.act.emplace_back(input.begin(), input.end());
  const std::size_t L = p.layer_count();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t N = p.sizes[l], M = p.sizes[l + 1];
    const auto& a = tr.act.back();
    std::vector<double> z(q.beta[l]);
    for (std::size_t n = 0; n < N; ++n) {
      if (a[n] == 0.0) continue;
      for (std::size_t m = 0; m < M; ++m) z[m] += a[n] * q.weight[l][n * M + m];
    }
    if (l + 1 < L) {
      std::vector<double> out(M), mask(M);
      for (std::size_t m = 0; m < M; ++m) {
        if (frozen) {
          mask[m] = frozen->act_mask[l][m];
          out[m] = frozen->act[l + 1][m] + mask[m] * (z[m] - frozen->z[l][m]);
        } else if (cfg.quantize) {
          const auto r = act_quantize(z[m], cfg.steps);
          out[m] = std::ldexp(static_cast<double>(r.S), -cfg.steps);
          mask[m] = r.grad;
        } else {
          const bool inside = z[m] >= 0.0 && z[m] < 1.0;
          out[m] = std::clamp(z[m], 0.0, 1.0);
          mask[m] = inside ? 1.0 : 0.0;
        }
      }
      tr.act.push_back(std::move(out));
      tr.act_mask.push_back(std::move(mask));
    }
    tr.z.push_back(std::move(z));
  }
  return tr;
}

/// Cross-entropy of softmax(logit_scale * z_last) against `label`.
inline double sample_loss(const Trace& tr, int label, const TrainConfig& cfg) {
  const auto& z = tr.z.back();
  double mx = -INFINITY;
  for (double v : z) mx = std::max(mx, cfg.logit_scale * v);
  double sum = 0.0;
  for (double v : z) sum += std::exp(cfg.logit_scale * v - mx);
  return -(cfg.logit_scale * z[static_cast<std::size_t>(label)] - mx - std::log(sum));
}

struct Gradients {
  std::vector<std::vector<double>> weight, beta;
};

inline Gradients zero_gradients(const Mlp& p) {
  Gradients g;
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    g.weight.emplace_back(p.weight[l].size(), 0.0);
    g.beta.emplace_back(p.beta[l].size(), 0.0);
  }
  return g;
}

/// Accumulates scale * dLoss/dShadow for one sample (straight-through).
inline void backward(const Mlp& p, const QuantizedParams& q, const Trace& tr, int label, const TrainConfig& cfg,
                     double scale, Gradients& g) {
  const std::size_t L = p.layer_count();
  const auto& zl = tr.z.back();
  std::vector<double> dz(zl.size());
  double mx = -INFINITY;
  for (double v : zl) mx = std::max(mx, cfg.logit_scale * v);
  double sum = 0.0;
  for (std::size_t m = 0; m < zl.size(); ++m) sum += (dz[m] = std::exp(cfg.logit_scale * zl[m] - mx));
  for (std::size_t m = 0; m < zl.size(); ++m)
    dz[m] = cfg.logit_scale * (dz[m] / sum - (static_cast<int>(m) == label ? 1.0 : 0.0));

  for (std::size_t l = L; l-- > 0;) {
    const std::size_t N = p.sizes[l], M = p.sizes[l + 1];
    const auto& a = tr.act[l];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t m = 0; m < M; ++m) g.weight[l][n * M + m] += scale * a[n] * dz[m] * q.weight_mask[l][n * M + m];
    for (std::size_t m = 0; m < M; ++m) g.beta[l][m] += scale * dz[m] * q.beta_mask[l][m];
    if (l == 0) break;
    std::vector<double> prev(N, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      double s = 0.0;
      for (std::size_t m = 0; m < M; ++m) s += q.weight[l][n * M + m] * dz[m];
      prev[n] = s * tr.act_mask[l - 1][n];
    }
    dz = std::move(prev);
  }
}

/// Mean loss and straight-through gradient over a batch of sample indices.
inline std::pair<double, Gradients> batch_gradient(const Mlp& p, const std::vector<std::vector<double>>& inputs,
                                                   const std::vector<int>& labels, std::span<const std::size_t> idx,
                                                   const TrainConfig& cfg) {
  const auto q = quantize_params(p, cfg);
  auto g = zero_gradients(p);
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(idx.size());
  for (auto i : idx) {
    const auto tr = forward(p, q, inputs[i], cfg);
    loss += sample_loss(tr, labels[i], cfg);
    backward(p, q, tr, labels[i], cfg, scale, g);
  }
  return {loss * scale, std::move(g)};
}

/// Frozen quantization state for evaluating the straight-through surrogate loss.
struct SurrogateTape {
  Mlp origin;
  QuantizedParams quant;
  std::vector<Trace> traces;
};

inline SurrogateTape record_surrogate(const Mlp& p, const std::vector<std::vector<double>>& inputs,
                                      std::span<const std::size_t> idx, const TrainConfig& cfg) {
  SurrogateTape tape{p, quantize_params(p, cfg), {}};
  for (auto i : idx) tape.traces.push_back(forward(p, tape.quant, inputs[i], cfg));
  return tape;
}

/// Mean loss of the network where each quantizer is replaced by
/// q(x0) + mask(x0) (x - x0), x0 taken from the tape. Equals the quantized
/// loss at the tape's origin; its gradient there is the straight-through one.
inline double surrogate_loss(const Mlp& p, const SurrogateTape& tape, const std::vector<int>& labels,
                             std::span<const std::size_t> idx, const TrainConfig& cfg) {
  QuantizedParams q = tape.quant;
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    for (std::size_t k = 0; k < q.weight[l].size(); ++k)
      q.weight[l][k] += q.weight_mask[l][k] * (p.weight[l][k] - tape.origin.weight[l][k]);
    for (std::size_t k = 0; k < q.beta[l].size(); ++k)
      q.beta[l][k] += q.beta_mask[l][k] * (p.beta[l][k] - tape.origin.beta[l][k]);
  }
  double loss = 0.0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto& tr0 = tape.traces[j];
    const auto tr = forward(p, q, tr0.act[0], cfg, &tr0);
    loss += sample_loss(tr, labels[idx[j]], cfg);
  }
  return loss / static_cast<double>(idx.size());
}

/// Exports the quantized parameters as an on-grid ANN on the S-scale.
inline AnnModel to_ann_model(const Mlp& p, const TrainConfig& cfg) {
  AnnModel a;
  a.cfg = RadixConfig(cfg.steps, cfg.delta_t);
  a.weight_bits = cfg.weight_bits;
  a.bias_bits = cfg.bias_bits;
  TrainConfig qc = cfg;
  qc.quantize = true;
  const auto q = quantize_params(p, qc);
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    AnnLayer L;
    L.spec = LayerSpec::dense(p.sizes[l], p.sizes[l + 1], ReadoutMode::rectify_saturate);
    L.weights = q.weight[l];
    L.biases.resize(q.beta[l].size());
    for (std::size_t m = 0; m < L.biases.size(); ++m) L.biases[m] = std::ldexp(q.beta[l][m], cfg.steps);
    a.layers.push_back(std::move(L));
  }
  return a;
}

/// Accuracy of the network as trained: quantized ANN when cfg.quantize, float argmax otherwise.
inline double accuracy(const Mlp& p, const std::vector<std::vector<double>>& xs, const std::vector<int>& ys,
                       const TrainConfig& cfg) {
  if (xs.empty()) return 0.0;
  std::size_t hit = 0;
  if (cfg.quantize) {
    const auto a = to_ann_model(p, cfg);
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (static_cast<int>(predict_quantized(a, xs[i])) == ys[i]) ++hit;
  } else {
    const auto q = quantize_params(p, cfg);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto tr = forward(p, q, quantize_features(xs[i], cfg), cfg);
      if (static_cast<int>(argmax<double>(tr.z.back())) == ys[i]) ++hit;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(xs.size());
}

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct TrainResult {
  Mlp shadow;
  AnnModel model;
  std::vector<EpochMetrics> history;
};

/// SGD with momentum over shuffled mini-batches. Deterministic for a fixed seed.
inline TrainResult train(const TrainConfig& cfg, const ToyDataset& data, const std::vector<std::size_t>& hidden) {
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.lr > 0.0) || cfg.lr_halving_epochs < 1)
    throw ParameterError("invalid training configuration");
  if (data.train_x.empty()) throw ParameterError("empty training set");
  (void)RadixConfig(cfg.steps, cfg.delta_t);

  std::vector<std::size_t> sizes{data.features};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(data.classes);
  TrainResult res{init_mlp(sizes, cfg.seed), {}, {}};
  auto& p = res.shadow;

  std::vector<std::vector<double>> train_in(data.train_x.size());
  for (std::size_t i = 0; i < train_in.size(); ++i) train_in[i] = quantize_features(data.train_x[i], cfg);

  auto velocity = zero_gradients(p);
  std::vector<std::size_t> order(train_in.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg.lr, epoch, cfg.lr_halving_epochs);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      auto [loss, g] = batch_gradient(p, train_in, data.train_y, idx, cfg);
      if (!std::isfinite(loss))
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches) + " (lr " + std::to_string(lr) + ")");
      loss_sum += loss;
      ++batches;
      for (std::size_t l = 0; l < p.layer_count(); ++l) {
        for (std::size_t k = 0; k < p.weight[l].size(); ++k) {
          velocity.weight[l][k] = cfg.momentum * velocity.weight[l][k] - lr * g.weight[l][k];
          p.weight[l][k] += velocity.weight[l][k];
        }
        for (std::size_t k = 0; k < p.beta[l].size(); ++k) {
          velocity.beta[l][k] = cfg.momentum * velocity.beta[l][k] - lr * g.beta[l][k];
          p.beta[l][k] += velocity.beta[l][k];
        }
        const auto finite = [](double x) { return std::isfinite(x); };
        if (!std::all_of(p.weight[l].begin(), p.weight[l].end(), finite) ||
            !std::all_of(p.beta[l].begin(), p.beta[l].end(), finite))
          throw DivergenceError("parameters diverged at epoch " + std::to_string(epoch) + " (lr " +
                                std::to_string(lr) + ")");
      }
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.loss = loss_sum / static_cast<double>(batches);
    m.train_accuracy = accuracy(p, data.train_x, data.train_y, cfg);
    m.test_accuracy = accuracy(p, data.test_x, data.test_y, cfg);
    res.history.push_back(m);
  }
  res.model = to_ann_model(p, cfg);
  return res;
}

inline std::string format_metrics_csv(const std::vector<EpochMetrics>& h) {
  std::ostringstream os;
  os << "epoch,lr,loss,train_accuracy,test_accuracy\n";
  os.precision(9);
  for (const auto& m : h)
    os << m.epoch << ',' << m.lr << ',' << m.loss << ',' << m.train_accuracy << ',' << m.test_accuracy << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Train -> convert -> simulate

struct EndToEndReport {
  TrainResult training;
  SnnModel snn;
  std::vector<double> conversion_error;  // per layer
  double ann_accuracy = 0.0;
  double snn_accuracy = 0.0;
  std::size_t test_samples = 0;
  std::size_t agree = 0;
  std::size_t samples_without_overflow = 0;
  std::size_t agree_without_overflow = 0;
  std::size_t exact_activation_matches = 0;  // samples whose every layer matches integer-for-integer
  NetworkReport verdicts;

  double agreement() const { return test_samples ? static_cast<double>(agree) / test_samples : 0.0; }
  double agreement_without_overflow() const {
    return samples_without_overflow ? static_cast<double>(agree_without_overflow) / samples_without_overflow : 1.0;
  }
  double max_conversion_error() const {
    double e = 0.0;
    for (double v : conversion_error) e = std::max(e, v);
    return e;
  }
};

/// Simulates `snn` and compares it with the quantized ANN `ann` on every test sample.
inline void compare_on_test_set(const AnnModel& ann, const SnnModel& snn, const ToyDataset& data,
                                EndToEndReport& rep) {
  const int T = ann.cfg.steps();
  rep.test_samples = data.test_x.size();
  std::size_t ann_hit = 0, snn_hit = 0;
  rep.verdicts = NetworkReport{};
  rep.verdicts.layers.resize(snn.layers.size());
  rep.verdicts.pass = true;
  for (std::size_t i = 0; i < data.test_x.size(); ++i) {
    const auto S = quantize_input(data.test_x[i], T);
    std::vector<SpikeTrain> in;
    in.reserve(S.size());
    for (Int s : S) in.push_back(wdt_inv(s, T));

    const auto q = quantized_forward(ann, S);
    const auto run = simulate_network<Int>(in, snn);
    bool exact = true;
    for (std::size_t l = 0; l < run.layers.size(); ++l)
      for (std::size_t m = 0; m < run.layers[l].size(); ++m)
        if (static_cast<Int>(wdt(run.layers[l][m].out)) != q.activations[l][m]) exact = false;
    if (exact) ++rep.exact_activation_matches;

    std::vector<Int> out_S;
    for (const auto& s : run.output) out_S.push_back(static_cast<Int>(wdt(s)));
    const auto ann_pred = argmax<Int>(q.activations.back());
    const auto snn_pred = argmax<Int>(out_S);
    ann_hit += static_cast<int>(ann_pred) == data.test_y[i];
    snn_hit += static_cast<int>(snn_pred) == data.test_y[i];

    const std::vector<std::vector<SpikeTrain>> one{in};
    const auto v = verify_network(snn, one);
    for (std::size_t l = 0; l < v.layers.size(); ++l) {
      auto& c = rep.verdicts.layers[l];
      c.valid += v.layers[l].valid;
      c.negative += v.layers[l].negative;
      c.overflow += v.layers[l].overflow;
      c.mismatches += v.layers[l].mismatches;
      c.uncovered += v.layers[l].uncovered;
    }
    for (const auto& d : v.details)
      if (rep.verdicts.details.size() < 20) rep.verdicts.details.push_back({i, d.layer, d.neuron, d.d_value, d.cls, d.problem});
    rep.verdicts.pass = rep.verdicts.pass && v.pass;
    ++rep.verdicts.samples;

    const bool agree = ann_pred == snn_pred;
    rep.agree += agree;
    if (v.total(NeuronClass::overflow) == 0) {
      ++rep.samples_without_overflow;
      rep.agree_without_overflow += agree;
    }
  }
  if (rep.test_samples) {
    rep.ann_accuracy = static_cast<double>(ann_hit) / rep.test_samples;
    rep.snn_accuracy = static_cast<double>(snn_hit) / rep.test_samples;
  }
}

/// Trains, converts with ann_to_snn and simulates the SNN on the test split.
inline EndToEndReport end_to_end(const TrainConfig& cfg, const ToyDataset& data, const std::vector<std::size_t>& hidden) {
  EndToEndReport rep;
  rep.training = train(cfg, data, hidden);
  auto conv = ann_to_snn(rep.training.model);
  rep.snn = std::move(conv.model);
  rep.snn.note = "qat toy model, seed " + std::to_string(cfg.seed);
  rep.conversion_error = std::move(conv.max_error);
  compare_on_test_set(rep.training.model, rep.snn, data, rep);
  return rep;
}

inline std::string format_end_to_end(const EndToEndReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << "ann_accuracy " << r.ann_accuracy << "\n";
  os << "snn_accuracy " << r.snn_accuracy << "\n";
  os << "prediction_agreement " << r.agreement() << " (" << r.agree << "/" << r.test_samples << ")\n";
  os << "agreement_without_overflow " << r.agreement_without_overflow() << " (" << r.agree_without_overflow << "/"
     << r.samples_without_overflow << ")\n";
  os << "exact_activation_samples " << r.exact_activation_matches << "/" << r.test_samples << "\n";
  os << "max_conversion_error " << r.max_conversion_error() << "\n";
  for (std::size_t l = 0; l < r.verdicts.layers.size(); ++l) {
    const auto& c = r.verdicts.layers[l];
    os << "layer " << l << ": valid " << c.valid << ", negative " << c.negative << ", overflow " << c.overflow
       << ", mismatches " << c.mismatches << "\n";
  }
  return os.str();
}

}  // namespace rsnn
