#pragma once

// Brute-force integer oracle. Nothing here steps through time: every expected
// quantity is read off the exact pre-activation D = sum_n S_n w_n + b.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsnn/integer.hpp"
#include "rsnn/lif.hpp"
#include "rsnn/model.hpp"
#include "rsnn/spike_train.hpp"
#include "rsnn/transform.hpp"

namespace rsnn {

/// D = sum_n S_n * w_n + b, exact.
template <Accumulator A = Int>
A oracle_dot(std::span<const Int> S_in, std::span<const Int> w, Int b) {
  if (S_in.size() != w.size()) throw ShapeError("oracle_dot: length mismatch");
  A d(b);
  for (std::size_t n = 0; n < w.size(); ++n) d = checked_add(d, checked_mul(A(S_in[n]), A(w[n])));
  return d;
}

/// Bit t of D's two's-complement expansion, t < t_prime.
inline SpikeTrain oracle_stream(Int D, int t_prime) {
  if (t_prime < 1) throw RangeError("t_prime must be >= 1");
  SpikeTrain s(static_cast<std::size_t>(t_prime));
  for (int t = 0; t < t_prime; ++t) {
    const int sh = t < 63 ? t : 63;
    s.set(static_cast<std::size_t>(t), static_cast<int>((D >> sh) & 1));
  }
  return s;
}

template <Accumulator A>
SpikeTrain oracle_stream(const A& D, int t_prime) {
  if (t_prime < 1) throw RangeError("t_prime must be >= 1");
  SpikeTrain s(static_cast<std::size_t>(t_prime));
  for (int t = 0; t < t_prime; ++t) s.set(static_cast<std::size_t>(t), bit_at(D, static_cast<unsigned>(t)));
  return s;
}

enum class NeuronClass { valid, negative, overflow };

inline std::string_view to_string(NeuronClass c) {
  switch (c) {
    case NeuronClass::valid: return "valid";
    case NeuronClass::negative: return "negative";
    case NeuronClass::overflow: return "overflow";
  }
  return "valid";
}

template <Accumulator A = Int>
NeuronClass classify(const A& D, const RadixConfig& cfg) {
  if (D < A(Int{0})) return NeuronClass::negative;
  if (!(D < pow2<A>(static_cast<unsigned>(cfg.t_prime())))) return NeuronClass::overflow;
  return NeuronClass::valid;
}

/// Window value the readout should produce for a given D.
/// raw: floor(D / 2^dT) mod 2^T. rectify: 0 for D < 0. rectify_saturate: also 2^T - 1 for D >= 2^T'.
template <Accumulator A = Int>
std::uint64_t oracle_window(const A& D, const RadixConfig& cfg, ReadoutMode mode) {
  const auto cls = classify(D, cfg);
  const std::uint64_t all_ones = (std::uint64_t{1} << cfg.steps()) - 1;
  if (mode != ReadoutMode::raw && cls == NeuronClass::negative) return 0;
  if (mode == ReadoutMode::rectify_saturate && cls == NeuronClass::overflow) return all_ones;
  const A w = mod_pow2(floor_div_pow2(D, static_cast<unsigned>(cfg.delta_t())), static_cast<unsigned>(cfg.steps()));
  return static_cast<std::uint64_t>(static_cast<Int>(w));
}

template <Accumulator A = Int>
struct NeuronVerdict {
  A d_value{Int{0}};
  NeuronClass cls = NeuronClass::valid;
  bool stream_match = false;
  std::optional<bool> identity_match;  // only evaluated for the valid class
  bool final_v_match = false;
  bool window_match = false;  // out agrees with oracle_window for the readout used

  /// No simulator/oracle disagreement of any kind.
  bool consistent() const {
    return stream_match && final_v_match && window_match && (cls != NeuronClass::valid || identity_match == true);
  }
};

/// Compares one simulated neuron against the oracle.
template <Accumulator A = Int>
NeuronVerdict<A> verify_neuron(const NeuronRunResult<A>& run, std::span<const Int> S_in, std::span<const Int> w,
                               Int b, const RadixConfig& cfg, ReadoutMode readout = ReadoutMode::raw) {
  NeuronVerdict<A> v;
  v.d_value = oracle_dot<A>(S_in, w, b);
  v.cls = classify(v.d_value, cfg);
  v.stream_match = run.full_stream == oracle_stream(v.d_value, cfg.t_prime());
  v.final_v_match = run.final_v == floor_div_pow2(v.d_value, static_cast<unsigned>(cfg.t_prime()));
  v.window_match = run.out.size() == static_cast<std::size_t>(cfg.steps()) &&
                   wdt(run.out) == oracle_window(v.d_value, cfg, readout);
  if (v.cls == NeuronClass::valid) {
    // 2^dT * S_out + residue == D
    const A lhs = A(static_cast<Int>(wdt(run.out))) * pow2<A>(static_cast<unsigned>(cfg.delta_t())) +
                  A(static_cast<Int>(residue_of(run.full_stream, cfg.delta_t()).numerator));
    v.identity_match = lhs == v.d_value;
  }
  return v;
}

/// Simulator under test for one layer; swapped out in fault-injection tests.
using LayerSimulator =
    std::function<std::vector<NeuronRunResult<Int>>(std::span<const SpikeTrain>, const SnnLayer&, const RadixConfig&)>;

inline LayerSimulator default_layer_simulator() {
  return [](std::span<const SpikeTrain> in, const SnnLayer& L, const RadixConfig& cfg) {
    return simulate_layer<Int>(in, L, cfg);
  };
}

struct LayerVerdictCounts {
  std::size_t valid = 0;
  std::size_t negative = 0;
  std::size_t overflow = 0;
  std::size_t mismatches = 0;  // stream / final_v / identity / window disagreements
  std::size_t uncovered = 0;   // non-valid neurons whose readout does not clamp them
};

struct VerdictDetail {
  std::size_t sample = 0;
  std::size_t layer = 0;
  std::size_t neuron = 0;
  Int d_value = 0;
  std::string cls;
  std::string problem;
};

struct NetworkReport {
  std::size_t samples = 0;
  std::vector<LayerVerdictCounts> layers;
  std::vector<VerdictDetail> details;  // capped at max_details
  bool pass = false;

  std::size_t total_mismatches() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.mismatches;
    return n;
  }
  std::size_t total(NeuronClass c) const {
    std::size_t n = 0;
    for (const auto& l : layers)
      n += c == NeuronClass::valid ? l.valid : c == NeuronClass::negative ? l.negative : l.overflow;
    return n;
  }
};

/// Simulates every sample and checks each neuron against the oracle. Each
/// layer is verified on the inputs the simulator actually fed it.
inline NetworkReport verify_network(const SnnModel& model, std::span<const std::vector<SpikeTrain>> samples,
                                    const LayerSimulator& simulate = default_layer_simulator(),
                                    std::size_t max_details = 20) {
  NetworkReport rep;
  rep.samples = samples.size();
  rep.layers.resize(model.layers.size());
  const auto& cfg = model.cfg;
  std::vector<std::vector<std::vector<Synapse>>> lowered;
  for (const auto& L : model.layers) lowered.push_back(lower(L));

  auto note = [&](std::size_t s, std::size_t l, std::size_t m, Int d, NeuronClass c, std::string p) {
    if (rep.details.size() < max_details) rep.details.push_back({s, l, m, d, std::string(to_string(c)), std::move(p)});
  };

  for (std::size_t s = 0; s < samples.size(); ++s) {
    std::vector<SpikeTrain> current = samples[s];
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const auto& L = model.layers[l];
      const auto runs = simulate(current, L, cfg);
      if (runs.size() != L.spec.neuron_count()) throw ShapeError("simulator returned wrong neuron count");
      std::vector<Int> S(current.size());
      for (std::size_t k = 0; k < current.size(); ++k) S[k] = static_cast<Int>(wdt(current[k]));
      auto& counts = rep.layers[l];
      for (std::size_t m = 0; m < runs.size(); ++m) {
        const auto& syn = lowered[l][m];
        std::vector<Int> s_in(syn.size()), w(syn.size());
        for (std::size_t k = 0; k < syn.size(); ++k) {
          s_in[k] = S[syn[k].input];
          w[k] = syn[k].weight;
        }
        const auto v = verify_neuron(runs[m], s_in, w, L.bias_of(m), cfg, L.spec.readout);
        switch (v.cls) {
          case NeuronClass::valid: ++counts.valid; break;
          case NeuronClass::negative: ++counts.negative; break;
          case NeuronClass::overflow: ++counts.overflow; break;
        }
        if (!v.consistent()) {
          ++counts.mismatches;
          std::string p;
          if (!v.stream_match) p += "stream ";
          if (!v.final_v_match) p += "final_v ";
          if (v.identity_match == false) p += "identity ";
          if (!v.window_match) p += "window ";
          p.pop_back();
          note(s, l, m, v.d_value, v.cls, "mismatch: " + p);
        }
        const auto mode = L.spec.readout;
        const bool covered = v.cls == NeuronClass::valid ||
                             (v.cls == NeuronClass::negative && mode != ReadoutMode::raw) ||
                             (v.cls == NeuronClass::overflow && mode == ReadoutMode::rectify_saturate);
        if (!covered) {
          ++counts.uncovered;
          note(s, l, m, v.d_value, v.cls, std::string("not clamped by ") + std::string(to_string(mode)) + " readout");
        }
      }
      current.clear();
      for (const auto& r : runs) current.push_back(r.out);
    }
  }
  rep.pass = true;
  for (const auto& c : rep.layers)
    if (c.mismatches || c.uncovered) rep.pass = false;
  return rep;
}

/// Random input samples with S uniform in [0, 2^T).
inline std::vector<std::vector<SpikeTrain>> random_samples(const SnnModel& model, std::size_t count,
                                                           std::uint64_t seed) {
  if (model.layers.empty()) throw ShapeError("model has no layers");
  std::mt19937_64 rng(seed);
  const auto n = model.layers.front().spec.input_count();
  const std::uint64_t span = std::uint64_t{1} << model.cfg.steps();
  std::vector<std::vector<SpikeTrain>> out(count);
  for (auto& sample : out) {
    sample.reserve(n);
    for (std::size_t k = 0; k < n; ++k) sample.push_back(wdt_inv(rng() % span, model.cfg.steps()));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const NetworkReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "rsnn-verdicts";
  j["version"] = "1";
  j["samples"] = r.samples;
  j["pass"] = r.pass;
  auto& layers = j["layers"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    const auto& c = r.layers[i];
    layers.push_back({{"layer", i},
                      {"valid", c.valid},
                      {"negative", c.negative},
                      {"overflow", c.overflow},
                      {"mismatches", c.mismatches},
                      {"uncovered", c.uncovered}});
  }
  auto& det = j["details"] = nlohmann::ordered_json::array();
  for (const auto& d : r.details)
    det.push_back({{"sample", d.sample},
                   {"layer", d.layer},
                   {"neuron", d.neuron},
                   {"D", d.d_value},
                   {"class", d.cls},
                   {"problem", d.problem}});
  return j;
}

}  // namespace rsnn
