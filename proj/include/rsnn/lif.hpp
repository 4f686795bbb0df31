#pragma once

// Time-stepped radix LIF simulation. Each step integrates the weighted input
// spikes, fires when the least significant bit of the potential is set, drops
// the potential by V_r on a spike, and leaks by kappa = 1/2. With V_th = 0 and
// V_r = 1 the potential stays integral: u - o is always even.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsnn/errors.hpp"
#include "rsnn/integer.hpp"
#include "rsnn/model.hpp"
#include "rsnn/parallel.hpp"
#include "rsnn/spike_train.hpp"

namespace rsnn {

template <Accumulator A = Int>
struct NeuronState {
  A v{Int{0}};  // potential after the previous step
  A u{Int{0}};  // potential right after this step's integration
};

template <Accumulator A = Int>
struct StepResult {
  NeuronState<A> state;
  int fired = 0;
};

/// One LIF step: integration, firing with refractory drop, leakage.
template <Accumulator A = Int>
StepResult<A> step_neuron(const NeuronState<A>& state, const A& incoming_sum) {
  StepResult<A> r;
  r.state.u = checked_add(state.v, incoming_sum);
  A v = r.state.u;
  const int lsb = mod2(v);
  if (lsb > RadixConfig::v_th) {
    r.fired = 1;
    v = checked_sub(v, A(Int{RadixConfig::v_r}));
  }
  // v is even here, so the leak is an exact halving.
  r.state.v = v / A(Int{RadixConfig::kappa_den}) * A(Int{RadixConfig::kappa_num});
  return r;
}

template <Accumulator A = Int>
struct NeuronRunResult {
  SpikeTrain out;             // length T, after readout
  SpikeTrain full_stream;     // length T', the o(t) sequence
  SpikeTrain residue_stream;  // first delta_T elements of full_stream (empty when delta_T = 0)
  A final_v{Int{0}};          // v at t = T' - 1
};

namespace detail {

template <Accumulator A>
SpikeTrain apply_readout(const SpikeTrain& full, const A& final_v, const RadixConfig& cfg, ReadoutMode mode) {
  const auto T = static_cast<std::size_t>(cfg.steps());
  const auto dT = static_cast<std::size_t>(cfg.delta_t());
  if (mode != ReadoutMode::raw && final_v <= A(Int{-1})) return SpikeTrain(T);
  if (mode == ReadoutMode::rectify_saturate && final_v >= A(Int{1})) {
    SpikeTrain ones(T);
    for (std::size_t t = 0; t < T; ++t) ones.set(t, 1);
    return ones;
  }
  return full.slice(dT, T);
}

/// Core loop over an explicit synapse list into a shared input vector.
template <Accumulator A>
NeuronRunResult<A> run_neuron(std::span<const SpikeTrain> inputs, std::span<const Synapse> synapses, Int bias,
                              const RadixConfig& cfg, ReadoutMode readout) {
  const auto T = static_cast<std::size_t>(cfg.steps());
  const auto Tp = static_cast<std::size_t>(cfg.t_prime());
  for (const auto& s : synapses) {
    if (s.input >= inputs.size()) throw ShapeError("synapse refers to missing input " + std::to_string(s.input));
    if (inputs[s.input].size() != T)
      throw ShapeError("input train length " + std::to_string(inputs[s.input].size()) + " != T = " +
                       std::to_string(T));
  }
  NeuronRunResult<A> r;
  r.full_stream = SpikeTrain(Tp);
  NeuronState<A> st;
  st.v = A(bias);
  for (std::size_t t = 0; t < Tp; ++t) {
    A incoming(Int{0});
    if (t < T) {
      try {
        for (const auto& s : synapses)
          if (inputs[s.input][t]) incoming = checked_add(incoming, A(s.weight));
      } catch (const OverflowError&) {
        throw OverflowError("accumulator overflow during integration", -1, -1, static_cast<long>(t));
      }
    }
    try {
      auto step = step_neuron(st, incoming);
      st = step.state;
      r.full_stream.set(t, step.fired);
    } catch (const OverflowError&) {
      throw OverflowError("membrane potential overflow", -1, -1, static_cast<long>(t));
    }
  }
  r.final_v = st.v;
  if (cfg.delta_t() > 0) r.residue_stream = r.full_stream.slice(0, static_cast<std::size_t>(cfg.delta_t()));
  r.out = apply_readout(r.full_stream, r.final_v, cfg, readout);
  return r;
}

}  // namespace detail

/// Simulates one neuron over T' steps. inputs[n] is weighted by weights[n].
template <Accumulator A = Int>
NeuronRunResult<A> simulate_neuron(std::span<const SpikeTrain> inputs, std::span<const Int> weights, Int bias,
                                   const RadixConfig& cfg, ReadoutMode readout = ReadoutMode::raw) {
  if (inputs.size() != weights.size())
    throw ShapeError("got " + std::to_string(inputs.size()) + " inputs for " + std::to_string(weights.size()) +
                     " weights");
  std::vector<Synapse> syn(weights.size());
  for (std::size_t n = 0; n < weights.size(); ++n) syn[n] = {n, weights[n]};
  return detail::run_neuron<A>(inputs, syn, bias, cfg, readout);
}

/// Simulates every neuron of a layer. Conv layers are lowered per neuron.
template <Accumulator A = Int>
std::vector<NeuronRunResult<A>> simulate_layer(std::span<const SpikeTrain> inputs, const SnnLayer& layer,
                                               const RadixConfig& cfg) {
  if (inputs.size() != layer.spec.input_count())
    throw ShapeError("layer expects " + std::to_string(layer.spec.input_count()) + " inputs, got " +
                     std::to_string(inputs.size()));
  const auto T = static_cast<std::size_t>(cfg.steps());
  for (const auto& s : inputs)
    if (s.size() != T) throw ShapeError("input train length " + std::to_string(s.size()) + " != T");
  const std::size_t M = layer.spec.neuron_count();
  std::vector<NeuronRunResult<A>> out(M);
  parallel_for(M, [&](std::size_t m) {
    const auto syn = synapses_of(layer, m);
    try {
      out[m] = detail::run_neuron<A>(inputs, syn, layer.bias_of(m), cfg, layer.spec.readout);
    } catch (const OverflowError& e) {
      throw e.at_neuron(static_cast<long>(m));
    }
  });
  return out;
}

template <Accumulator A = Int>
struct NetworkRun {
  std::vector<std::vector<NeuronRunResult<A>>> layers;
  std::vector<SpikeTrain> output;  // final layer's out windows
};

/// Chains layers: layer i + 1 consumes layer i's out windows.
template <Accumulator A = Int>
NetworkRun<A> simulate_network(std::span<const SpikeTrain> inputs, const SnnModel& model) {
  if (model.layers.empty()) throw ShapeError("model has no layers");
  NetworkRun<A> run;
  std::vector<SpikeTrain> current(inputs.begin(), inputs.end());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    try {
      run.layers.push_back(simulate_layer<A>(current, model.layers[i], model.cfg));
    } catch (const OverflowError& e) {
      throw e.at_layer(static_cast<long>(i));
    }
    current.clear();
    for (const auto& r : run.layers.back()) current.push_back(r.out);
  }
  run.output = std::move(current);
  return run;
}

/// Debug dump line: the full stream with '|' after the first delta_T steps.
template <Accumulator A>
std::string dump_line(const NeuronRunResult<A>& r, const RadixConfig& cfg) {
  const std::string s = r.full_stream.str();
  return s.substr(0, static_cast<std::size_t>(cfg.delta_t())) + "|" +
         s.substr(static_cast<std::size_t>(cfg.delta_t()));
}

}  // namespace rsnn
