#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace rsnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A value lies outside the domain of an encoding (e.g. S >= 2^T).
class RangeError : public Error {
public:
  using Error::Error;
};

/// An integer parameter does not fit its declared bit width.
class WidthError : public Error {
public:
  using Error::Error;
};

/// Shapes or lengths that must agree do not.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Malformed, wrong-version or non-integer interchange content.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Invalid numeric parameter (negative variance, zero steps, ...).
class ParameterError : public Error {
public:
  using Error::Error;
};

/// Fixed-width accumulator overflow. Coordinates are -1 when unknown.
class OverflowError : public Error {
public:
  explicit OverflowError(std::string what, long layer = -1, long neuron = -1, long time = -1)
      : Error(describe(what, layer, neuron, time)),
        base_(std::move(what)),
        layer_(layer),
        neuron_(neuron),
        time_(time) {}

  long layer() const noexcept { return layer_; }
  long neuron() const noexcept { return neuron_; }
  long time() const noexcept { return time_; }

  /// Same error with the layer coordinate filled in.
  OverflowError at_layer(long layer) const { return OverflowError(base_, layer, neuron_, time_); }

  /// Same error with the neuron coordinate filled in.
  OverflowError at_neuron(long neuron) const { return OverflowError(base_, layer_, neuron, time_); }

private:
  static std::string describe(const std::string& what, long layer, long neuron, long time) {
    std::string s = what;
    if (layer >= 0 || neuron >= 0 || time >= 0) {
      s += " (layer " + std::to_string(layer) + ", neuron " + std::to_string(neuron) + ", t " +
           std::to_string(time) + ")";
    }
    return s;
  }

  std::string base_;
  long layer_;
  long neuron_;
  long time_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
  using Error::Error;
};

}  // namespace rsnn
