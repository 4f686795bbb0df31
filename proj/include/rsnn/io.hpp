#pragma once

// Interchange format (.rsnn.json). Integers are written as decimal tokens,
// arrays row-major, layers in forward order. The writer is hand-rolled so the
// byte layout is stable; the reader goes through nlohmann::json.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsnn/errors.hpp"
#include "rsnn/model.hpp"

namespace rsnn {

inline constexpr const char* kModelFormat = "rsnn";
inline constexpr const char* kAnnFormat = "rsnn-ann";
inline constexpr const char* kFormatVersion = "1";

namespace detail {

template <class T, class F>
void write_array(std::ostream& os, const std::vector<T>& v, F&& fmt) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    fmt(os, v[i]);
  }
  os << ']';
}

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string format_real(double x) {
  if (!std::isfinite(x)) throw FormatError("non-finite real value cannot be serialized");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s = buf;
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline void write_spec(std::ostream& os, const LayerSpec& s) {
  os << "\"kind\": \"" << to_string(s.kind) << "\", ";
  if (s.kind == LayerKind::dense) {
    os << "\"n_in\": " << s.n_in << ", \"m_out\": " << s.m_out << ", ";
  } else {
    const auto& c = s.conv;
    os << "\"in_channels\": " << c.in_channels << ", \"kernel_h\": " << c.kernel_h
       << ", \"kernel_w\": " << c.kernel_w << ", \"out_channels\": " << c.out_channels
       << ", \"out_h\": " << c.out_h << ", \"out_w\": " << c.out_w << ", \"stride\": " << c.stride
       << ", \"padding\": " << c.padding << ", \"groups\": " << c.groups << ", ";
  }
  os << "\"readout\": \"" << to_string(s.readout) << "\"";
}

inline std::size_t get_size(const nlohmann::json& j, const char* key, std::size_t dflt, bool required) {
  if (!j.contains(key)) {
    if (required) throw FormatError(std::string("missing field '") + key + "'");
    return dflt;
  }
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw FormatError(std::string("field '") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

inline int get_int(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw FormatError(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

inline LayerSpec read_spec(const nlohmann::json& j) {
  if (!j.contains("kind") || !j.at("kind").is_string()) throw FormatError("layer without 'kind'");
  LayerSpec s;
  s.kind = parse_layer_kind(j.at("kind").get<std::string>());
  if (s.kind == LayerKind::dense) {
    s.n_in = get_size(j, "n_in", 0, true);
    s.m_out = get_size(j, "m_out", 0, true);
  } else {
    auto& c = s.conv;
    c.in_channels = get_size(j, "in_channels", 0, true);
    c.kernel_h = get_size(j, "kernel_h", 0, true);
    c.kernel_w = get_size(j, "kernel_w", 0, true);
    c.out_channels = get_size(j, "out_channels", 0, true);
    c.out_h = get_size(j, "out_h", 0, true);
    c.out_w = get_size(j, "out_w", 0, true);
    c.stride = get_size(j, "stride", 1, false);
    c.padding = get_size(j, "padding", 0, false);
    c.groups = get_size(j, "groups", 1, false);
  }
  s.readout = j.contains("readout") ? parse_readout(j.at("readout").get<std::string>()) : ReadoutMode::raw;
  return s;
}

inline std::vector<Int> read_int_array(const nlohmann::json& j, const char* key, std::size_t layer) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw FormatError("layer " + std::to_string(layer) + ": missing array '" + key + "'");
  std::vector<Int> out;
  out.reserve(j.at(key).size());
  std::size_t i = 0;
  for (const auto& e : j.at(key)) {
    if (!e.is_number_integer() || (e.is_number_unsigned() && e.get<std::uint64_t>() > INT64_MAX))
      throw FormatError("layer " + std::to_string(layer) + ": " + key + "[" + std::to_string(i) +
                        "] is not an integer: " + e.dump());
    out.push_back(e.get<Int>());
    ++i;
  }
  return out;
}

inline std::vector<double> read_real_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw FormatError(std::string("missing array '") + key + "'");
  std::vector<double> out;
  for (const auto& e : j.at(key)) {
    if (!e.is_number()) throw FormatError(std::string(key) + " entry is not a number: " + e.dump());
    out.push_back(e.get<double>());
  }
  return out;
}

inline nlohmann::json parse_document(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed interchange file: ") + e.what());
  }
}

inline void check_header(const nlohmann::json& j, const char* format) {
  if (!j.is_object()) throw FormatError("interchange document must be an object");
  if (!j.contains("format") || j.at("format") != format)
    throw FormatError(std::string("expected format '") + format + "'");
  if (!j.contains("version")) throw FormatError("missing version");
  const auto& v = j.at("version");
  const std::string ver = v.is_string() ? v.get<std::string>() : v.dump();
  if (ver != kFormatVersion) throw FormatError("unsupported version '" + ver + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace detail

inline std::string to_interchange(const SnnModel& m) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"format\": \"" << kModelFormat << "\",\n";
  os << "  \"version\": \"" << kFormatVersion << "\",\n";
  os << "  \"T\": " << m.cfg.steps() << ",\n";
  os << "  \"delta_T\": " << m.cfg.delta_t() << ",\n";
  os << "  \"weight_bits\": " << m.weight_bits << ",\n";
  if (m.bias_bits) os << "  \"bias_bits\": " << *m.bias_bits << ",\n";
  if (!m.note.empty()) os << "  \"note\": " << detail::json_string(m.note) << ",\n";
  os << "  \"layers\": [";
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& L = m.layers[i];
    os << (i ? ",\n" : "\n") << "    {";
    detail::write_spec(os, L.spec);
    os << ",\n     \"weights\": ";
    detail::write_array(os, L.weights, [](std::ostream& o, Int v) { o << v; });
    os << ",\n     \"biases\": ";
    detail::write_array(os, L.biases, [](std::ostream& o, Int v) { o << v; });
    os << "}";
  }
  os << "\n  ]\n}\n";
  return os.str();
}

/// Parses an interchange document. Structural problems throw FormatError;
/// invariant violations are left to validate_model.
inline SnnModel from_interchange(const std::string& text) {
  const auto j = detail::parse_document(text);
  detail::check_header(j, kModelFormat);
  SnnModel m;
  try {
    m.cfg = RadixConfig(detail::get_int(j, "T"), detail::get_int(j, "delta_T"));
  } catch (const ParameterError& e) {
    throw FormatError(e.what());
  }
  m.weight_bits = j.contains("weight_bits") ? detail::get_int(j, "weight_bits") : 8;
  if (j.contains("bias_bits")) m.bias_bits = detail::get_int(j, "bias_bits");
  if (j.contains("note")) m.note = j.at("note").get<std::string>();
  if (!j.contains("layers") || !j.at("layers").is_array()) throw FormatError("missing 'layers' array");
  std::size_t i = 0;
  for (const auto& lj : j.at("layers")) {
    SnnLayer L;
    L.spec = detail::read_spec(lj);
    L.weights = detail::read_int_array(lj, "weights", i);
    L.biases = detail::read_int_array(lj, "biases", i);
    m.layers.push_back(std::move(L));
    ++i;
  }
  return m;
}

inline void save_model(const SnnModel& m, const std::string& path) {
  detail::write_file(path, to_interchange(m));
}

inline SnnModel load_model(const std::string& path) { return from_interchange(detail::read_file(path)); }

/// Real-valued parameter file consumed by the `convert` command. Same layout
/// as the interchange format with real weights and optional batch-norm blocks.
inline std::string to_ann_document(const AnnModel& a) {
  std::ostringstream os;
  auto real = [](std::ostream& o, double v) { o << detail::format_real(v); };
  os << "{\n";
  os << "  \"format\": \"" << kAnnFormat << "\",\n";
  os << "  \"version\": \"" << kFormatVersion << "\",\n";
  os << "  \"T\": " << a.cfg.steps() << ",\n";
  os << "  \"delta_T\": " << a.cfg.delta_t() << ",\n";
  os << "  \"weight_bits\": " << a.weight_bits << ",\n";
  if (a.bias_bits) os << "  \"bias_bits\": " << *a.bias_bits << ",\n";
  os << "  \"layers\": [";
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& L = a.layers[i];
    os << (i ? ",\n" : "\n") << "    {";
    detail::write_spec(os, L.spec);
    os << ",\n     \"weights\": ";
    detail::write_array(os, L.weights, real);
    os << ",\n     \"biases\": ";
    detail::write_array(os, L.biases, real);
    if (L.batchnorm) {
      const auto& bn = *L.batchnorm;
      os << ",\n     \"batchnorm\": {\"gamma\": ";
      detail::write_array(os, bn.gamma, real);
      os << ", \"beta\": ";
      detail::write_array(os, bn.beta, real);
      os << ", \"mean\": ";
      detail::write_array(os, bn.mean, real);
      os << ", \"var\": ";
      detail::write_array(os, bn.var, real);
      os << ", \"eps\": " << detail::format_real(bn.eps) << "}";
    }
    os << "}";
  }
  os << "\n  ]\n}\n";
  return os.str();
}

inline AnnModel from_ann_document(const std::string& text) {
  const auto j = detail::parse_document(text);
  detail::check_header(j, kAnnFormat);
  AnnModel a;
  try {
    a.cfg = RadixConfig(detail::get_int(j, "T"), detail::get_int(j, "delta_T"));
  } catch (const ParameterError& e) {
    throw FormatError(e.what());
  }
  a.weight_bits = j.contains("weight_bits") ? detail::get_int(j, "weight_bits") : 8;
  if (j.contains("bias_bits")) a.bias_bits = detail::get_int(j, "bias_bits");
  if (!j.contains("layers") || !j.at("layers").is_array()) throw FormatError("missing 'layers' array");
  for (const auto& lj : j.at("layers")) {
    AnnLayer L;
    L.spec = detail::read_spec(lj);
    L.weights = detail::read_real_array(lj, "weights");
    L.biases = detail::read_real_array(lj, "biases");
    if (lj.contains("batchnorm")) {
      const auto& b = lj.at("batchnorm");
      BatchNormParams bn;
      bn.gamma = detail::read_real_array(b, "gamma");
      bn.beta = detail::read_real_array(b, "beta");
      bn.mean = detail::read_real_array(b, "mean");
      bn.var = detail::read_real_array(b, "var");
      if (b.contains("eps")) bn.eps = b.at("eps").get<double>();
      L.batchnorm = std::move(bn);
    }
    a.layers.push_back(std::move(L));
  }
  return a;
}

inline void save_ann(const AnnModel& a, const std::string& path) { detail::write_file(path, to_ann_document(a)); }

inline AnnModel load_ann(const std::string& path) { return from_ann_document(detail::read_file(path)); }

}  // namespace rsnn
