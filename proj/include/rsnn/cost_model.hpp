#pragma once

// Inference cost accounting. An SNN layer of N synapses per neuron and M
// neurons costs N * M additions per time step; the ANN is charged a fixed
// number of effective operations per MAC. Latency assumes equal processing
// elements, so it is a pure ratio of operation counts.

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsnn/errors.hpp"
#include "rsnn/io.hpp"
#include "rsnn/model.hpp"

namespace rsnn {

struct NamedLayer {
  std::string name;
  LayerSpec spec;
};

struct ArchDescriptor {
  std::string name;
  std::vector<NamedLayer> layers;
};

/// Effective ANN operations per MAC. Fitted from published op counts: ANN ops
/// divided by (SNN ops at T = 8) / 8 is ~66 for VGG-16, ResNet-18 and MobileNet.
inline constexpr double kAnnOpsPerMac = 66.0;

struct CostConfig {
  double ann_factor = kAnnOpsPerMac;
  bool count_t_prime = false;  // charge T + delta_T steps instead of T
  int delta_t = 0;
};

inline std::uint64_t layer_macs(const LayerSpec& spec) { return spec.macs(); }

inline std::uint64_t mac_total(const ArchDescriptor& a) {
  std::uint64_t s = 0;
  for (const auto& l : a.layers) s += layer_macs(l.spec);
  return s;
}

/// sum over layers of N * M * T.
inline std::uint64_t snn_ops(const ArchDescriptor& a, std::uint64_t steps, const CostConfig& cfg = {}) {
  const std::uint64_t horizon = cfg.count_t_prime && steps > 0 ? steps + static_cast<std::uint64_t>(cfg.delta_t) : steps;
  return mac_total(a) * horizon;
}

inline double ann_effective_ops(const ArchDescriptor& a, double factor = kAnnOpsPerMac) {
  if (!(factor > 0.0)) throw ParameterError("ANN op factor must be positive");
  return static_cast<double>(mac_total(a)) * factor;
}

inline double normalized_latency(double ops, double baseline_ops) {
  if (!(baseline_ops > 0.0)) throw ParameterError("baseline ops must be positive");
  return ops / baseline_ops;
}

namespace arch {

namespace detail {

inline NamedLayer conv(std::string name, std::size_t cin, std::size_t cout, std::size_t k, std::size_t out_hw,
                       std::size_t stride = 1, std::size_t groups = 1) {
  ConvShape c;
  c.in_channels = cin;
  c.out_channels = cout;
  c.kernel_h = c.kernel_w = k;
  c.out_h = c.out_w = out_hw;
  c.stride = stride;
  c.padding = k / 2;
  c.groups = groups;
  return {std::move(name), LayerSpec::conv2d(c)};
}

inline NamedLayer fc(std::string name, std::size_t n, std::size_t m) {
  return {std::move(name), LayerSpec::dense(n, m)};
}

}  // namespace detail

/// VGG-16 for 32x32 inputs: 13 3x3 convs (64-64-M-128-128-M-256x3-M-512x3-M-512x3-M), one 512->10 classifier.
inline ArchDescriptor vgg16() {
  using detail::conv;
  ArchDescriptor a{"vgg16", {}};
  const std::size_t cfg[][3] = {{3, 64, 32},    {64, 64, 32},   {64, 128, 16},  {128, 128, 16}, {128, 256, 8},
                                {256, 256, 8},  {256, 256, 8},  {256, 512, 4},  {512, 512, 4},  {512, 512, 4},
                                {512, 512, 2},  {512, 512, 2},  {512, 512, 2}};
  int i = 1;
  for (const auto& c : cfg) a.layers.push_back(conv("conv" + std::to_string(i++), c[0], c[1], 3, c[2]));
  a.layers.push_back(detail::fc("fc", 512, 10));
  return a;
}

/// VGG-9: 64-64-M-128-128-M-256x3-M, then 4096->1024->10.
inline ArchDescriptor vgg9() {
  using detail::conv;
  ArchDescriptor a{"vgg9", {}};
  const std::size_t cfg[][3] = {{3, 64, 32},  {64, 64, 32},  {64, 128, 16}, {128, 128, 16},
                                {128, 256, 8}, {256, 256, 8}, {256, 256, 8}};
  int i = 1;
  for (const auto& c : cfg) a.layers.push_back(conv("conv" + std::to_string(i++), c[0], c[1], 3, c[2]));
  a.layers.push_back(detail::fc("fc1", 256 * 4 * 4, 1024));
  a.layers.push_back(detail::fc("fc2", 1024, 10));
  return a;
}

/// ResNet-18 for 32x32 inputs: 3x3 stem, four stages of two basic blocks
/// (64/128/256/512 channels), 1x1 projection shortcuts on downsampling.
inline ArchDescriptor resnet18() {
  using detail::conv;
  ArchDescriptor a{"resnet18", {conv("conv1", 3, 64, 3, 32)}};
  std::size_t in = 64, hw = 32;
  const std::size_t widths[] = {64, 128, 256, 512};
  for (int s = 0; s < 4; ++s) {
    const std::size_t out = widths[s];
    for (int b = 0; b < 2; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      const std::size_t ohw = hw / stride;
      const std::string p = "layer" + std::to_string(s + 1) + "." + std::to_string(b) + ".";
      a.layers.push_back(conv(p + "conv1", in, out, 3, ohw, stride));
      a.layers.push_back(conv(p + "conv2", out, out, 3, ohw));
      if (stride != 1 || in != out) a.layers.push_back(conv(p + "shortcut", in, out, 1, ohw, stride));
      in = out;
      hw = ohw;
    }
  }
  a.layers.push_back(detail::fc("fc", 512, 10));
  return a;
}

/// ResNet-44 (6n + 2, n = 7): 16/32/64 channels, parameter-free shortcuts.
inline ArchDescriptor resnet44() {
  using detail::conv;
  ArchDescriptor a{"resnet44", {conv("conv1", 3, 16, 3, 32)}};
  std::size_t in = 16, hw = 32;
  const std::size_t widths[] = {16, 32, 64};
  for (int s = 0; s < 3; ++s) {
    for (int b = 0; b < 7; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      const std::size_t ohw = hw / stride;
      const std::string p = "stage" + std::to_string(s + 1) + "." + std::to_string(b) + ".";
      a.layers.push_back(conv(p + "conv1", in, widths[s], 3, ohw, stride));
      a.layers.push_back(conv(p + "conv2", widths[s], widths[s], 3, ohw));
      in = widths[s];
      hw = ohw;
    }
  }
  a.layers.push_back(detail::fc("fc", 64, 10));
  return a;
}

/// MobileNet (v1) for 32x32 inputs: 3x3 stem to 32 channels, 13 depthwise-separable blocks, 1024->10.
inline ArchDescriptor mobilenet() {
  using detail::conv;
  ArchDescriptor a{"mobilenet", {conv("conv1", 3, 32, 3, 32)}};
  const std::size_t cfg[][2] = {{64, 1},  {128, 2}, {128, 1}, {256, 2}, {256, 1}, {512, 2}, {512, 1},
                                {512, 1}, {512, 1}, {512, 1}, {512, 1}, {1024, 2}, {1024, 1}};
  std::size_t in = 32, hw = 32;
  int i = 1;
  for (const auto& c : cfg) {
    const std::size_t ohw = hw / c[1];
    const std::string p = "block" + std::to_string(i++) + ".";
    a.layers.push_back(conv(p + "dw", in, in, 3, ohw, c[1], in));
    a.layers.push_back(conv(p + "pw", in, c[0], 1, ohw));
    in = c[0];
    hw = ohw;
  }
  a.layers.push_back(detail::fc("fc", 1024, 10));
  return a;
}

inline std::vector<ArchDescriptor> builtins() { return {vgg16(), vgg9(), resnet18(), resnet44(), mobilenet()}; }

inline ArchDescriptor by_name(const std::string& name) {
  for (auto& a : builtins())
    if (a.name == name) return a;
  throw ParameterError("unknown architecture '" + name + "'");
}

}  // namespace arch

inline nlohmann::ordered_json to_json(const ArchDescriptor& a) {
  nlohmann::ordered_json j;
  j["name"] = a.name;
  auto& layers = j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : a.layers) {
    nlohmann::ordered_json lj;
    lj["name"] = l.name;
    lj["kind"] = std::string(to_string(l.spec.kind));
    if (l.spec.kind == LayerKind::dense) {
      lj["n_in"] = l.spec.n_in;
      lj["m_out"] = l.spec.m_out;
    } else {
      const auto& c = l.spec.conv;
      lj["in_channels"] = c.in_channels;
      lj["kernel_h"] = c.kernel_h;
      lj["kernel_w"] = c.kernel_w;
      lj["out_channels"] = c.out_channels;
      lj["out_h"] = c.out_h;
      lj["out_w"] = c.out_w;
      lj["stride"] = c.stride;
      lj["padding"] = c.padding;
      lj["groups"] = c.groups;
    }
    lj["macs"] = layer_macs(l.spec);
    layers.push_back(std::move(lj));
  }
  return j;
}

inline ArchDescriptor arch_from_json(const std::string& text) {
  const auto j = rsnn::detail::parse_document(text);
  if (!j.is_object() || !j.contains("layers") || !j.at("layers").is_array())
    throw FormatError("architecture descriptor needs a 'layers' array");
  ArchDescriptor a;
  a.name = j.value("name", std::string("custom"));
  std::size_t i = 0;
  for (const auto& lj : j.at("layers")) {
    NamedLayer l;
    l.name = lj.value("name", "layer" + std::to_string(i++));
    l.spec = rsnn::detail::read_spec(lj);
    if (l.spec.macs() == 0) throw FormatError("layer '" + l.name + "' has zero MACs");
    a.layers.push_back(std::move(l));
  }
  if (a.layers.empty()) throw FormatError("architecture descriptor has no layers");
  return a;
}

/// Operation count in units of 10^9, three significant digits: "2.51e9".
inline std::string format_ops(double ops) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3ge9", ops / 1e9);
  return buf;
}

inline std::string format_ratio(double x, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

struct CostRow {
  std::string model;
  std::string type;  // "ANN" or "SNN"
  std::uint64_t steps = 0;  // 0 for ANN
  double ops = 0.0;
  double latency = 0.0;
};

/// Operation count and normalized latency (VGG-16 ANN = 1) for each
/// architecture: an ANN row, then one SNN row per step count.
inline std::vector<CostRow> cost_rows(const std::vector<ArchDescriptor>& archs, const std::vector<std::uint64_t>& steps,
                                      const CostConfig& cfg = {}) {
  const double base = ann_effective_ops(arch::vgg16(), cfg.ann_factor);
  std::vector<CostRow> rows;
  for (const auto& a : archs) {
    const double ann = ann_effective_ops(a, cfg.ann_factor);
    rows.push_back({a.name, "ANN", 0, ann, normalized_latency(ann, base)});
    for (auto T : steps) {
      const auto ops = static_cast<double>(snn_ops(a, T, cfg));
      rows.push_back({a.name, "SNN", T, ops, normalized_latency(ops, base)});
    }
  }
  return rows;
}

struct SpeedupRow {
  std::string method;
  std::string arch;
  std::string dataset;
  std::uint64_t steps = 0;
  double ops = 0.0;
  double latency = 0.0;
  double speedup = 0.0;  // reference latency / this latency
};

/// Radix rows against long-train SNN baselines. Within each group the
/// speedup is relative to the group's reference row (speedup 1).
inline std::vector<SpeedupRow> speedup_table(const CostConfig& cfg = {}) {
  struct Entry {
    const char* method;
    const char* arch;
    const char* dataset;
    std::uint64_t steps;
    bool reference;
  };
  struct Group {
    std::vector<Entry> entries;
  };
  const std::vector<Group> groups = {
      {{{"GD-SNN", "vgg16", "CIFAR-10", 2500, false},
        {"Hybrid", "vgg16", "CIFAR-10", 100, true},
        {"Radix", "vgg16", "CIFAR-10", 8, false},
        {"Radix", "vgg16", "CIFAR-10", 4, false}}},
      {{{"SBP-SNN", "vgg9", "CIFAR-10", 100, true}, {"Radix", "vgg9", "CIFAR-10", 4, false}}},
      {{{"S-ResNet", "resnet44", "CIFAR-100", 350, true}, {"Radix", "resnet44", "CIFAR-100", 8, false}}},
  };
  const double base = ann_effective_ops(arch::vgg16(), cfg.ann_factor);
  std::vector<SpeedupRow> rows;
  for (const auto& g : groups) {
    const auto first = rows.size();
    double ref_latency = 0.0;
    for (const auto& e : g.entries) {
      const auto a = arch::by_name(e.arch);
      // Long-train baselines are counted over their own T; only radix rows take the delta_T switch.
      CostConfig c = cfg;
      if (std::string(e.method) != "Radix") c.count_t_prime = false;
      const auto ops = static_cast<double>(snn_ops(a, e.steps, c));
      SpeedupRow r{e.method, e.arch, e.dataset, e.steps, ops, normalized_latency(ops, base), 0.0};
      if (e.reference) ref_latency = r.latency;
      rows.push_back(r);
    }
    for (auto i = first; i < rows.size(); ++i) rows[i].speedup = ref_latency / rows[i].latency;
  }
  return rows;
}

inline std::string format_cost_markdown(const std::vector<CostRow>& rows) {
  std::ostringstream os;
  os << "| Model | Type | Time Steps | #Operations | Latency |\n|---|---|---|---|---|\n";
  for (const auto& r : rows)
    os << "| " << r.model << " | " << r.type << " | " << (r.steps ? std::to_string(r.steps) : "N/A") << " | "
       << format_ops(r.ops) << " | " << format_ratio(r.latency) << " |\n";
  return os.str();
}

inline std::string format_cost_csv(const std::vector<CostRow>& rows) {
  std::ostringstream os;
  os << "model,type,steps,ops,ops_1e9,latency\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.0f", r.ops);
    os << r.model << ',' << r.type << ',' << r.steps << ',' << buf << ',' << format_ops(r.ops) << ','
       << format_ratio(r.latency, 4) << '\n';
  }
  return os.str();
}

inline std::string format_speedup_markdown(const std::vector<SpeedupRow>& rows) {
  std::ostringstream os;
  os << "| Method | Architecture | Dataset | Time Steps | #Operations | Latency | Speedup |\n"
        "|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows)
    os << "| " << r.method << " | " << r.arch << " | " << r.dataset << " | " << r.steps << " | " << format_ops(r.ops)
       << " | " << format_ratio(r.latency) << " | " << format_ratio(r.speedup, r.speedup < 1 ? 2 : 1) << "X |\n";
  return os.str();
}

inline std::string format_speedup_csv(const std::vector<SpeedupRow>& rows) {
  std::ostringstream os;
  os << "method,arch,dataset,steps,ops,ops_1e9,latency,speedup\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.0f", r.ops);
    os << r.method << ',' << r.arch << ',' << r.dataset << ',' << r.steps << ',' << buf << ',' << format_ops(r.ops)
       << ',' << format_ratio(r.latency, 4) << ',' << format_ratio(r.speedup, 4) << '\n';
  }
  return os.str();
}

}  // namespace rsnn
