#pragma once

// Command-line front end. Every subcommand parses flags, calls the library
// and formats the result; run() is callable in-process from tests.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or input error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsnn/rsnn.hpp"

namespace rsnn::cli {

inline constexpr int kOk = 0;
inline constexpr int kVerifyFailed = 1;
inline constexpr int kUsage = 2;

struct Hooks {
  LayerSimulator simulate = default_layer_simulator();
};

enum class InputFormat { automatic, bits, integers };

/// One sample per non-empty line; '#' starts a comment. Tokens are either
/// T-character '0'/'1' strings in time order or integers S in [0, 2^T).
inline std::vector<std::vector<SpikeTrain>> parse_inputs(const std::string& text, int T, InputFormat fmt) {
  std::vector<std::vector<std::string>> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (!toks.empty()) lines.push_back(std::move(toks));
  }
  if (lines.empty()) throw FormatError("input file holds no samples");

  if (fmt == InputFormat::automatic) {
    bool all_bits = true;
    for (const auto& l : lines)
      for (const auto& t : l)
        if (t.size() != static_cast<std::size_t>(T) || t.find_first_not_of("01") != std::string::npos) all_bits = false;
    fmt = all_bits ? InputFormat::bits : InputFormat::integers;
  }

  std::vector<std::vector<SpikeTrain>> out;
  for (const auto& l : lines) {
    std::vector<SpikeTrain> sample;
    for (const auto& t : l) {
      if (fmt == InputFormat::bits) {
        auto s = SpikeTrain::parse(t);
        if (s.size() != static_cast<std::size_t>(T))
          throw FormatError("spike train '" + t + "' has length " + std::to_string(s.size()) + ", expected " +
                            std::to_string(T));
        sample.push_back(std::move(s));
      } else {
        std::size_t used = 0;
        long long v = 0;
        try {
          v = std::stoll(t, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != t.size()) throw FormatError("'" + t + "' is not an integer");
        sample.push_back(wdt_inv(static_cast<Int>(v), T));
      }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

namespace detail {

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
  }
}

inline std::vector<std::uint64_t> parse_range(const std::string& r) {
  const auto dots = r.find("..");
  try {
    if (dots == std::string::npos) return {std::stoull(r)};
    const auto lo = std::stoull(r.substr(0, dots)), hi = std::stoull(r.substr(dots + 2));
    if (hi < lo) throw ParameterError("empty range '" + r + "'");
    std::vector<std::uint64_t> v;
    for (auto t = lo; t <= hi; ++t) v.push_back(t);
    return v;
  } catch (const std::logic_error&) {
    throw ParameterError("bad range '" + r + "', expected N or A..B");
  }
}

/// Applies -T / --delta-t / --readout overrides, then re-validates.
inline void override_model(SnnModel& m, std::optional<int> T, std::optional<int> dT, std::optional<ReadoutMode> r) {
  if (T || dT) m.cfg = RadixConfig(T.value_or(m.cfg.steps()), dT.value_or(m.cfg.delta_t()));
  if (r)
    for (auto& L : m.layers) L.spec.readout = *r;
  const auto rep = validate_model(m);
  if (!rep.ok()) {
    std::string msg = "model failed validation:";
    for (const auto& v : rep.violations) msg += "\n  " + v;
    throw ParameterError(msg);
  }
}

template <class E>
CLI::CheckedTransformer enum_map(std::map<std::string, E>& m) {
  return CLI::CheckedTransformer(m, CLI::ignore_case);
}

}  // namespace detail

inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err, const Hooks& hooks = {}) {
  CLI::App app{"Radix-encoded spiking network toolkit", "rsnn"};
  app.require_subcommand(1);

  std::map<std::string, ReadoutMode> readouts{
      {"raw", ReadoutMode::raw}, {"rectify", ReadoutMode::rectify}, {"rectify_saturate", ReadoutMode::rectify_saturate}};
  std::map<std::string, InputFormat> input_formats{
      {"auto", InputFormat::automatic}, {"bits", InputFormat::bits}, {"int", InputFormat::integers}};

  std::string model_path, inputs_path, out_path;
  std::optional<int> steps, delta_t;
  std::optional<ReadoutMode> readout;
  InputFormat input_format = InputFormat::automatic;

  auto add_cfg = [&](CLI::App* s) {
    s->add_option("-T,--steps", steps, "override T")->check(CLI::Range(1, RadixConfig::max_t_prime));
    s->add_option("--delta-t", delta_t, "override delta_T")->check(CLI::Range(0, RadixConfig::max_t_prime));
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a model on input spike trains");
  bool dump = false;
  std::string sim_format;
  sim->add_option("--model", model_path, "interchange model file")->required();
  sim->add_option("--inputs", inputs_path, "input trains, one sample per line")->required();
  sim->add_option("--input-format", input_format, "auto|bits|int")->transform(detail::enum_map(input_formats));
  sim->add_option("--readout", readout, "override readout of every layer")->transform(detail::enum_map(readouts));
  sim->add_flag("--dump", dump, "print every neuron's full stream");
  sim->add_option("--format", sim_format, "bits|int")->check(CLI::IsMember({"bits", "int"}))->default_val("bits");
  sim->add_option("--out", out_path, "output file (default stdout)");
  add_cfg(sim);

  // convert
  auto* conv = app.add_subcommand("convert", "quantize real-valued parameters into an interchange model");
  conv->add_option("--model", model_path, "real-valued parameter file")->required();
  conv->add_option("--readout", readout, "override readout of every layer")->transform(detail::enum_map(readouts));
  conv->add_option("--out", out_path, "output file (default stdout)");
  add_cfg(conv);

  // verify
  auto* ver = app.add_subcommand("verify", "check the simulator against the integer oracle");
  std::string ver_format;
  std::size_t ver_samples = 0;
  std::uint64_t ver_seed = 0;
  ver->add_option("--model", model_path, "interchange model file")->required();
  ver->add_option("--inputs", inputs_path, "input trains; random samples when omitted");
  ver->add_option("--input-format", input_format, "auto|bits|int")->transform(detail::enum_map(input_formats));
  ver->add_option("--samples", ver_samples, "random samples when --inputs is omitted")->default_val(100);
  ver->add_option("--seed", ver_seed, "seed for random samples")->default_val(0);
  ver->add_option("--readout", readout, "override readout of every layer")->transform(detail::enum_map(readouts));
  ver->add_option("--format", ver_format, "text|json")->check(CLI::IsMember({"text", "json"}))->default_val("text");
  ver->add_option("--out", out_path, "output file (default stdout)");
  add_cfg(ver);

  // rmse
  auto* rm = app.add_subcommand("rmse", "radix vs rate encoding error table");
  std::string t_range = "2..16";
  int rm_delta_t = 8;
  std::string rm_format;
  std::size_t rm_samples = 0;
  std::uint64_t rm_seed = 0;
  rm->add_option("--t", t_range, "T or range A..B")->capture_default_str();
  rm->add_option("--delta-t", rm_delta_t, "delta_T used for the residue")->capture_default_str()->check(CLI::NonNegativeNumber);
  rm->add_option("--samples", rm_samples, "uniform targets per row")->default_val(100000);
  rm->add_option("--seed", rm_seed, "sampler seed")->default_val(0);
  rm->add_option("--format", rm_format, "csv|gnuplot|markdown")->check(CLI::IsMember({"csv", "gnuplot", "markdown"}))->default_val("csv");
  rm->add_option("--out", out_path, "output file (default stdout)");

  // cost
  auto* co = app.add_subcommand("cost", "operation counts and normalized latency");
  std::vector<std::string> arch_names;
  std::vector<std::string> arch_files;
  std::string step_list = "8", table = "ops";
  bool count_t_prime = false;
  int cost_delta_t = 0;
  std::string co_format;
  co->add_option("--arch", arch_names, "built-in architecture name(s), or 'all'");
  co->add_option("--arch-file", arch_files, "architecture descriptor JSON file(s)");
  co->add_option("--steps,-T", step_list, "T or range A..B for SNN rows")->capture_default_str();
  co->add_option("--table", table, "ops|speedup")->check(CLI::IsMember({"ops", "speedup"}))->capture_default_str();
  co->add_flag("--count-t-prime", count_t_prime, "charge T + delta_T steps to radix rows");
  co->add_option("--delta-t", cost_delta_t, "delta_T for --count-t-prime")->check(CLI::NonNegativeNumber);
  co->add_option("--format", co_format, "markdown|csv")->check(CLI::IsMember({"markdown", "csv"}))->default_val("markdown");
  co->add_option("--out", out_path, "output file (default stdout)");

  // train-toy
  auto* tt = app.add_subcommand("train-toy", "train a toy network, convert it and compare SNN with ANN");
  TrainConfig tc;
  BlobParams bp;
  std::vector<std::size_t> hidden{16};
  std::string metrics_path, ann_path, idx_images, idx_labels;
  std::size_t idx_train = 0;
  tt->add_option("--out", out_path, "interchange model output (default: not written)");
  tt->add_option("--metrics", metrics_path, "per-epoch metrics CSV");
  tt->add_option("--ann", ann_path, "real-valued parameter file of the trained network");
  tt->add_option("--seed", tc.seed, "seed for data, init and shuffling")->capture_default_str();
  tt->add_option("--epochs", tc.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
  tt->add_option("--lr", tc.lr)->capture_default_str()->check(CLI::PositiveNumber);
  tt->add_option("--batch", tc.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  tt->add_option("--hidden", hidden, "hidden layer widths")->capture_default_str();
  tt->add_option("-T,--steps", tc.steps)->capture_default_str()->check(CLI::Range(1, RadixConfig::max_t_prime));
  tt->add_option("--delta-t", tc.delta_t)->capture_default_str()->check(CLI::Range(0, RadixConfig::max_t_prime));
  tt->add_option("--weight-bits", tc.weight_bits)->capture_default_str()->check(CLI::Range(2, 32));
  tt->add_option("--classes", bp.classes)->capture_default_str();
  tt->add_option("--features", bp.features)->capture_default_str();
  tt->add_option("--idx-images", idx_images, "IDX image file instead of blobs");
  tt->add_option("--idx-labels", idx_labels, "IDX label file");
  tt->add_option("--idx-train", idx_train, "leading IDX items used for training");
  tt->add_flag("--float", [&](std::int64_t) { tc.quantize = false; }, "train the full-precision reference instead");

  try {
    std::vector<std::string> args(argv.rbegin(), argv.rend());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (sim->parsed()) {
      auto m = load_model(model_path);
      detail::override_model(m, steps, delta_t, readout);
      const auto samples_in = parse_inputs(rsnn::detail::read_file(inputs_path), m.cfg.steps(), input_format);
      std::ostringstream os;
      for (std::size_t s = 0; s < samples_in.size(); ++s) {
        const auto r = simulate_network<Int>(samples_in[s], m);
        if (dump) {
          for (std::size_t l = 0; l < r.layers.size(); ++l)
            for (std::size_t n = 0; n < r.layers[l].size(); ++n)
              os << "# sample " << s << " layer " << l << " neuron " << n << " " << dump_line(r.layers[l][n], m.cfg)
                 << " v=" << r.layers[l][n].final_v << "\n";
        }
        for (std::size_t n = 0; n < r.output.size(); ++n) {
          if (n) os << ' ';
          if (sim_format == "int") os << wdt(r.output[n]);
          else os << r.output[n].str();
        }
        os << "\n";
      }
      detail::emit(os.str(), out_path, out);
      return kOk;
    }

    if (conv->parsed()) {
      auto a = fold_batchnorm(load_ann(model_path));
      if (steps || delta_t) a.cfg = RadixConfig(steps.value_or(a.cfg.steps()), delta_t.value_or(a.cfg.delta_t()));
      if (readout)
        for (auto& L : a.layers) L.spec.readout = *readout;
      const auto res = ann_to_snn(a);
      const auto rep = validate_model(res.model);
      if (!rep.ok()) {
        std::string msg = "converted model failed validation:";
        for (const auto& v : rep.violations) msg += "\n  " + v;
        throw ParameterError(msg);
      }
      detail::emit(to_interchange(res.model), out_path, out);
      std::ostream& log = out_path.empty() || out_path == "-" ? err : out;
      for (std::size_t l = 0; l < res.max_error.size(); ++l)
        log << "layer " << l << " max quantization error " << res.max_error[l] << "\n";
      return kOk;
    }

    if (ver->parsed()) {
      auto m = load_model(model_path);
      detail::override_model(m, steps, delta_t, readout);
      const auto in = inputs_path.empty() ? random_samples(m, ver_samples, ver_seed)
                                          : parse_inputs(rsnn::detail::read_file(inputs_path), m.cfg.steps(), input_format);
      const auto rep = verify_network(m, in, hooks.simulate);
      std::ostringstream os;
      if (ver_format == "json") {
        os << to_json(rep).dump(2) << "\n";
      } else {
        os << (rep.pass ? "PASS" : "FAIL") << ": " << rep.samples << " sample(s), " << rep.total_mismatches()
           << " mismatch(es)\n";
        for (std::size_t l = 0; l < rep.layers.size(); ++l) {
          const auto& c = rep.layers[l];
          os << "layer " << l << ": valid " << c.valid << ", negative " << c.negative << ", overflow " << c.overflow
             << ", mismatches " << c.mismatches << ", unclamped " << c.uncovered << "\n";
        }
        for (const auto& d : rep.details)
          os << "  sample " << d.sample << " layer " << d.layer << " neuron " << d.neuron << " D=" << d.d_value << " ("
             << d.cls << "): " << d.problem << "\n";
      }
      detail::emit(os.str(), out_path, out);
      return rep.pass ? kOk : kVerifyFailed;
    }

    if (rm->parsed()) {
      const auto ts = detail::parse_range(t_range);
      const auto rows = compare_table(static_cast<int>(ts.front()), static_cast<int>(ts.back()), rm_delta_t, rm_samples, rm_seed);
      const std::string text = rm_format == "gnuplot"    ? format_compare_gnuplot(rows)
                               : rm_format == "markdown" ? format_compare_markdown(rows)
                                                      : format_compare_csv(rows);
      detail::emit(text, out_path, out);
      return kOk;
    }

    if (co->parsed()) {
      CostConfig cc;
      cc.count_t_prime = count_t_prime;
      cc.delta_t = cost_delta_t;
      std::string text;
      if (table == "speedup") {
        const auto rows = speedup_table(cc);
        text = co_format == "csv" ? format_speedup_csv(rows) : format_speedup_markdown(rows);
      } else {
        std::vector<ArchDescriptor> archs;
        const bool all = arch_names.empty() && arch_files.empty();
        for (const auto& n : arch_names) {
          if (n == "all") {
            for (auto& a : arch::builtins()) archs.push_back(a);
          } else {
            archs.push_back(arch::by_name(n));
          }
        }
        for (const auto& f : arch_files) archs.push_back(arch_from_json(rsnn::detail::read_file(f)));
        if (all) archs = arch::builtins();
        const auto rows = cost_rows(archs, detail::parse_range(step_list), cc);
        text = co_format == "csv" ? format_cost_csv(rows) : format_cost_markdown(rows);
      }
      detail::emit(text, out_path, out);
      return kOk;
    }

    if (tt->parsed()) {
      if (idx_images.empty() != idx_labels.empty()) throw ParameterError("--idx-images and --idx-labels go together");
      bp.seed = tc.seed;
      const auto data = idx_images.empty() ? make_blobs(bp) : load_idx(idx_images, idx_labels, idx_train);
      if (!tc.quantize) {
        const auto r = train(tc, data, hidden);
        if (!metrics_path.empty()) detail::emit(format_metrics_csv(r.history), metrics_path, out);
        out << "float_test_accuracy " << (r.history.empty() ? 0.0 : r.history.back().test_accuracy) << "\n";
        return kOk;
      }
      const auto rep = end_to_end(tc, data, hidden);
      if (!out_path.empty()) detail::emit(to_interchange(rep.snn), out_path, out);
      if (!ann_path.empty()) detail::emit(to_ann_document(rep.training.model), ann_path, out);
      if (!metrics_path.empty()) detail::emit(format_metrics_csv(rep.training.history), metrics_path, out);
      out << format_end_to_end(rep);
      return kOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace rsnn::cli
