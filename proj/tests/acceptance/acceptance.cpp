// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rsnn/rsnn.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace rsnn;
namespace rt = rsnn::testing;

namespace {

// Tolerances and budgets.
constexpr std::size_t kOracleInstances = 10000;
constexpr double kOracleBudgetS = 30.0;
constexpr std::size_t kConvergenceStarts = 10000;
constexpr Int kConvergenceRange = Int{1} << 20;
constexpr double kConvergenceBudgetS = 10.0;
constexpr double kOpsTolerance = 0.03;
constexpr double kCostBudgetS = 1.0;
constexpr double kLatencyVggSnnTol = 0.01;
constexpr double kLatencyResnetAnnTol = 0.05;
constexpr double kGdSnnLatencyTol = 1.0;
constexpr double kSpeedupTolerance = 0.05;
constexpr std::size_t kEncodingSamples = 100000;
constexpr std::uint64_t kEncodingSeed = 7;
constexpr int kEncodingDeltaT = 8;
constexpr double kHalvingLo = 1.8, kHalvingHi = 2.2;
constexpr double kMinReductionAt8 = 0.90;
constexpr double kEncodingBudgetS = 30.0;
constexpr double kMinToyAccuracy = 0.90;
constexpr double kMinFloatAccuracy = 0.95;
constexpr double kMinAgreement = 0.999;
constexpr double kEndToEndBudgetS = 300.0;
constexpr std::size_t kGradPoints = 100;
constexpr std::uint64_t kGradSeed = 2024;
constexpr double kGradTolerance = 1e-4;

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("%s %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(double got, double want, double rel) { return std::fabs(got - want) <= rel * std::fabs(want); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::size_t stream_ok = 0, final_ok = 0, valid = 0, identity_ok = 0, residue_lt_one = 0;
  std::size_t classes[3] = {0, 0, 0};
  for (std::size_t i = 0; i < kOracleInstances; ++i) {
    const auto in = rt::random_instance(rng);
    const auto r = simulate_neuron<Int>(in.trains, in.w, in.b, in.cfg);
    const auto D = rt::ref_dot(in.S, in.w, in.b);
    const int tp = in.cfg.t_prime();
    const bool s_ok = rt::bits_of(r.full_stream) == rt::ref_stream(D, tp) &&
                      r.full_stream == oracle_stream(static_cast<Int>(D), tp);
    stream_ok += s_ok;
    final_ok += static_cast<rt::i128>(r.final_v) == rt::ref_final_v(D, tp);
    const auto res = residue_of(r.full_stream, in.cfg.delta_t());
    residue_lt_one += res.value() < 1.0;
    const auto cls = classify(static_cast<Int>(D), in.cfg);
    ++classes[static_cast<int>(cls)];
    if (cls == NeuronClass::valid) {
      ++valid;
      const rt::i128 lhs = static_cast<rt::i128>(wdt(r.out)) * rt::ipow2(in.cfg.delta_t()) + res.numerator;
      identity_ok += lhs == D;
    }
  }
  const double s = seconds_since(t0);
  report("A1", stream_ok == kOracleInstances && final_ok == kOracleInstances && s < kOracleBudgetS,
         fmt("stream %zu/%zu, final_v %zu/%zu (valid %zu, negative %zu, overflow %zu), %.2f s", stream_ok,
             kOracleInstances, final_ok, kOracleInstances, classes[0], classes[1], classes[2], s));
  report("A2", valid > 0 && identity_ok == valid && residue_lt_one == kOracleInstances,
         fmt("identity %zu/%zu valid instances, residue < 1 in %zu/%zu", identity_ok, valid, residue_lt_one,
             kOracleInstances));
}

void convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Int> dist(-kConvergenceRange, kConvergenceRange);
  std::size_t converged = 0, sign_kept = 0, worst_steps = 0;
  for (std::size_t i = 0; i < kConvergenceStarts; ++i) {
    const Int v0 = dist(rng);
    const auto bound = static_cast<std::size_t>(std::ceil(std::log2(std::fabs(static_cast<double>(v0)) + 1.0))) + 1;
    NeuronState<Int> st{v0, 0};
    bool reached = false, stays = true, sign_ok = true;
    std::size_t first = 0;
    for (std::size_t t = 0; t < bound + 16; ++t) {
      const auto next = step_neuron(st, Int{0}).state;
      if ((st.v >= 0) != (next.v >= 0)) sign_ok = false;
      st = next;
      const bool fixed = st.v == 0 || st.v == -1;
      if (fixed && !reached) {
        reached = true;
        first = t + 1;
      } else if (reached && !fixed) {
        stays = false;
      }
    }
    if (v0 == 0 || v0 == -1) first = 0;
    worst_steps = std::max(worst_steps, first);
    converged += reached && stays && first <= bound;
    sign_kept += sign_ok;
  }
  const double s = seconds_since(t0);
  report("A3", converged == kConvergenceStarts && sign_kept == kConvergenceStarts && s < kConvergenceBudgetS,
         fmt("converged within bound %zu/%zu, sign kept %zu/%zu, longest %zu steps, %.2f s", converged,
             kConvergenceStarts, sign_kept, kConvergenceStarts, worst_steps, s));
}

void op_counts() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Want {
    const char* arch;
    double snn;
    double ann;
  };
  const Want want[] = {{"vgg16", 2.51e9, 20.7e9}, {"resnet18", 4.44e9, 36.7e9}, {"mobilenet", 0.37e9, 3.07e9}};
  bool ok = true;
  std::string d;
  for (const auto& w : want) {
    const auto a = arch::by_name(w.arch);
    const auto snn = static_cast<double>(snn_ops(a, 8));
    const auto ann = ann_effective_ops(a);
    ok = ok && within(snn, w.snn, kOpsTolerance) && within(ann, w.ann, kOpsTolerance);
    d += fmt("%s snn %.3g (%.3g) ann %.3g (%.3g); ", w.arch, snn, w.snn, ann, w.ann);
  }
  const double s = seconds_since(t0);
  report("A4", ok && s < kCostBudgetS, d + fmt("%.3f s", s));
}

void latencies() {
  const auto t0 = std::chrono::steady_clock::now();
  const double base = ann_effective_ops(arch::vgg16());
  const double vgg_snn = normalized_latency(static_cast<double>(snn_ops(arch::vgg16(), 8)), base);
  const double resnet_ann = normalized_latency(ann_effective_ops(arch::resnet18()), base);
  const auto rows = speedup_table();
  auto find = [&](const std::string& method, const std::string& a, std::uint64_t steps) {
    for (const auto& r : rows)
      if (r.method == method && r.arch == a && r.steps == steps) return r;
    return SpeedupRow{};
  };
  const auto gd = find("GD-SNN", "vgg16", 2500);
  const auto r8 = find("Radix", "vgg16", 8), r4 = find("Radix", "vgg16", 4), r44 = find("Radix", "resnet44", 8);
  const bool ok = std::fabs(vgg_snn - 0.12) <= kLatencyVggSnnTol && std::fabs(resnet_ann - 1.77) <= kLatencyResnetAnnTol &&
                  within(gd.ops, 783e9, kOpsTolerance) && std::fabs(gd.latency - 37.8) <= kGdSnnLatencyTol &&
                  within(r8.speedup, 12.5, kSpeedupTolerance) && within(r4.speedup, 25.0, kSpeedupTolerance) &&
                  within(r44.speedup, 43.8, kSpeedupTolerance);
  const double s = seconds_since(t0);
  report("A5", ok && s < kCostBudgetS,
         fmt("latency vgg16 T=8 %.3f, resnet18 ANN %.3f, GD-SNN ops %.4g latency %.2f, speedups %.2fx %.2fx %.2fx, "
             "%.3f s",
             vgg_snn, resnet_ann, gd.ops, gd.latency, r8.speedup, r4.speedup, r44.speedup, s));
}

void encoding() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = compare_table(2, 16, kEncodingDeltaT, kEncodingSamples, kEncodingSeed);
  bool below = true, halving = true;
  double worst_below = 0.0, lo = 1e9, hi = 0.0, reduction8 = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    below = below && rows[i].radix.rmse < rows[i].rate.rmse;
    worst_below = std::max(worst_below, rows[i].ratio());
    if (i + 1 < rows.size()) {
      const double f = rows[i].radix.rmse / rows[i + 1].radix.rmse;
      lo = std::min(lo, f);
      hi = std::max(hi, f);
      halving = halving && f >= kHalvingLo && f <= kHalvingHi;
    }
    if (rows[i].steps == 8) reduction8 = 1.0 - rows[i].ratio();
  }
  const double s = seconds_since(t0);
  report("A6", below && halving && reduction8 >= kMinReductionAt8 && s < kEncodingBudgetS,
         fmt("max radix/rate %.4f, per-step factor [%.3f, %.3f], reduction at T=8 %.1f%%, %.2f s", worst_below, lo, hi,
             100.0 * reduction8, s));
}

void end_to_end_path() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = make_blobs(BlobParams{});
  TrainConfig fcfg;
  fcfg.quantize = false;
  const double float_acc = train(fcfg, data, {16}).history.back().test_accuracy;
  const auto rep = end_to_end(TrainConfig{}, data, {16});
  const double s = seconds_since(t0);
  const bool ok = float_acc >= kMinFloatAccuracy && rep.ann_accuracy >= kMinToyAccuracy &&
                  rep.agreement() >= kMinAgreement && rep.agree_without_overflow == rep.samples_without_overflow &&
                  rep.max_conversion_error() == 0.0 && s < kEndToEndBudgetS;
  report("A7", ok,
         fmt("float baseline %.3f, quantized ANN %.3f, SNN %.3f, agreement %zu/%zu, without overflow %zu/%zu, "
             "conversion error %g, %.2f s",
             float_acc, rep.ann_accuracy, rep.snn_accuracy, rep.agree, rep.test_samples, rep.agree_without_overflow,
             rep.samples_without_overflow, rep.max_conversion_error(), s));
}

void gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = rt::gradient_check(kGradPoints, kGradSeed);
  const double s = seconds_since(t0);
  report("A8", res.points.size() == kGradPoints && res.worst() < kGradTolerance,
         fmt("%zu points, worst relative error %.3g (%zu boundary draws skipped), %.2f s", res.points.size(),
             res.worst(), res.rejected, s));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> checks{
      {"A1 A2", oracle_equivalence}, {"A3", convergence},     {"A4", op_counts}, {"A5", latencies},
      {"A6", encoding},              {"A7", end_to_end_path}, {"A8", gradients}};
  for (const auto& [ids, run] : checks) {
    try {
      run();
    } catch (const std::exception& e) {
      report(ids, false, std::string("error: ") + e.what());
    }
  }
  std::printf("%s: %d criterion failure(s)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
