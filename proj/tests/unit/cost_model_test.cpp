#include <gtest/gtest.h>

#include <cmath>

#include "rsnn/rsnn.hpp"
#include "support/oracles.hpp"

using namespace rsnn;
namespace rt = rsnn::testing;

namespace {

bool within(double got, double want, double rel) { return std::fabs(got - want) <= rel * std::fabs(want); }

}  // namespace

TEST(LayerMacs, DenseAndConv) {
  EXPECT_EQ(layer_macs(LayerSpec::dense(100, 10)), 1000u);
  ConvShape c{.in_channels = 3, .kernel_h = 3, .kernel_w = 3, .out_channels = 64, .out_h = 32, .out_w = 32,
              .stride = 1, .padding = 1, .groups = 1};
  EXPECT_EQ(layer_macs(LayerSpec::conv2d(c)), 1769472u);
  EXPECT_EQ(layer_macs(LayerSpec::conv2d(c)), rt::ref_conv_macs(3, 64, 3, 32));
  ConvShape p{.in_channels = 64, .kernel_h = 1, .kernel_w = 1, .out_channels = 64, .out_h = 1, .out_w = 1,
              .stride = 1, .padding = 0, .groups = 1};
  EXPECT_EQ(layer_macs(LayerSpec::conv2d(p)), 4096u);
}

TEST(MacTotal, Vgg16ClosedForm) {
  const std::uint64_t convs = rt::ref_conv_macs(3, 64, 3, 32) + rt::ref_conv_macs(64, 64, 3, 32) +
                              rt::ref_conv_macs(64, 128, 3, 16) + rt::ref_conv_macs(128, 128, 3, 16) +
                              rt::ref_conv_macs(128, 256, 3, 8) + 2 * rt::ref_conv_macs(256, 256, 3, 8) +
                              rt::ref_conv_macs(256, 512, 3, 4) + 2 * rt::ref_conv_macs(512, 512, 3, 4) +
                              3 * rt::ref_conv_macs(512, 512, 3, 2);
  const auto total = mac_total(arch::vgg16());
  EXPECT_GE(total, convs);
  EXPECT_LT(total - convs, 10'000'000u);  // classifier head
}

TEST(SnnOps, TableTwoValues) {
  EXPECT_TRUE(within(static_cast<double>(snn_ops(arch::vgg16(), 8)), 2.51e9, 0.03));
  EXPECT_TRUE(within(static_cast<double>(snn_ops(arch::resnet18(), 8)), 4.44e9, 0.03));
  EXPECT_TRUE(within(static_cast<double>(snn_ops(arch::mobilenet(), 8)), 0.37e9, 0.03));
  EXPECT_TRUE(within(static_cast<double>(snn_ops(arch::vgg16(), 2500)), 783e9, 0.03));
  for (const auto& a : arch::builtins()) EXPECT_EQ(snn_ops(a, 0), 0u);
}

TEST(SnnOps, CountTPrimeSwitch) {
  CostConfig c;
  c.count_t_prime = true;
  c.delta_t = 4;
  EXPECT_EQ(snn_ops(arch::vgg16(), 8, c), snn_ops(arch::vgg16(), 12));
}

TEST(AnnOps, FactorRederivedFromTableTwo) {
  // 20.7e9 / (2.51e9 / 8), 36.7e9 / (4.44e9 / 8), 3.07e9 / (0.37e9 / 8) all sit near 66.
  for (double f : {20.7e9 / (2.51e9 / 8), 36.7e9 / (4.44e9 / 8), 3.07e9 / (0.37e9 / 8)})
    EXPECT_TRUE(within(kAnnOpsPerMac, f, 0.03)) << f;
  EXPECT_TRUE(within(ann_effective_ops(arch::vgg16()), 20.7e9, 0.03));
  EXPECT_TRUE(within(ann_effective_ops(arch::resnet18()), 36.7e9, 0.03));
  EXPECT_TRUE(within(ann_effective_ops(arch::mobilenet()), 3.07e9, 0.03));
  EXPECT_EQ(ann_effective_ops(arch::vgg9(), 1.0), static_cast<double>(mac_total(arch::vgg9())));
}

TEST(Latency, TableTwoAndThree) {
  const double base = ann_effective_ops(arch::vgg16());
  EXPECT_NEAR(normalized_latency(ann_effective_ops(arch::resnet18()), base), 1.77, 0.05);
  EXPECT_NEAR(normalized_latency(static_cast<double>(snn_ops(arch::vgg16(), 8)), base), 0.12, 0.01);
  EXPECT_EQ(normalized_latency(base, base), 1.0);
}

TEST(Speedup, TableThreeGroups) {
  const auto rows = speedup_table();
  auto get = [&](const std::string& method, const std::string& a, std::uint64_t T) {
    for (const auto& r : rows)
      if (r.method == method && r.arch == a && r.steps == T) return r;
    ADD_FAILURE() << "missing row " << method << " " << a << " " << T;
    return SpeedupRow{};
  };
  EXPECT_TRUE(within(get("Radix", "vgg16", 8).speedup, 12.5, 0.05));
  EXPECT_TRUE(within(get("Radix", "vgg16", 4).speedup, 25.0, 0.05));
  EXPECT_TRUE(within(get("Radix", "resnet44", 8).speedup, 43.8, 0.05));
  EXPECT_NEAR(get("GD-SNN", "vgg16", 2500).latency, 37.8, 1.0);
  EXPECT_EQ(get("Hybrid", "vgg16", 100).speedup, 1.0);
}

TEST(Formatting, OpsStrings) {
  EXPECT_EQ(format_ops(2.5056e9), "2.51e9");
  EXPECT_EQ(format_ops(783.0e9), "783e9");
  const auto md = format_cost_markdown(cost_rows({arch::vgg16()}, {8}));
  EXPECT_NE(md.find("| vgg16 | SNN | 8 | 2.51e9 | 0.12 |"), std::string::npos) << md;
}

TEST(ArchJson, RoundTrip) {
  for (const auto& a : arch::builtins()) {
    const auto back = arch_from_json(to_json(a).dump());
    EXPECT_EQ(back.name, a.name);
    EXPECT_EQ(mac_total(back), mac_total(a));
  }
  EXPECT_THROW(arch::by_name("alexnet"), ParameterError);
}
