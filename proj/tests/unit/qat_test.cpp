#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "rsnn/rsnn.hpp"
#include "support/gradcheck.hpp"

using namespace rsnn;
namespace rt = rsnn::testing;

TEST(ActQuantize, FloorAndClamp) {
  EXPECT_EQ(act_quantize(0.5, 2).S, 2);
  EXPECT_EQ(act_quantize(0.5, 2).grad, 1.0);
  EXPECT_EQ(act_quantize(1.2, 2).S, 3);
  EXPECT_EQ(act_quantize(1.2, 2).grad, 0.0);
  EXPECT_EQ(act_quantize(-0.1, 5).S, 0);
  EXPECT_EQ(act_quantize(-0.1, 5).grad, 0.0);
  EXPECT_EQ(act_quantize(0.999, 8).S, 255);
}

TEST(WeightQuantize, RoundAndSaturate) {
  EXPECT_EQ(weight_quantize(0.75, 2, 8).w, 3);
  EXPECT_EQ(weight_quantize(100.0, 2, 8).w, 127);
  EXPECT_EQ(weight_quantize(100.0, 2, 8).grad, 0.0);
  EXPECT_EQ(weight_quantize(-100.0, 2, 8).w, -128);
  EXPECT_EQ(weight_quantize(0.0, 5, 8).w, 0);
  EXPECT_EQ(weight_quantize(0.625, 2, 8).w, 2);  // tie to even
  EXPECT_EQ(weight_quantize(0.3, 2, 8).w, wpt_inv(0.3, 2).value);
}

TEST(LearningRate, HalvesEveryThirtyEpochs) {
  for (int e = 0; e < 200; ++e) EXPECT_EQ(learning_rate(0.1, e), 0.1 * std::pow(0.5, e / 30));
  EXPECT_EQ(learning_rate(0.1, 29), 0.1);
  EXPECT_EQ(learning_rate(0.1, 30), 0.05);
}

TEST(QuantizedForward, WorkedNeuron) {
  AnnModel a;
  a.cfg = RadixConfig(2, 2);
  a.layers.push_back({LayerSpec::dense(1, 1, ReadoutMode::rectify_saturate), {0.75}, {0.5}, std::nullopt});
  const std::vector<Int> S{3};
  EXPECT_EQ(quantized_forward(a, S).activations[0][0], 2);
  a.layers[0].biases[0] = -5.0;
  EXPECT_EQ(quantized_forward(a, S).activations[0][0], 0);
  a.layers[0].biases[0] = 4.0;
  EXPECT_EQ(quantized_forward(a, S).activations[0][0], 3);
  const std::vector<Int> wrong{1, 2};
  EXPECT_THROW(quantized_forward(a, wrong), ShapeError);
}

TEST(QuantizedForward, MatchesSimulatorOnConvLayers) {
  std::mt19937_64 rng(3);
  SnnModel m;
  m.cfg = RadixConfig(3, 4);
  ConvShape c{.in_channels = 2, .kernel_h = 3, .kernel_w = 3, .out_channels = 2, .out_h = 3, .out_w = 3,
              .stride = 1, .padding = 1, .groups = 1};
  SnnLayer L{LayerSpec::conv2d(c, ReadoutMode::rectify_saturate), {}, {}};
  L.weights.resize(L.spec.weight_count());
  for (auto& w : L.weights) w = static_cast<Int>(rng() % 17) - 8;
  L.biases = {5, -3};
  m.layers.push_back(L);
  const auto a = snn_to_ann(m);
  for (int s = 0; s < 50; ++s) {
    std::vector<Int> S(L.spec.input_count());
    std::vector<SpikeTrain> in;
    for (auto& x : S) {
      x = static_cast<Int>(rng() % 8);
      in.push_back(wdt_inv(x, 3));
    }
    const auto q = quantized_forward(a, S);
    const auto r = simulate_network<Int>(in, m);
    for (std::size_t k = 0; k < r.output.size(); ++k) ASSERT_EQ(static_cast<Int>(wdt(r.output[k])), q.activations[0][k]);
  }
}

TEST(Blobs, DeterministicAndInRange) {
  const auto a = make_blobs(BlobParams{});
  const auto b = make_blobs(BlobParams{});
  EXPECT_EQ(a.train_x, b.train_x);
  EXPECT_EQ(a.test_y, b.test_y);
  EXPECT_EQ(a.train_x.size(), 600u);
  EXPECT_EQ(a.test_x.size(), 300u);
  for (const auto& x : a.train_x)
    for (double v : x) {
      ASSERT_GE(v, 0.0);
      ASSERT_LT(v, 1.0);
    }
  BlobParams other;
  other.seed = 43;
  EXPECT_NE(make_blobs(other).train_x, a.train_x);
}

TEST(Idx, LoadsUnsignedByteFiles) {
  namespace fs = std::filesystem;
  const auto img = (fs::temp_directory_path() / "rsnn_test_images.idx").string();
  const auto lab = (fs::temp_directory_path() / "rsnn_test_labels.idx").string();
  {
    std::ofstream f(img, std::ios::binary);
    const unsigned char hdr[] = {0, 0, 8, 3, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0, 2};
    f.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    for (int i = 0; i < 12; ++i) f.put(static_cast<char>(i * 20));
    std::ofstream g(lab, std::ios::binary);
    const unsigned char lh[] = {0, 0, 8, 1, 0, 0, 0, 3, 2, 0, 1};
    g.write(reinterpret_cast<const char*>(lh), sizeof lh);
  }
  const auto d = load_idx(img, lab, 2);
  EXPECT_EQ(d.features, 4u);
  EXPECT_EQ(d.classes, 3u);
  ASSERT_EQ(d.train_x.size(), 2u);
  ASSERT_EQ(d.test_x.size(), 1u);
  EXPECT_DOUBLE_EQ(d.train_x[1][0], 80.0 / 256.0);
  EXPECT_EQ(d.test_y[0], 1);
  EXPECT_THROW(load_idx(lab, img, 1), FormatError);
  fs::remove(img);
  fs::remove(lab);
}

TEST(Train, ReachesAccuracyOnBlobs) {
  const auto data = make_blobs(BlobParams{});
  const auto r = train(TrainConfig{}, data, {16});
  ASSERT_EQ(r.history.size(), 60u);
  EXPECT_GE(r.history.back().test_accuracy, 0.90);
  EXPECT_LT(r.history.back().loss, r.history.front().loss);
}

TEST(Train, FloatBaselineReachesAccuracy) {
  TrainConfig cfg;
  cfg.quantize = false;
  const auto r = train(cfg, make_blobs(BlobParams{}), {16});
  EXPECT_GE(r.history.back().test_accuracy, 0.95);
}

TEST(Train, ExportsOnGridParameters) {
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto r = train(cfg, make_blobs(BlobParams{}), {16});
  for (const auto& L : r.model.layers) {
    for (double w : L.weights) ASSERT_EQ(std::ldexp(w, cfg.delta_t), std::nearbyint(std::ldexp(w, cfg.delta_t)));
    for (double b : L.biases) ASSERT_EQ(std::ldexp(b, cfg.delta_t), std::nearbyint(std::ldexp(b, cfg.delta_t)));
  }
  EXPECT_EQ(ann_to_snn(r.model).max_error, (std::vector<double>{0.0, 0.0}));
  EXPECT_TRUE(validate_model(ann_to_snn(r.model).model).ok());
}

TEST(Train, ZeroEpochsIsNearChance) {
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto data = make_blobs(BlobParams{});
  const auto r = train(cfg, data, {16});
  EXPECT_TRUE(r.history.empty());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < data.test_x.size(); ++i)
    hit += static_cast<int>(predict_quantized(r.model, data.test_x[i])) == data.test_y[i];
  EXPECT_LT(static_cast<double>(hit) / data.test_x.size(), 0.75);
}

TEST(Train, SameSeedIsBitIdentical) {
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto data = make_blobs(BlobParams{});
  const auto a = train(cfg, data, {16});
  const auto b = train(cfg, data, {16});
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.shadow.weight, b.shadow.weight);
  EXPECT_EQ(format_metrics_csv(a.history), format_metrics_csv(b.history));
}

TEST(Train, DivergenceIsReported) {
  TrainConfig cfg;
  cfg.lr = std::numeric_limits<double>::max();
  cfg.quantize = false;
  cfg.epochs = 3;
  EXPECT_THROW(train(cfg, make_blobs(BlobParams{}), {16}), DivergenceError);
}

TEST(Train, RejectsBadConfig) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(train(cfg, make_blobs(BlobParams{}), {16}), ParameterError);
}

TEST(Surrogate, EqualsQuantizedLossAtOrigin) {
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto data = make_blobs(BlobParams{});
  const auto p = train(cfg, data, {16}).shadow;
  std::vector<std::vector<double>> in(data.train_x.size());
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = quantize_features(data.train_x[i], cfg);
  const std::vector<std::size_t> idx{0, 5, 17, 99, 250};
  const auto [loss, g] = batch_gradient(p, in, data.train_y, idx, cfg);
  (void)g;
  const auto tape = record_surrogate(p, in, idx, cfg);
  EXPECT_NEAR(surrogate_loss(p, tape, data.train_y, idx, cfg), loss, 1e-12);
}

TEST(Surrogate, StraightThroughGradientMatchesFiniteDifferences) {
  const auto res = rt::gradient_check(25, 77);
  ASSERT_EQ(res.points.size(), 25u);
  for (const auto& p : res.points) EXPECT_LT(p.rel_error(), 1e-4) << p.analytic << " vs " << p.numeric;
}

TEST(EndToEnd, BlobExperimentAgrees) {
  const auto rep = end_to_end(TrainConfig{}, make_blobs(BlobParams{}), {16});
  EXPECT_GE(rep.ann_accuracy, 0.90);
  EXPECT_GE(rep.agreement(), 0.999);
  EXPECT_EQ(rep.agree_without_overflow, rep.samples_without_overflow);
  EXPECT_EQ(rep.max_conversion_error(), 0.0);
  EXPECT_TRUE(rep.verdicts.pass);
  EXPECT_EQ(rep.verdicts.total_mismatches(), 0u);
}

TEST(EndToEnd, UntrainedModelStillAgrees) {
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto rep = end_to_end(cfg, make_blobs(BlobParams{}), {16});
  EXPECT_EQ(rep.agree, rep.test_samples);
  EXPECT_EQ(rep.exact_activation_matches, rep.test_samples);
}

TEST(EndToEnd, ZeroDelayIsExact) {
  TrainConfig cfg;
  cfg.delta_t = 0;
  cfg.epochs = 10;
  const auto rep = end_to_end(cfg, make_blobs(BlobParams{}), {16});
  EXPECT_EQ(rep.agree, rep.test_samples);
  EXPECT_EQ(rep.max_conversion_error(), 0.0);
}
