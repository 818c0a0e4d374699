#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "dseg/data/manifest.hpp"
#include "dseg/nn/checkpoint.hpp"
#include "dseg/nn/detector.hpp"
#include "dseg/nn/train.hpp"
#include "oracles.hpp"

using namespace dseg;
using namespace dseg::nn;
using oracle::gradcheck;
using oracle::project;
using VarsD = std::vector<Var<double>>;

namespace {

constexpr int kInstances = 20;
constexpr double kRelTol = 1e-4;

std::vector<int> rand_nchw(Rng& rng, bool even = false) {
  const int scale = even ? 2 : 1;
  return {uniform_int(rng, 1, 2), uniform_int(rng, 1, 3), scale * uniform_int(rng, 1, 4), scale * uniform_int(rng, 1, 4)};
}

Tensor<double> binary_tensor(std::vector<int> shape, Rng& rng, double p = 0.4) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = bernoulli(rng, p) ? 1.0 : 0.0;
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gradient checks, double precision, central differences

TEST(GradCheck, CatchesAWrongBackward) {
  // y = x^2 with a backward that forgets the factor 2
  auto square = [](const Var<double>& x) {
    Tensor<double> y(x->shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = x->value.data[i] * x->value.data[i];
    return make_result<double>(std::move(y), {x}, [](Node<double>& self) {
      auto& p = self.parents[0];
      for (std::size_t i = 0; i < p->size(); ++i) p->value.grad_buffer()[i] += self.value.grad[i] * p->value.data[i];
    });
  };
  Rng rng(1);
  const auto x = oracle::random_tensor({1, 1, 2, 2}, rng);
  EXPECT_GT(gradcheck([&](const VarsD& v) { return project(square(v[0]), 3); }, {x}), 0.4);
}

TEST(GradCheck, Conv2d) {
  Rng rng(100);
  for (int t = 0; t < kInstances; ++t) {
    const int k = t % 2 ? 3 : 1, pad = k == 3 ? t % 4 / 2 : 0;
    const int ci = uniform_int(rng, 1, 3), co = uniform_int(rng, 1, 3);
    const int h = uniform_int(rng, k, 6), w = uniform_int(rng, k, 6);
    const auto x = oracle::random_tensor({uniform_int(rng, 1, 2), ci, h, w}, rng);
    const auto wt = oracle::random_tensor({co, ci, k, k}, rng);
    const auto b = oracle::random_tensor({co}, rng);
    const double err =
        gradcheck([&](const VarsD& v) { return project(conv2d(v[0], v[1], v[2], pad), 7 + t); }, {x, wt, b});
    EXPECT_LT(err, kRelTol) << "instance " << t;
  }
}

TEST(GradCheck, Relu) {
  Rng rng(101);
  for (int t = 0; t < kInstances; ++t) {
    const auto x = oracle::off_kink_tensor(rand_nchw(rng), rng);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return project(relu(v[0]), t); }, {x}), kRelTol) << t;
  }
}

TEST(GradCheck, Sigmoid) {
  Rng rng(102);
  for (int t = 0; t < kInstances; ++t) {
    const auto x = oracle::random_tensor(rand_nchw(rng), rng, -4, 4);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return project(sigmoid(v[0]), t); }, {x}), kRelTol) << t;
  }
}

TEST(GradCheck, AddAndMul) {
  Rng rng(103);
  for (int t = 0; t < kInstances; ++t) {
    const auto s = rand_nchw(rng);
    const auto a = oracle::random_tensor(s, rng), b = oracle::random_tensor(s, rng);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return project(add(v[0], v[1]), t); }, {a, b}), kRelTol) << t;
    EXPECT_LT(gradcheck([&](const VarsD& v) { return project(mul(v[0], v[1]), t); }, {a, b}), kRelTol) << t;
    // the same node on both sides accumulates both contributions
    EXPECT_LT(gradcheck([&](const VarsD& v) { return project(mul(v[0], v[0]), t); }, {a}), kRelTol) << t;
  }
}

TEST(GradCheck, SumAndMean) {
  Rng rng(104);
  for (int t = 0; t < kInstances; ++t) {
    const auto x = oracle::random_tensor(rand_nchw(rng), rng);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return sum(mul(v[0], v[0])); }, {x}), kRelTol) << t;
    EXPECT_LT(gradcheck([&](const VarsD& v) { return mean(mul(v[0], v[0])); }, {x}), kRelTol) << t;
  }
}

TEST(GradCheck, MaxPool2) {
  Rng rng(105);
  for (int t = 0; t < kInstances; ++t) {
    const auto x = oracle::distinct_tensor(rand_nchw(rng, true), rng, 0.02);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return project(maxpool2(v[0]), t); }, {x}), kRelTol) << t;
  }
}

TEST(GradCheck, Upsample2) {
  Rng rng(106);
  for (int t = 0; t < kInstances; ++t) {
    const auto x = oracle::random_tensor(rand_nchw(rng), rng);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return project(upsample2(v[0]), t); }, {x}), kRelTol) << t;
  }
}

TEST(GradCheck, ConcatAndSliceChannels) {
  Rng rng(107);
  for (int t = 0; t < kInstances; ++t) {
    auto s = rand_nchw(rng);
    auto s2 = s;
    s2[1] = uniform_int(rng, 1, 3);
    const auto a = oracle::random_tensor(s, rng), b = oracle::random_tensor(s2, rng);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return project(concat_channels(v[0], v[1]), t); }, {a, b}), kRelTol);
    const int c = s[1] + s2[1];
    const int lo = uniform_int(rng, 0, c - 1), hi = uniform_int(rng, lo + 1, c);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return project(slice_channels(concat_channels(v[0], v[1]), lo, hi), t); },
                        {a, b}),
              kRelTol);
  }
}

TEST(GradCheck, WeightedBce) {
  Rng rng(108);
  for (int t = 0; t < kInstances; ++t) {
    const auto s = rand_nchw(rng);
    const auto z = oracle::random_tensor(s, rng, -5, 5);
    const auto y = binary_tensor(s, rng);
    const double w = uniform(rng, 0.5, 12.0);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return weighted_bce_loss(v[0], y, w); }, {z}), kRelTol) << t;
  }
}

TEST(GradCheck, FocalLoss) {
  Rng rng(109);
  for (int t = 0; t < kInstances; ++t) {
    const auto s = rand_nchw(rng);
    const auto z = oracle::random_tensor(s, rng, -4, 4);
    const auto y = binary_tensor(s, rng, 0.3);
    const double alpha = uniform(rng, 0.1, 0.9), gamma = t % 4 == 0 ? 0.0 : uniform(rng, 0.5, 3.0);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return focal_loss(v[0], y, alpha, gamma); }, {z}), kRelTol) << t;
  }
}

TEST(GradCheck, BoxL1) {
  Rng rng(110);
  for (int t = 0; t < kInstances; ++t) {
    const int n = uniform_int(rng, 1, 2), h = uniform_int(rng, 1, 4), w = uniform_int(rng, 1, 4);
    const auto target = oracle::random_tensor({n, 4, h, w}, rng);
    // pred = target + an offset kept away from the |.| kink
    auto pred = oracle::off_kink_tensor({n, 4, h, w}, rng);
    for (std::size_t i = 0; i < pred.data.size(); ++i) pred.data[i] += target.data[i];
    auto pos = binary_tensor({n, 1, h, w}, rng, 0.5);
    pos.data[0] = 1.0;
    const double weight = uniform(rng, 0.5, 2.0);
    EXPECT_LT(gradcheck([&](const VarsD& v) { return box_l1_loss(v[0], target, pos, weight); }, {pred}), kRelTol) << t;
  }
}

// ---------------------------------------------------------------------------
// Ops and losses: closed forms and errors

TEST(Ops, UpsampleThenPoolIsIdentityOnConstant) {
  auto x = leaf(Tensor<double>({1, 2, 3, 3}, 0.7));
  EXPECT_EQ(maxpool2(upsample2(x))->value.data, x->value.data);
}

TEST(Ops, ShapeMismatchNamesTheOp) {
  auto a = leaf(Tensor<double>({1, 1, 2, 2})), b = leaf(Tensor<double>({1, 1, 2, 3}));
  try {
    add(a, b);
    FAIL() << "expected shape_error";
  } catch (const shape_error& e) {
    EXPECT_NE(std::string(e.what()).find("add"), std::string::npos);
  }
  EXPECT_THROW(conv2d(a, leaf(Tensor<double>({1, 2, 3, 3})), leaf(Tensor<double>({1})), 1), shape_error);
  EXPECT_THROW(maxpool2(leaf(Tensor<double>({1, 1, 3, 2}))), shape_error);
  EXPECT_THROW(backward(a), shape_error);
}

TEST(Losses, WeightedBceClosedForms) {
  auto z = leaf(Tensor<double>({1}, 0.0));
  EXPECT_NEAR(weighted_bce_loss(z, Tensor<double>({1}, 1.0), 2.0)->value.data[0], 2 * std::log(2.0), 1e-15);

  Rng rng(5);
  const auto zs = oracle::random_tensor({1, 1, 3, 3}, rng, -3, 3);
  const auto ys = binary_tensor({1, 1, 3, 3}, rng);
  double ref = 0;
  for (std::size_t i = 0; i < zs.data.size(); ++i) {
    const double p = 1 / (1 + std::exp(-zs.data[i]));
    ref -= ys.data[i] * std::log(p) + (1 - ys.data[i]) * std::log(1 - p);
  }
  EXPECT_NEAR(weighted_bce_loss(leaf(zs), ys, 1.0)->value.data[0], ref / 9, 1e-12);

  auto bad = Tensor<double>({2}, 0.0);
  bad.data[1] = std::nan("");
  EXPECT_THROW(weighted_bce_loss(leaf(bad), Tensor<double>({2}, 1.0), 1.0), numeric_error);
  EXPECT_THROW(weighted_bce_loss(z, Tensor<double>({1}, 1.0), 0.0), invalid_input);
}

TEST(Losses, ClassWeight) {
  std::vector<Mask> m{Mask(100, 100, 0)};
  for (int i = 0; i < 1000; ++i) m[0].data[i] = 1;
  EXPECT_DOUBLE_EQ(class_weight(m), 9.0);
  std::vector<Mask> half{Mask(2, 2, 0)};
  half[0].data[0] = half[0].data[1] = 1;
  EXPECT_DOUBLE_EQ(class_weight(half), 1.0);
  EXPECT_THROW(class_weight(std::vector<Mask>{Mask(4, 4, 0)}), invalid_input);
  EXPECT_THROW(class_weight(std::vector<Mask>{Mask(4, 4, 1)}), invalid_input);
}

TEST(Losses, FocalClosedForms) {
  auto z0 = leaf(Tensor<double>({1}, 0.0));
  EXPECT_NEAR(focal_loss(z0, Tensor<double>({1}, 1.0), 0.25, 2.0)->value.data[0], 0.25 * 0.25 * std::log(2.0), 1e-15);

  Rng rng(6);
  const auto zs = oracle::random_tensor({1, 1, 4, 4}, rng, -3, 3);
  const auto ys = binary_tensor({1, 1, 4, 4}, rng);
  EXPECT_NEAR(focal_loss(leaf(zs), ys, 0.5, 0.0)->value.data[0],
              0.5 * weighted_bce_loss(leaf(zs), ys, 1.0)->value.data[0], 1e-14);

  EXPECT_LT(focal_loss(leaf(Tensor<double>({1}, 30.0)), Tensor<double>({1}, 1.0), 0.25, 2.0)->value.data[0], 1e-20);
}

TEST(Losses, BoxL1Conventions) {
  Tensor<double> target({1, 4, 2, 2}, 0.5), pos({1, 1, 2, 2}, 0.0);
  pos.data[3] = 1;
  EXPECT_EQ(box_l1_loss(leaf(target), target, pos, 1.0)->value.data[0], 0.0);

  Tensor<double> pred = target;
  for (int c = 0; c < 4; ++c) pred.data[c * 4 + 3] += (c % 2 ? 1.0 : -1.0);
  pred.data[0] += 5;  // negative cell: ignored
  EXPECT_DOUBLE_EQ(box_l1_loss(leaf(pred), target, pos, 1.0)->value.data[0], 1.0);

  auto p = leaf(pred, true);
  auto loss = box_l1_loss(p, target, Tensor<double>({1, 1, 2, 2}, 0.0), 1.0);
  EXPECT_EQ(loss->value.data[0], 0.0);
  backward(loss);
  for (double g : p->value.grad) EXPECT_EQ(g, 0.0);
}

// ---------------------------------------------------------------------------
// Adam

namespace {

ParameterList<double> scalar_param(double x) {
  return {Parameter<double>{"x", leaf(Tensor<double>({1}, x), true)}};
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto p = scalar_param(1.5);
  AdamState<double> st;
  p[0].var->value.zero_grad();
  adam_step(p, st, AdamHyper{0.1});
  EXPECT_EQ(p[0].var->value.data[0], 1.5);
}

TEST(Adam, FirstStepMagnitudeIsLr) {
  for (double g : {1e-3, 0.5, -7.0}) {
    auto p = scalar_param(0.0);
    AdamState<double> st;
    p[0].var->value.grad = {g};
    adam_step(p, st, AdamHyper{0.01});
    const double d = std::abs(p[0].var->value.data[0]);
    EXPECT_GT(d, 0.9 * 0.01);
    EXPECT_LE(d, 0.01);
  }
}

TEST(Adam, MatchesScalarOracleOnQuadratic) {
  auto p = scalar_param(1.0);
  AdamState<double> st;
  const auto ref = oracle::scalar_adam(1.0, [](double x) { return 2 * x; }, 10, 0.1);
  for (int t = 0; t < 10; ++t) {
    p[0].var->value.grad = {2 * p[0].var->value.data[0]};
    adam_step(p, st, AdamHyper{0.1});
    EXPECT_NEAR(p[0].var->value.data[0], ref[t], 1e-12) << "step " << t + 1;
  }
}

TEST(Adam, DecoupledWeightDecay) {
  auto p = scalar_param(2.0);
  AdamState<double> st;
  p[0].var->value.zero_grad();
  adam_step(p, st, AdamHyper{0.1, 0.9, 0.999, 1e-8, 0.5});
  EXPECT_NEAR(p[0].var->value.data[0], 2.0 * (1 - 0.1 * 0.5), 1e-15);
}

TEST(Adam, NonFiniteGradientThrows) {
  auto p = scalar_param(0.0);
  AdamState<double> st;
  p[0].var->value.grad = {std::numeric_limits<double>::infinity()};
  EXPECT_THROW(adam_step(p, st, AdamHyper{}), numeric_error);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

// One parameter pulled towards 3 by a quadratic loss.
struct Toy {
  ParameterList<double> params = scalar_param(0.0);
  auto batch_loss() {
    return [this](std::span<const std::size_t>, Rng&) {
      auto x = params[0].var;
      auto d = add(x, leaf(Tensor<double>({1}, -3.0)));
      return sum(mul(d, d));
    };
  }
};

}  // namespace

TEST(Fit, EarlyStopsAfterPatienceAndRestoresBestWeights) {
  Toy toy;
  TrainConfig cfg;
  cfg.initial_lr = 0.1;
  cfg.max_epochs = 100;
  double after_epoch1 = std::nan("");
  // validation strictly worsening from epoch 1 on
  auto hook = [&](int epoch, double) {
    if (epoch == 1) after_epoch1 = toy.params[0].var->value.data[0];
    return double(epoch);
  };
  const auto hist = fit(toy.params, 4, cfg, toy.batch_loss(), [] { return 0.0; }, hook);
  EXPECT_TRUE(hist.stopped_early);
  EXPECT_EQ(hist.epochs.size(), 13u);
  EXPECT_EQ(hist.best_epoch, 1);
  EXPECT_EQ(toy.params[0].var->value.data[0], after_epoch1);
}

TEST(Fit, NoEarlyStoppingRunsAllEpochs) {
  Toy toy;
  TrainConfig cfg;
  cfg.max_epochs = 20;
  cfg.early_stopping = false;
  const auto hist = fit(toy.params, 2, cfg, toy.batch_loss(), [] { return 0.0; }, [](int e, double) { return double(e); });
  EXPECT_EQ(hist.epochs.size(), 20u);
  EXPECT_FALSE(hist.stopped_early);
  EXPECT_NEAR(hist.epochs[3].lr, cfg.initial_lr * std::pow(cfg.lr_decay, 3), 1e-18);
}

TEST(Fit, DivergenceReportsEpoch) {
  Toy toy;
  TrainConfig cfg;
  int calls = 0;
  auto loss = [&](std::span<const std::size_t>, Rng&) {
    ++calls;
    return leaf(Tensor<double>({1}, calls >= 3 ? std::nan("") : 1.0), false);
  };
  try {
    fit(toy.params, 1, cfg, loss, [] { return 0.0; });
    FAIL() << "expected training_error";
  } catch (const training_error& e) {
    EXPECT_EQ(e.epoch, 3);
  }
}

namespace {

// Eight 32x32 images with one bright square each, at varied positions.
std::vector<SegSample> overfit_set() {
  std::vector<SegSample> out;
  Rng rng(8);
  for (int k = 0; k < 8; ++k) {
    SegSample s{Image(32, 32, 0.25f), Mask(32, 32, 0)};
    const int r0 = uniform_int(rng, 2, 18), c0 = uniform_int(rng, 2, 18), side = uniform_int(rng, 6, 12);
    for (int r = r0; r < r0 + side; ++r)
      for (int c = c0; c < c0 + side; ++c) {
        s.mask.at(r, c) = 1;
        s.image.at(r, c, 0) = 0.8f;
        s.image.at(r, c, 1) = 0.2f;
      }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(TrainSegmenter, OverfitsEightImages) {
  const auto data = overfit_set();
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.initial_lr = 1e-2;
  cfg.lr_decay = 0.99;
  cfg.max_epochs = 200;
  cfg.early_stopping = false;
  cfg.seed = 1;
  const auto res = train_segmenter<float>(data, data, SegmenterConfig{SegmenterVariant::unet_lite, 2, 8, 32}, cfg,
                                          data::AugmentParams::none());
  EXPECT_LT(res.history.epochs.back().train_loss, 0.05);
}

TEST(TrainSegmenter, SameSeedGivesBitwiseIdenticalWeights) {
  const auto data = overfit_set();
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.seed = 42;
  const SegmenterConfig mc{SegmenterVariant::convnet_lite, 2, 4, 32};
  const auto a = train_segmenter<float>(data, data, mc, cfg, data::AugmentParams{});
  const auto b = train_segmenter<float>(data, data, mc, cfg, data::AugmentParams{});
  ASSERT_EQ(a.model.parameters().size(), b.model.parameters().size());
  for (std::size_t k = 0; k < a.model.parameters().size(); ++k)
    EXPECT_EQ(a.model.parameters()[k].var->value.data, b.model.parameters()[k].var->value.data);
}

TEST(Models, OutputShapes) {
  BasicSegmenter<float> seg(SegmenterConfig{SegmenterVariant::unet_lite, 3, 4, 32}, 1);
  auto out = seg.forward(leaf(Tensor<float>({2, 3, 32, 16})));
  EXPECT_EQ(out->shape(), (std::vector<int>{2, 1, 32, 16}));
  EXPECT_THROW(seg.forward(leaf(Tensor<float>({1, 3, 20, 16}))), shape_error);

  BasicDetector<float> det(DetectorConfig{8, 4, 2}, 1);
  EXPECT_EQ(det.forward(leaf(Tensor<float>({1, 3, 64, 32})))->shape(), (std::vector<int>{1, 5, 8, 4}));
  EXPECT_THROW(BasicDetector<float>(DetectorConfig{6, 4, 1}, 1), invalid_input);
  EXPECT_THROW(BasicSegmenter<float>(SegmenterConfig{SegmenterVariant::unet_lite, 3, 4, 36}, 1), invalid_input);
}

// ---------------------------------------------------------------------------
// Detector targets and decoding

TEST(DetectorTargets, CellCentreContainment) {
  const std::vector<Box> boxes{{8, 8, 24, 24}};
  const auto t = encode_targets(boxes, 4, 4, 8);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const bool expect = (i == 1 || i == 2) && (j == 1 || j == 2);  // centres 12 and 20
      EXPECT_EQ(t.objectness[i * 4 + j], expect ? 1.0f : 0.0f) << i << "," << j;
    }
}

TEST(DetectorTargets, WholeImageBoxMakesEveryCellPositive) {
  const std::vector<Box> boxes{{0, 0, 32, 24}};
  const auto t = encode_targets(boxes, 3, 4, 8);
  for (float v : t.objectness) EXPECT_EQ(v, 1.0f);
}

TEST(DetectorTargets, SmallestBoxClaimsSharedCells) {
  const std::vector<Box> boxes{{0, 0, 32, 32}, {8, 8, 16, 16}};
  const auto t = encode_targets(boxes, 4, 4, 8);
  const std::size_t cell = 1 * 4 + 1;
  EXPECT_NEAR(t.offsets[cell], std::log(4.0 / 8.0), 1e-6);  // left distance 12-8 to the small box
}

TEST(DetectorTargets, EncodeDecodeRoundTrip) {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const double x0 = uniform(rng, 0, 40), y0 = uniform(rng, 0, 40);
    const Box b{x0, y0, x0 + uniform(rng, 10, 24), y0 + uniform(rng, 10, 24)};
    const auto t = encode_targets(std::vector<Box>{b}, 8, 8, 8);
    std::vector<float> raw(5 * 64);
    for (int c = 0; c < 64; ++c) raw[c] = t.objectness[c] > 0 ? 10.0f : -10.0f;
    std::copy(t.offsets.begin(), t.offsets.end(), raw.begin() + 64);
    const auto dets = detector_decode<float>(raw, 8, 8, 8, 64, 64);
    int positives = 0;
    for (int c = 0; c < 64; ++c) {
      if (t.objectness[c] == 0) continue;
      ++positives;
      EXPECT_NEAR(dets[c].box.x_min, std::max(0.0, b.x_min), 1e-4);
      EXPECT_NEAR(dets[c].box.y_min, std::max(0.0, b.y_min), 1e-4);
      EXPECT_NEAR(dets[c].box.x_max, std::min(64.0, b.x_max), 1e-4);
      EXPECT_NEAR(dets[c].box.y_max, std::min(64.0, b.y_max), 1e-4);
    }
    EXPECT_GT(positives, 0);
  }
}

TEST(DetectorDecode, ZeroOffsetsGiveTwoStrideBox) {
  std::vector<double> raw(5 * 4, 0.0);
  const auto d = detector_decode<double>(raw, 2, 2, 8, 16, 16);
  // cell (1,0): centre (4, 12)
  EXPECT_EQ(d[2].box, (Box{0, 4, 12, 16}));
  EXPECT_EQ(d[0].box, (Box{0, 0, 12, 12}));
  EXPECT_DOUBLE_EQ(d[0].confidence, 0.5);
  // unclamped interior cell in a larger grid
  std::vector<double> big(5 * 9, 0.0);
  EXPECT_EQ(detector_decode<double>(big, 3, 3, 8, 24, 24)[4].box, (Box{4, 4, 20, 20}));
}

TEST(DetectorDecode, VeryNegativeLogitsGiveZeroConfidence) {
  std::vector<double> raw(5 * 4, 0.0);
  for (int c = 0; c < 4; ++c) raw[c] = -std::numeric_limits<double>::infinity();
  for (const auto& d : detector_decode<double>(raw, 2, 2, 8, 16, 16)) EXPECT_EQ(d.confidence, 0.0);
}

// ---------------------------------------------------------------------------
// Checkpoints

TEST(Checkpoint, SegmenterAndDetectorRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "dseg_test_nn";
  std::filesystem::create_directories(dir);
  const SegmenterModel seg(SegmenterConfig{SegmenterVariant::unet_lite, 2, 4, 16}, 9);
  data::write_file_atomic(dir / "s.ckpt", encode(seg, 9, 4.5));
  const auto [seg2, hdr] = load_segmenter(dir / "s.ckpt");
  EXPECT_EQ(hdr.kind, "segmenter");
  EXPECT_EQ(hdr.seed, 9u);
  EXPECT_EQ(hdr.class_weight, 4.5);
  Image img(16, 16, 0.3f);
  img.at(4, 5, 1) = 0.9f;
  EXPECT_EQ(seg.predict(img), seg2.predict(img));

  const DetectorModel det(DetectorConfig{8, 4, 2}, 3);
  data::write_file_atomic(dir / "d.ckpt", encode(det, 3));
  const auto [det2, dh] = load_detector(dir / "d.ckpt");
  EXPECT_EQ(det2.config().context_layers, 2);
  EXPECT_EQ(detect(det, img), detect(det2, img));

  EXPECT_THROW(load_detector(dir / "s.ckpt"), load_error);
  data::write_file_atomic(dir / "junk.ckpt", "not a checkpoint at all");
  EXPECT_THROW(load_segmenter(dir / "junk.ckpt"), load_error);
  auto bytes = read_file_bytes(dir / "s.ckpt");
  data::write_file_atomic(dir / "trunc.ckpt", bytes.substr(0, bytes.size() - 10));
  EXPECT_THROW(load_segmenter(dir / "trunc.ckpt"), load_error);
}
