#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "disguise/forge.hpp"
#include "../common/gradient_cases.hpp"
#include "test_support.hpp"

using namespace disguise;
using disguise::testing::compare_gradients;
using disguise::testing::random_tensor;

namespace disguise {
void PrintTo(Variant v, std::ostream* os) { *os << variant_name(v); }
}  // namespace disguise

namespace {

const Shape kSmall{16, 16, 3};

// Mirror the left half onto the right half.
Image mirrored(Image x) {
  const int W = x.width();
  for (int y = 0; y < x.height(); ++y)
    for (int i = 0; i < W / 2; ++i)
      for (int c = 0; c < 3; ++c) x.at(y, W - 1 - i, c) = x.at(y, i, c);
  return x;
}

DisguiseConfig fixed_steps(int epochs, Variant v = Variant::standard) {
  DisguiseConfig cfg;
  cfg.alpha = 0.5;
  cfg.eta = 0.3;
  cfg.gamma1 = 1e-9;
  cfg.gamma2 = 1e-9;
  cfg.max_epochs = epochs;
  cfg.variant = v;
  cfg.log_every = 1;
  return cfg;
}

}  // namespace

TEST(Forge, TargetEqualsBaseConvergesImmediately) {
  const Weights w = init_weights(1);
  const auto x = random_tensor<float>(kSmall, 2);
  for (auto v : {Variant::standard, Variant::flip_robust, Variant::evasion}) {
    DisguiseConfig cfg;
    cfg.variant = v;
    const auto r = generate_disguise(w, x, x, cfg);
    EXPECT_TRUE(r.converged) << variant_name(v);
    EXPECT_EQ(r.epochs_run, 0);
    EXPECT_EQ(r.disguise, x);
    ASSERT_EQ(r.trace.size(), 1u);
    EXPECT_LE(r.trace[0].d1, 1e-6);
    EXPECT_LE(r.trace[0].d2, 1e-5);
    EXPECT_LE(r.trace[0].d2_flip, 1e-5);
  }
}

TEST(Forge, MatchesFiniteDifferenceDrivenReference) {
  const Weights w = init_weights(5);
  const auto target = random_tensor<float>(kSmall, 10);
  const auto base = random_tensor<float>(kSmall, 11);
  const auto cfg = fixed_steps(50);
  const auto r = generate_disguise(w, target, base, cfg);
  ASSERT_EQ(r.epochs_run, 50);

  // Same loop in double with gradients taken only from central differences.
  const DisguiseObjective<double> obj(w.cast<double>(), target.cast<double>(), base.cast<double>(),
                                      Variant::standard, cfg.alpha);
  auto x = base.cast<double>();
  for (int e = 0; e < 50; ++e) {
    const auto g = finite_difference_grad(obj, x, 1e-4);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i] - cfg.eta * g[i], 0.0, 1.0);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - r.disguise[i]));
  EXPECT_LE(worst, 1e-3);
}

TEST(Forge, SymmetricPairKeepsFlipTermEqualEveryEpoch) {
  // Mirror-symmetric x_c and x_b make the flip objective invariant under
  // hflip, so x_d stays symmetric and both feature terms coincide.
  const Weights w = init_weights(3);
  const auto target = mirrored(random_tensor<float>(kSmall, 1));
  const auto base = mirrored(random_tensor<float>(kSmall, 2));
  const auto r = generate_disguise(w, target, base, fixed_steps(30, Variant::flip_robust));
  ASSERT_EQ(r.trace.size(), 31u);
  for (const auto& e : r.trace) EXPECT_NEAR(e.d2, e.d2_flip, 1e-6) << "epoch " << e.epoch;
  EXPECT_LT(r.trace.back().d2, r.trace.front().d2);
}

TEST(Forge, FlipTermIsStandardTermOnMirroredInputs) {
  const auto w = init_weights(4).cast<double>();
  const auto xc = random_tensor(kSmall, 3), xb = random_tensor(kSmall, 4), xd = random_tensor(kSmall, 5);
  Graph<double> g;
  auto flip = [&](const Tensor<double>& t) { return g.value(g.hflip(g.constant(t))); };
  const DisguiseObjective<double> flipped(w, xc, xb, Variant::flip_robust, 0.7);
  const DisguiseObjective<double> mirror(w, flip(xc), flip(xb), Variant::standard, 0.7);
  EXPECT_NEAR(flipped.evaluate(xd, false).d2_flip, mirror.evaluate(flip(xd), false).d2, 1e-12);
}

TEST(Forge, IteratesStayInUnitBox) {
  const Weights w = init_weights(6);
  auto cfg = fixed_steps(20);
  cfg.eta = 50.0;  // large steps push against the box
  const auto r = generate_disguise(w, random_tensor<float>(kSmall, 1), random_tensor<float>(kSmall, 2), cfg);
  EXPECT_TRUE(r.disguise.within_unit_interval());
  std::size_t at_edge = 0;
  for (float v : r.disguise.data()) at_edge += v == 0.0f || v == 1.0f;
  EXPECT_GT(at_edge, 0u);
}

TEST(Forge, TraceReportsTheReturnedDisguise) {
  const Weights w = init_weights(7);
  const auto target = random_tensor<float>(kSmall, 8), base = random_tensor<float>(kSmall, 9);
  for (auto v : {Variant::standard, Variant::flip_robust, Variant::evasion}) {
    const auto cfg = fixed_steps(12, v);
    const auto r = generate_disguise(w, target, base, cfg);
    const DisguiseObjective<float> obj(w, target, base, v, cfg.alpha);
    const auto t = obj.evaluate(r.disguise, false);
    const auto& last = r.trace.back();
    EXPECT_EQ(last.epoch, r.epochs_run);
    EXPECT_NEAR(last.d1, t.d1, 1e-6);
    EXPECT_NEAR(last.d2, t.d2, 1e-6);
    EXPECT_NEAR(last.d2_flip, t.d2_flip, 1e-6);
    EXPECT_NEAR(last.reconstruction, t.reconstruction, 1e-6);
    EXPECT_NEAR(last.loss, t.total, 1e-6);
  }
}

TEST(Forge, SeededRunsAreBitIdentical) {
  const Weights w = init_weights(2);
  const auto target = random_tensor<float>(kSmall, 1), base = random_tensor<float>(kSmall, 2);
  auto cfg = fixed_steps(10);
  cfg.init = InitMode::gaussian(0.2);
  cfg.seed = 99;
  const auto a = generate_disguise(w, target, base, cfg);
  const auto b = generate_disguise(w, target, base, cfg);
  EXPECT_EQ(a.disguise, b.disguise);
  cfg.optimizer = OptimizerKind::adam;
  EXPECT_EQ(generate_disguise(w, target, base, cfg).disguise, generate_disguise(w, target, base, cfg).disguise);
}

TEST(Forge, InitModes) {
  const auto base = random_tensor<float>(kSmall, 4);
  EXPECT_EQ(init_disguise(InitMode::base(), base, 0), base);
  const auto zeros = init_disguise(InitMode::zeros(), base, 0);
  for (float v : zeros.data()) EXPECT_EQ(v, 0.0f);
  const auto g1 = init_disguise(InitMode::gaussian(0.1), base, 5);
  EXPECT_EQ(g1, init_disguise(InitMode::gaussian(0.1), base, 5));
  EXPECT_FALSE(g1 == init_disguise(InitMode::gaussian(0.1), base, 6));
  EXPECT_TRUE(g1.within_unit_interval());
  double mean = 0;
  for (float v : g1.data()) mean += v;
  EXPECT_NEAR(mean / static_cast<double>(g1.size()), 0.5, 0.02);
  EXPECT_THROW(init_disguise(InitMode::gaussian(0.0), base, 0), ContractError);
  EXPECT_EQ(InitMode::zeros().str(), "zeros");
}

TEST(Forge, ContractAndShapeErrors) {
  const Weights w = init_weights(1);
  const auto x = random_tensor<float>(kSmall, 1);
  DisguiseConfig cfg;
  cfg.max_epochs = 0;
  EXPECT_THROW(generate_disguise(w, x, x, cfg), ContractError);
  cfg = {};
  cfg.alpha = -1;
  EXPECT_THROW(generate_disguise(w, x, x, cfg), ContractError);
  cfg = {};
  EXPECT_THROW(generate_disguise(w, x, random_tensor<float>(Shape{32, 32, 3}, 1), cfg), ShapeError);
  EXPECT_THROW(generate_disguise(w, Image(Shape{18, 16, 3}), Image(Shape{18, 16, 3}), cfg), ShapeError);
}

TEST(Forge, NonFiniteLossAbortsWithTrace) {
  Weights w = init_weights(1);
  w.encoder[0].kernel[0] = std::numeric_limits<float>::quiet_NaN();
  const auto target = random_tensor<float>(kSmall, 1), base = random_tensor<float>(kSmall, 2);
  try {
    generate_disguise(w, target, base, DisguiseConfig{});
    FAIL() << "expected abort";
  } catch (const DisguiseAborted& e) {
    ASSERT_EQ(e.partial().trace.size(), 1u);
    EXPECT_TRUE(std::isnan(e.partial().trace[0].loss));
    EXPECT_EQ(e.partial().disguise, base);
  }
}

TEST(Forge, AlphaEndpoints) {
  const Weights w = init_weights(8);
  const auto target = random_tensor<float>(kSmall, 1), base = random_tensor<float>(kSmall, 2);
  auto cfg = fixed_steps(40);
  cfg.alpha = 1e9;
  const auto stealthy = generate_disguise(w, target, base, cfg);
  for (const auto& e : stealthy.trace) EXPECT_LE(e.d1, 1e-3);
  cfg.alpha = 0.0;
  const auto free = generate_disguise(w, target, base, cfg);
  EXPECT_LT(free.trace.back().d2, stealthy.trace.back().d2);
}

class ForgeLossGradient : public ::testing::TestWithParam<Variant> {};

TEST_P(ForgeLossGradient, MatchesCentralDifferences) {
  const auto w = init_weights(12).cast<double>();
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto xc = random_tensor(kSmall, 100 + s), xb = random_tensor(kSmall, 200 + s);
    const auto xd = gradcases::forge_point(kSmall, 300 + s, xb);
    const DisguiseObjective<double> obj(w, xc, xb, GetParam(), 0.8);
    const auto analytic = obj.evaluate(xd, true).grad;
    const auto r = compare_gradients(analytic, finite_difference_grad(obj, xd, 1e-4));
    EXPECT_LE(r.worst, 1e-3) << "seed " << s;
    EXPECT_GT(r.checked, xd.size() / 2);
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, ForgeLossGradient,
                         ::testing::Values(Variant::standard, Variant::flip_robust, Variant::evasion),
                         [](const auto& info) { return std::string(variant_name(info.param)); });
