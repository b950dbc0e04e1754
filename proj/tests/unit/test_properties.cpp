// Randomised property checks across modules. Each property runs over a fixed
// family of seeds so failures reproduce.
#include <gtest/gtest.h>

#include <random>

#include "disguise/audit.hpp"
#include "disguise/dtns.hpp"
#include "disguise/fixtures.hpp"
#include "test_support.hpp"

using namespace disguise;
using disguise::testing::random_normal;
using disguise::testing::random_tensor;

namespace {

Shape random_shape(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> rank(1, 4), dim(1, 7);
  Shape s;
  for (int r = rank(rng); r > 0; --r) s.push(dim(rng));
  return s;
}

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, int levels) {
  std::uniform_int_distribution<int> lv(0, levels);
  std::vector<double> v(n);
  for (auto& x : v) x = lv(rng) / static_cast<double>(levels);
  return v;
}

}  // namespace

TEST(Properties, DtnsRoundTripAnyShape) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const Shape s = random_shape(rng);
    const auto t = random_normal<float>(s, static_cast<std::uint64_t>(i), 10.0);
    const auto bytes = io::encode_dtns(t);
    EXPECT_EQ(bytes.size(), 6 + 4 * static_cast<std::size_t>(s.rank()) + 4 * t.size());
    EXPECT_EQ(io::decode_dtns(bytes), t);
  }
}

TEST(Properties, D1SymmetricAndFlipInvariant) {
  for (std::uint64_t s = 0; s < 8; ++s) {
    const auto a = random_tensor<float>(Shape{32, 32, 3}, s), b = random_tensor<float>(Shape{32, 32, 3}, s + 50);
    EXPECT_NEAR(d1(a, b), d1(b, a), 1e-6);
    Graph<float> g;
    const Image fa = g.value(g.hflip(g.constant(a)));
    const Image fb = g.value(g.hflip(g.constant(b)));
    EXPECT_NEAR(d1(a, b), d1(fa, fb), 1e-5);
  }
}

TEST(Properties, D2IsAlmostAMetric) {
  // sqrt(mean + eps) adds at most sqrt(eps) slack to the triangle inequality.
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = random_normal<float>(Shape{4, 4, 4}, s, 1.0);
    const auto b = random_normal<float>(Shape{4, 4, 4}, s + 1000, 1.0);
    const auto c = random_normal<float>(Shape{4, 4, 4}, s + 2000, 1.0);
    EXPECT_LE(d2(a, c), d2(a, b) + d2(b, c) + 1e-5);
    EXPECT_GE(d2(a, b), 0.0);
  }
}

TEST(Properties, AurocComplementAndMonotoneInvariance) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_scores(rng, 1 + rng() % 20, 8), n = random_scores(rng, 1 + rng() % 20, 8);
    EXPECT_NEAR(auroc(p, n) + auroc(n, p), 1.0, 1e-12);
    auto warp = [](std::vector<double> v) {
      for (auto& x : v) x = std::exp(3.0 * x) - 7.0;
      return v;
    };
    EXPECT_NEAR(auroc(p, n), auroc(warp(p), warp(n)), 1e-12);
  }
}

TEST(Properties, CalibratedThresholdHasNoFalseNegatives) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> d(1 + rng() % 15);
    for (auto& x : d) x = u(rng);
    const double z = calibrate_threshold(d);
    EXPECT_EQ(fnr(d, z), 0.0);
    EXPECT_GT(fnr(d, std::nextafter(z, 2.0)), 0.0);
  }
}

TEST(Properties, QuantileIsMonotoneAndBounded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> v(1 + rng() % 30);
    for (auto& x : v) x = u(rng);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    double prev = -1e9;
    for (double q = 0.0; q <= 1.0; q += 0.05) {
      const double x = quantile(v, q);
      EXPECT_GE(x, prev);
      EXPECT_GE(x, *lo);
      EXPECT_LE(x, *hi);
      prev = x;
    }
  }
}

TEST(Properties, CodecShapesForAnyValidExtent) {
  const Weights w = init_weights(1);
  for (int h : {16, 20, 32})
    for (int wd : {16, 24}) {
      const auto x = random_tensor<float>(Shape{h, wd, 3}, static_cast<std::uint64_t>(h * wd));
      const auto z = encode(w, x);
      EXPECT_EQ(z.shape(), (Shape{h / 4, wd / 4, 4}));
      const auto r = decode(w, z);
      EXPECT_EQ(r.shape(), x.shape());
      for (float v : r.data()) {
        EXPECT_GT(v, 0.0f);
        EXPECT_LT(v, 1.0f);
      }
    }
}

TEST(Properties, WeightArchiveRoundTripAnySeed) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Weights w = init_weights(s);
    EXPECT_TRUE(decode_weights(encode_weights(w)) == w);
    EXPECT_EQ(encode_weights(w), encode_weights(decode_weights(encode_weights(w))));
  }
}

TEST(Properties, FixturesDependOnlyOnSpec) {
  for (std::uint64_t seed : {0u, 7u, 123u}) {
    FixtureSpec s;
    s.height = 16;
    s.width = 16;
    s.corpus_count = 12;
    s.triple_count = 2;
    s.texture_seed = seed;
    s.min_glyph_d1 = 0.1;
    const auto a = make_clean_corpus(s), b = make_clean_corpus(s);
    ASSERT_EQ(a.size(), 12u);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
    const auto ta = make_triples(s, a), tb = make_triples(s, b);
    for (std::size_t i = 0; i < ta.size(); ++i) {
      EXPECT_EQ(ta[i].target, tb[i].target);
      EXPECT_EQ(ta[i].base_index, tb[i].base_index);
    }
  }
}

TEST(Properties, ScreenFlagsMonotoneInGamma) {
  const Weights w = init_weights(9);
  const auto target = random_tensor<float>(Shape{16, 16, 3}, 1);
  std::vector<Sample> ds;
  for (int i = 0; i < 12; ++i) ds.push_back({std::to_string(i), random_tensor<float>(Shape{16, 16, 3}, 10 + i)});
  std::vector<bool> prev(ds.size(), false);
  for (double g2 = 0.0; g2 <= 0.5; g2 += 0.01) {
    const auto rep = feature_screen(w, target, ds, g2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (prev[i]) EXPECT_TRUE(rep.entries[i].suspect) << "gamma2 " << g2;
      prev[i] = rep.entries[i].suspect;
    }
  }
}

TEST(Properties, CalibratedExamHasNoFalseNegatives) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Weights w = init_weights(s);
    std::vector<Sample> known;
    std::vector<double> losses;
    for (int i = 0; i < 6; ++i) {
      known.push_back({std::to_string(i), random_tensor<float>(Shape{16, 16, 3}, 100 * s + i)});
      losses.push_back(reconstruction_loss(w, known.back().image));
    }
    const auto rep = encoder_decoder_exam(w, known, calibrate_threshold(losses));
    for (const auto& e : rep.entries) EXPECT_TRUE(e.disguise);
  }
}
