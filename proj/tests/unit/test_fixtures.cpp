#include <gtest/gtest.h>

#include "disguise/fixtures.hpp"
#include "disguise/serialization.hpp"

using namespace disguise;

namespace {

FixtureSpec small_spec() {
  FixtureSpec s;
  s.height = 32;
  s.width = 32;
  s.corpus_count = 40;
  s.triple_count = 4;
  return s;
}

}  // namespace

TEST(Fixtures, CorpusIsDeterministicAndSized) {
  FixtureSpec s;
  const auto a = make_clean_corpus(s);
  ASSERT_EQ(a.size(), 100u);
  const auto b = make_clean_corpus(s);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_EQ(a[0].shape(), (Shape{64, 64, 3}));
  s.texture_seed = 2;
  EXPECT_FALSE(make_clean_corpus(s)[0] == a[0]);
}

TEST(Fixtures, ImagesAreValidAndHistogramIsWide) {
  const auto corpus = make_clean_corpus(FixtureSpec{});
  constexpr int kBins = 20;
  std::array<bool, kBins> hit{};
  for (const auto& img : corpus) {
    EXPECT_TRUE(img.within_unit_interval());
    for (float v : img.data()) hit[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>(v * kBins)))] = true;
  }
  EXPECT_GT(std::count(hit.begin(), hit.end(), true), kBins / 2);
}

TEST(Fixtures, VariantsOfOneSceneAreCloserThanOtherScenes) {
  const auto corpus = make_clean_corpus(small_spec());
  auto mad = [](const Image& a, const Image& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  };
  double within = 0, across = 0;
  for (std::size_t s = 0; s + 1 < 10; ++s) {
    within += mad(corpus[4 * s], corpus[4 * s + 1]);
    across += mad(corpus[4 * s], corpus[4 * (s + 1)]);
  }
  EXPECT_LT(within, across / 3);
}

TEST(Fixtures, GlyphMaskInsideBoundsAndNonEmpty) {
  const auto s = small_spec();
  const auto mask = glyph_mask(s);
  int on = 0;
  for (float v : mask.data()) {
    EXPECT_TRUE(v == 0.0f || v == 1.0f);
    on += v == 1.0f;
  }
  EXPECT_GT(on, 20);
  FixtureSpec bad = s;
  bad.glyph_center_x = 0.9;
  EXPECT_THROW(glyph_mask(bad), ContractError);
}

TEST(Fixtures, TriplesDifferExactlyOnGlyph) {
  const auto s = small_spec();
  const auto corpus = make_clean_corpus(s);
  const auto triples = make_triples(s, corpus);
  ASSERT_EQ(triples.size(), 4u);
  const auto mask = glyph_mask(s);
  std::vector<std::size_t> used;
  for (const auto& t : triples) {
    EXPECT_EQ(t.base, corpus[t.base_index]);
    EXPECT_GT(d1(t.target, t.base), s.min_glyph_d1 - 1e-12);
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        for (int c = 0; c < 3; ++c) {
          if (mask.at(y, x, 0) == 0.0f) EXPECT_EQ(t.target.at(y, x, c), t.base.at(y, x, c));
        }
    used.push_back(t.base_index / static_cast<std::size_t>(s.variants_per_scene));
  }
  std::sort(used.begin(), used.end());
  EXPECT_EQ(std::unique(used.begin(), used.end()), used.end()) << "bases must come from distinct scenes";
}

TEST(Fixtures, ContractViolations) {
  FixtureSpec s = small_spec();
  s.corpus_count = 0;
  EXPECT_THROW(s.validate(), ContractError);
  s = small_spec();
  s.triple_count = 11;  // only 10 scenes
  EXPECT_THROW(s.validate(), ContractError);
  s = small_spec();
  const auto corpus = make_clean_corpus(s);
  s.corpus_count = 41;
  EXPECT_THROW(make_triples(s, corpus), ContractError);
  s = small_spec();
  s.min_glyph_d1 = 1.9;
  EXPECT_THROW(make_triples(s, corpus), ContractError);
}

TEST(Fixtures, SpecJsonRoundTrip) {
  FixtureSpec s = small_spec();
  s.overlay_color = {0.2, 0.9, 0.1};
  const auto back = fixture_spec_from_json(to_json(s));
  EXPECT_EQ(to_json(back).dump(), to_json(s).dump());
  EXPECT_THROW(fixture_spec_from_json(Json{{"colour", 1}}), ContractError);
  EXPECT_EQ(fixture_spec_from_json(Json::object()).height, 64);
}
