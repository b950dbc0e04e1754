#pragma once

// Deterministic synthetic corpora. Clean images are smooth colored textures
// with soft shapes, grouped into scenes: every scene is rendered
// `variants_per_scene` times with small jitter, like repeated photos of one
// object. Copyrighted targets are clean images with a stroked "A" glyph
// composited on top.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "disguise/distances.hpp"
#include "disguise/errors.hpp"
#include "disguise/tensor.hpp"

namespace disguise {

struct FixtureSpec {
  int height = 64;
  int width = 64;
  int corpus_count = 100;
  int triple_count = 10;
  int variants_per_scene = 4;
  double variant_jitter = 0.12;  // scale of per-variant shape shift / tint / texture change
  std::uint64_t texture_seed = 1;
  // Glyph box, as fractions of the image: center and side length.
  double glyph_center_x = 0.5;
  double glyph_center_y = 0.5;
  double glyph_size = 0.7;
  double stroke_width = 3.0;  // pixels
  std::array<double, 3> overlay_color{1.0, 0.1, 0.8};
  double overlay_opacity = 0.35;
  // Bases on which the glyph changes the image by less than this D1 are
  // skipped when drawing triples.
  double min_glyph_d1 = 0.25;

  int scene_count() const { return (corpus_count + variants_per_scene - 1) / variants_per_scene; }

  void validate() const {
    if (height < 4 || width < 4) throw ContractError("fixtures: image must be at least 4x4");
    if (corpus_count < 1 || triple_count < 1) throw ContractError("fixtures: counts must be >= 1");
    if (variants_per_scene < 1) throw ContractError("fixtures: variants_per_scene must be >= 1");
    if (variant_jitter < 0.0) throw ContractError("fixtures: variant_jitter must be >= 0");
    if (triple_count > scene_count()) throw ContractError("fixtures: more triples than scenes");
    if (!(glyph_size > 0.0) || !(stroke_width > 0.0)) throw ContractError("fixtures: glyph must be non-empty");
    const double half = glyph_size / 2.0;
    if (glyph_center_x - half < 0.0 || glyph_center_x + half > 1.0 || glyph_center_y - half < 0.0 ||
        glyph_center_y + half > 1.0)
      throw ContractError("fixtures: glyph box exceeds image bounds");
    for (double c : overlay_color)
      if (c < 0.0 || c > 1.0) throw ContractError("fixtures: overlay color outside [0,1]");
    if (overlay_opacity <= 0.0 || overlay_opacity > 1.0) throw ContractError("fixtures: opacity must be in (0,1]");
    if (!(min_glyph_d1 >= 0.0) || min_glyph_d1 > 2.0) throw ContractError("fixtures: min_glyph_d1 must be in [0,2]");
  }
};

struct Triple {
  Image target;  // x_c
  Image base;    // x_b
  std::size_t base_index = 0;
};

namespace detail {

inline std::mt19937_64 image_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

inline double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double t = std::clamp(((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
  const double qx = ax + t * dx - px, qy = ay + t * dy - py;
  return std::sqrt(qx * qx + qy * qy);
}

inline Image make_clean_image(const FixtureSpec& spec, std::size_t index) {
  const std::size_t scene = index / static_cast<std::size_t>(spec.variants_per_scene);
  auto rng = image_rng(spec.texture_seed, scene, 0);
  auto vrng = image_rng(spec.texture_seed, index, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int H = spec.height, W = spec.width;
  const double jitter = spec.variant_jitter;

  std::array<double, 3> base{};
  for (double& c : base) c = 0.2 + 0.6 * unit(rng);
  for (double& c : base) c += 0.02 * jitter * noise(vrng);

  // Low-frequency texture: bilinear interpolation of a coarse random grid.
  constexpr int kGrid = 5;
  const double amplitude = 0.11 + 0.05 * unit(rng);
  std::array<std::array<std::array<double, 3>, kGrid>, kGrid> grid{};
  for (auto& row : grid)
    for (auto& cell : row)
      for (double& c : cell) c = amplitude * noise(rng);
  for (auto& row : grid)
    for (auto& cell : row)
      for (double& c : cell) c += 0.02 * jitter * noise(vrng);

  struct Blob {
    double cx, cy, rx, ry;
    std::array<double, 3> color;
    bool box;
  };
  std::vector<Blob> blobs(1 + static_cast<std::size_t>(unit(rng) * 2.0));
  for (auto& b : blobs) {
    b.cx = W * (0.2 + 0.6 * unit(rng));
    b.cy = H * (0.2 + 0.6 * unit(rng));
    b.rx = W * (0.1 + 0.15 * unit(rng));
    b.ry = H * (0.1 + 0.15 * unit(rng));
    for (double& c : b.color) c = 0.15 + 0.7 * unit(rng);
    b.box = unit(rng) < 0.4;
  }
  for (auto& b : blobs) {
    b.cx += 0.02 * W * jitter * noise(vrng);
    b.cy += 0.02 * H * jitter * noise(vrng);
  }

  Image img(Shape{H, W, 3});
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double gx = (x + 0.5) / W * (kGrid - 1), gy = (y + 0.5) / H * (kGrid - 1);
      const int x0 = std::min(static_cast<int>(gx), kGrid - 2), y0 = std::min(static_cast<int>(gy), kGrid - 2);
      const double fx = gx - x0, fy = gy - y0;
      for (int c = 0; c < 3; ++c) {
        const double t = (1 - fx) * (1 - fy) * grid[y0][x0][c] + fx * (1 - fy) * grid[y0][x0 + 1][c] +
                         (1 - fx) * fy * grid[y0 + 1][x0][c] + fx * fy * grid[y0 + 1][x0 + 1][c];
        double v = base[c] + t;
        for (const auto& b : blobs) {
          const double dx = (x + 0.5 - b.cx) / b.rx, dy = (y + 0.5 - b.cy) / b.ry;
          const double r = b.box ? std::max(std::abs(dx), std::abs(dy)) : std::sqrt(dx * dx + dy * dy);
          const double inside = 1.0 - smoothstep(0.85, 1.15, r);
          v = (1.0 - inside) * v + inside * b.color[static_cast<std::size_t>(c)];
        }
        img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

}  // namespace detail

/// Binary stroke mask (1 on the glyph support) of the "A" symbol.
inline Tensor<float> glyph_mask(const FixtureSpec& spec) {
  spec.validate();
  const int H = spec.height, W = spec.width;
  const double side = spec.glyph_size * std::min(H, W);
  const double left = spec.glyph_center_x * W - side / 2.0, top = spec.glyph_center_y * H - side / 2.0;
  auto pt = [&](double u, double v) { return std::array<double, 2>{left + u * side, top + v * side}; };
  const std::array<std::array<std::array<double, 2>, 2>, 3> strokes{{
      {pt(0.5, 0.0), pt(0.05, 1.0)},
      {pt(0.5, 0.0), pt(0.95, 1.0)},
      {pt(0.25, 0.6), pt(0.75, 0.6)},
  }};
  Tensor<float> mask(Shape{H, W, 1});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      for (const auto& s : strokes)
        if (detail::segment_distance(px, py, s[0][0], s[0][1], s[1][0], s[1][1]) <= spec.stroke_width / 2.0) {
          mask.at(y, x, 0) = 1.0f;
          break;
        }
    }
  return mask;
}

/// Composites the overlay color over `base` on the glyph support.
inline Image apply_glyph(const FixtureSpec& spec, const Image& base, const Tensor<float>& mask) {
  if (base.height() != spec.height || base.width() != spec.width || base.channels() != 3)
    throw ShapeError("apply_glyph: base dims " + base.shape().str() + " do not match the fixture spec");
  Image out = base;
  const double a = spec.overlay_opacity;
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      if (mask.at(y, x, 0) == 0.0f) continue;
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = static_cast<float>((1.0 - a) * base.at(y, x, c) + a * spec.overlay_color[c]);
    }
  return out;
}

inline std::vector<Image> make_clean_corpus(const FixtureSpec& spec) {
  spec.validate();
  std::vector<Image> corpus;
  corpus.reserve(static_cast<std::size_t>(spec.corpus_count));
  for (int i = 0; i < spec.corpus_count; ++i) corpus.push_back(detail::make_clean_image(spec, static_cast<std::size_t>(i)));
  return corpus;
}

/// Draws bases from `triple_count` distinct scenes of the corpus (first
/// variant of each) and stamps the glyph on each to form its target. Scenes
/// where the glyph is barely visible (D1 below min_glyph_d1) are skipped.
inline std::vector<Triple> make_triples(const FixtureSpec& spec, std::span<const Image> corpus) {
  spec.validate();
  if (corpus.size() != static_cast<std::size_t>(spec.corpus_count))
    throw ContractError("make_triples: corpus has " + std::to_string(corpus.size()) + " images, spec says " +
                        std::to_string(spec.corpus_count));
  std::vector<std::size_t> scenes(static_cast<std::size_t>(spec.scene_count()));
  std::iota(scenes.begin(), scenes.end(), std::size_t{0});
  auto rng = detail::image_rng(spec.texture_seed, 0, 1);
  std::shuffle(scenes.begin(), scenes.end(), rng);
  const auto mask = glyph_mask(spec);
  std::vector<Triple> triples;
  for (std::size_t scene : scenes) {
    if (triples.size() == static_cast<std::size_t>(spec.triple_count)) break;
    const std::size_t idx = scene * static_cast<std::size_t>(spec.variants_per_scene);
    Image target = apply_glyph(spec, corpus[idx], mask);
    if (d1(target, corpus[idx]) < spec.min_glyph_d1) continue;
    triples.push_back({std::move(target), corpus[idx], idx});
  }
  if (triples.size() < static_cast<std::size_t>(spec.triple_count))
    throw ContractError("make_triples: only " + std::to_string(triples.size()) + " scenes meet the glyph visibility floor");
  return triples;
}

}  // namespace disguise
