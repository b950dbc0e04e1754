#pragma once

// Disguise detection.
//
//  * feature_screen: with the copyrighted target in hand, flag every sample
//    whose latent lies within gamma2 of E(x_c).
//  * encoder_decoder_exam: without the target, flag samples whose
//    reconstruction loss D1(D(E(x)), x) reaches the threshold zeta.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "disguise/codec.hpp"
#include "disguise/distances.hpp"
#include "disguise/errors.hpp"
#include "disguise/tensor.hpp"

namespace disguise {

struct Sample {
  std::string id;
  Image image;
};

struct ScreenEntry {
  std::string id;
  double distance = 0.0;
  bool suspect = false;
};

struct ScreenReport {
  double gamma2 = 0.0;
  std::vector<ScreenEntry> entries;
};

struct ExamEntry {
  std::string id;
  Image reconstruction;
  double loss = 0.0;
  bool disguise = false;
};

struct ExamReport {
  double zeta = 0.0;
  std::vector<ExamEntry> entries;
};

struct MetricsSummary {
  double mean_disguise_loss = 0.0;
  double mean_clean_loss = 0.0;
  double zeta = 0.0;
  std::size_t disguise_count = 0;
  std::size_t clean_count = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double false_positive_rate = 0.0;
  double false_negative_rate = 0.0;
  double auroc = 0.0;
};

namespace detail {

inline void check_uniform(std::span<const Sample> samples, const char* what) {
  for (const auto& s : samples) {
    check_image_dims(s.image.shape(), what);
    if (!(s.image.shape() == samples.front().image.shape()))
      throw ShapeError(std::string(what) + ": sample '" + s.id + "' has dims " + s.image.shape().str() +
                       ", expected " + samples.front().image.shape().str());
  }
}

}  // namespace detail

inline ScreenReport feature_screen(const Weights& w, const Image& target, std::span<const Sample> dataset,
                                   double gamma2) {
  if (dataset.empty()) throw ContractError("feature_screen: dataset is empty");
  if (!(gamma2 >= 0.0)) throw ContractError("feature_screen: gamma2 must be >= 0");
  detail::check_uniform(dataset, "feature_screen");
  if (!(target.shape() == dataset.front().image.shape()))
    throw ShapeError("feature_screen: target dims " + target.shape().str() + " vs dataset " +
                     dataset.front().image.shape().str());
  const Latent zt = encode(w, target);
  ScreenReport report{gamma2, {}};
  report.entries.reserve(dataset.size());
  for (const auto& s : dataset) {
    const double dist = d2(zt, encode(w, s.image));
    report.entries.push_back({s.id, dist, dist <= gamma2});
  }
  return report;
}

/// Reconstructs every sample and applies the rule: disguise iff loss >= zeta.
inline ExamReport encoder_decoder_exam(const Weights& w, std::span<const Sample> samples, double zeta) {
  if (!(zeta >= 0.0)) throw ContractError("encoder_decoder_exam: zeta must be >= 0");
  detail::check_uniform(samples, "encoder_decoder_exam");
  ExamReport report{zeta, {}};
  report.entries.reserve(samples.size());
  for (const auto& s : samples) {
    Image recon = reconstruct(w, s.image);
    const double loss = d1(recon, s.image);
    report.entries.push_back({s.id, std::move(recon), loss, loss >= zeta});
  }
  return report;
}

/// Lowest reconstruction loss among known disguises: zero false negatives on
/// the calibration set.
inline double calibrate_threshold(std::span<const double> disguise_losses) {
  if (disguise_losses.empty()) throw ContractError("calibrate_threshold: no disguise losses");
  for (double l : disguise_losses)
    if (!(l >= 0.0)) throw ContractError("calibrate_threshold: losses must be non-negative");
  return *std::min_element(disguise_losses.begin(), disguise_losses.end());
}

/// P(random positive > random negative) with ties counted one half, from
/// mid-ranks of the pooled scores.
inline double auroc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw ContractError("auroc: both score lists must be non-empty");
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.push_back({s, true});
  for (double s : negative) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });

  // Twice the rank sum of positives keeps tie mid-ranks integral.
  long double rank_sum_x2 = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const long double mid_x2 = static_cast<long double>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].positive) rank_sum_x2 += mid_x2;
    i = j;
  }
  const long double np = static_cast<long double>(positive.size());
  const long double nn = static_cast<long double>(negative.size());
  const long double u = rank_sum_x2 / 2 - np * (np + 1) / 2;
  return static_cast<double>(u / (np * nn));
}

/// Fraction of clean samples at or above zeta.
inline double fpr(std::span<const double> clean_losses, double zeta) {
  if (clean_losses.empty()) throw ContractError("fpr: no clean losses");
  const auto n = std::count_if(clean_losses.begin(), clean_losses.end(), [&](double l) { return l >= zeta; });
  return static_cast<double>(n) / static_cast<double>(clean_losses.size());
}

/// Fraction of disguises below zeta.
inline double fnr(std::span<const double> disguise_losses, double zeta) {
  if (disguise_losses.empty()) throw ContractError("fnr: no disguise losses");
  const auto n =
      std::count_if(disguise_losses.begin(), disguise_losses.end(), [&](double l) { return l < zeta; });
  return static_cast<double>(n) / static_cast<double>(disguise_losses.size());
}

inline MetricsSummary summarize(std::span<const double> disguise_losses, std::span<const double> clean_losses,
                                double zeta) {
  if (disguise_losses.empty() || clean_losses.empty())
    throw ContractError("summarize: need both disguise and clean losses");
  MetricsSummary m;
  m.zeta = zeta;
  m.disguise_count = disguise_losses.size();
  m.clean_count = clean_losses.size();
  auto mean = [](std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  m.mean_disguise_loss = mean(disguise_losses);
  m.mean_clean_loss = mean(clean_losses);
  m.false_positive_rate = fpr(clean_losses, zeta);
  m.false_negative_rate = fnr(disguise_losses, zeta);
  m.false_positives = static_cast<std::size_t>(
      std::count_if(clean_losses.begin(), clean_losses.end(), [&](double l) { return l >= zeta; }));
  m.false_negatives = static_cast<std::size_t>(
      std::count_if(disguise_losses.begin(), disguise_losses.end(), [&](double l) { return l < zeta; }));
  m.auroc = auroc(disguise_losses, clean_losses);
  return m;
}

/// Linear-interpolated quantile (q in [0,1]) of the values.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile: no values");
  if (q < 0.0 || q > 1.0) throw ContractError("quantile: q must be in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Feature threshold for auditors who do not know the generation gamma2:
/// the given quantile (default 1st percentile) of pairwise latent distances
/// over a clean corpus.
inline double calibrate_gamma2(const Weights& w, std::span<const Image> clean, double q = 0.01) {
  if (clean.size() < 2) throw ContractError("calibrate_gamma2: need at least two clean images");
  std::vector<Latent> latents;
  latents.reserve(clean.size());
  for (const auto& x : clean) latents.push_back(encode(w, x));
  std::vector<double> dists;
  dists.reserve(clean.size() * (clean.size() - 1) / 2);
  for (std::size_t i = 0; i < latents.size(); ++i)
    for (std::size_t j = i + 1; j < latents.size(); ++j) dists.push_back(d2(latents[i], latents[j]));
  return quantile(std::move(dists), q);
}

}  // namespace disguise
