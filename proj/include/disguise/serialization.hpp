#pragma once

// JSON forms of configs, results and reports. nlohmann::json keeps object
// keys sorted, so dumps are stable across runs.

#include <string>

#include "json.hpp"

#include "disguise/audit.hpp"
#include "disguise/codec.hpp"
#include "disguise/errors.hpp"
#include "disguise/fixtures.hpp"
#include "disguise/forge.hpp"

namespace disguise {

using Json = nlohmann::json;

inline Json to_json(const FixtureSpec& s) {
  return Json{{"height", s.height},
              {"width", s.width},
              {"corpus_count", s.corpus_count},
              {"triple_count", s.triple_count},
              {"variants_per_scene", s.variants_per_scene},
              {"variant_jitter", s.variant_jitter},
              {"texture_seed", s.texture_seed},
              {"glyph_center_x", s.glyph_center_x},
              {"glyph_center_y", s.glyph_center_y},
              {"glyph_size", s.glyph_size},
              {"stroke_width", s.stroke_width},
              {"overlay_color", s.overlay_color},
              {"overlay_opacity", s.overlay_opacity},
              {"min_glyph_d1", s.min_glyph_d1}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline FixtureSpec fixture_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ContractError("fixture spec: expected a JSON object");
  FixtureSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "height") s.height = value.get<int>();
    else if (key == "width") s.width = value.get<int>();
    else if (key == "corpus_count") s.corpus_count = value.get<int>();
    else if (key == "triple_count") s.triple_count = value.get<int>();
    else if (key == "variants_per_scene") s.variants_per_scene = value.get<int>();
    else if (key == "variant_jitter") s.variant_jitter = value.get<double>();
    else if (key == "texture_seed") s.texture_seed = value.get<std::uint64_t>();
    else if (key == "glyph_center_x") s.glyph_center_x = value.get<double>();
    else if (key == "glyph_center_y") s.glyph_center_y = value.get<double>();
    else if (key == "glyph_size") s.glyph_size = value.get<double>();
    else if (key == "stroke_width") s.stroke_width = value.get<double>();
    else if (key == "overlay_color") s.overlay_color = value.get<std::array<double, 3>>();
    else if (key == "overlay_opacity") s.overlay_opacity = value.get<double>();
    else if (key == "min_glyph_d1") s.min_glyph_d1 = value.get<double>();
    else throw ContractError("fixture spec: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

inline Json to_json(const DisguiseConfig& c) {
  Json j{{"alpha", c.alpha},
         {"eta", c.eta},
         {"gamma1", c.gamma1},
         {"gamma2", c.gamma2},
         {"max_epochs", c.max_epochs},
         {"variant", std::string(variant_name(c.variant))},
         {"init", c.init.str()},
         {"optimizer", c.optimizer == OptimizerKind::gd ? "gd" : "adam"},
         {"log_every", c.log_every},
         {"seed", c.seed}};
  if (c.optimizer == OptimizerKind::adam) j["adam_lr"] = c.adam_lr;
  return j;
}

inline Json to_json(const TraceEntry& e, Variant v) {
  Json j{{"epoch", e.epoch}, {"d1", e.d1}, {"d2", e.d2}, {"loss", e.loss}};
  if (v == Variant::flip_robust) j["d2_flip"] = e.d2_flip;
  if (v == Variant::evasion) j["reconstruction"] = e.reconstruction;
  return j;
}

/// Manifest written next to a forged disguise.
inline Json to_json(const DisguiseResult& r, bool aborted = false) {
  Json trace = Json::array();
  for (const auto& e : r.trace) trace.push_back(to_json(e, r.config.variant));
  Json j{{"config", to_json(r.config)},
         {"converged", r.converged},
         {"epochs_run", r.epochs_run},
         {"aborted", aborted},
         {"trace", trace}};
  if (!r.trace.empty()) j["final"] = to_json(r.trace.back(), r.config.variant);
  return j;
}

inline Json to_json(const ScreenReport& r) {
  Json entries = Json::array();
  std::size_t suspects = 0;
  for (const auto& e : r.entries) {
    entries.push_back({{"id", e.id}, {"distance", e.distance}, {"suspect", e.suspect}});
    suspects += e.suspect ? 1 : 0;
  }
  return Json{{"kind", "screen"}, {"gamma2", r.gamma2}, {"entries", entries}, {"suspect_count", suspects}};
}

inline Json to_json(const ExamReport& r) {
  Json entries = Json::array();
  std::size_t flagged = 0;
  for (const auto& e : r.entries) {
    entries.push_back({{"id", e.id}, {"loss", e.loss}, {"verdict", e.disguise ? "disguise" : "clean"}});
    flagged += e.disguise ? 1 : 0;
  }
  return Json{{"kind", "exam"}, {"zeta", r.zeta}, {"entries", entries}, {"disguise_count", flagged}};
}

inline std::string fraction(std::size_t k, std::size_t n) { return std::to_string(k) + "/" + std::to_string(n); }

inline Json to_json(const MetricsSummary& m) {
  Json table = Json::array();
  table.push_back({{"row", "mean reconstruction loss (disguises)"}, {"value", m.mean_disguise_loss}});
  table.push_back({{"row", "threshold zeta"}, {"value", m.zeta}});
  table.push_back({{"row", "mean reconstruction loss (clean)"}, {"value", m.mean_clean_loss}});
  table.push_back({{"row", "FPR (clean misclassified)"}, {"value", fraction(m.false_positives, m.clean_count)}});
  table.push_back({{"row", "AUROC"}, {"value", m.auroc}});
  return Json{{"mean_disguise_loss", m.mean_disguise_loss},
              {"mean_clean_loss", m.mean_clean_loss},
              {"zeta", m.zeta},
              {"disguise_count", m.disguise_count},
              {"clean_count", m.clean_count},
              {"false_positives", m.false_positives},
              {"false_negatives", m.false_negatives},
              {"false_positive_rate", m.false_positive_rate},
              {"false_negative_rate", m.false_negative_rate},
              {"auroc", m.auroc},
              {"table", table}};
}

}  // namespace disguise
