#pragma once

// Disguise generation: projected first-order minimisation of
//
//   standard:  alpha * D1(x_b, x_d) + D2(E(x_c), E(x_d))
//   flip:      standard + D2(E(hflip x_c), E(hflip x_d))
//   evasion:   alpha * (D1(x_b, x_d) + D1(D(E(x_d)), x_d)) + D2(E(x_c), E(x_d))
//
// over x_d in [0,1]^n, stopping at the first iterate that meets the input
// and feature thresholds. Each objective is divided by (1 + alpha): the
// minimiser is unchanged and one gd step size stays stable for any alpha.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "disguise/adam.hpp"
#include "disguise/codec.hpp"
#include "disguise/distances.hpp"
#include "disguise/errors.hpp"
#include "disguise/graph.hpp"
#include "disguise/tensor.hpp"

namespace disguise {

enum class Variant { standard, flip_robust, evasion };
enum class InitKind { base, zeros, gaussian };
enum class OptimizerKind { gd, adam };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::standard: return "standard";
    case Variant::flip_robust: return "flip";
    case Variant::evasion: return "evasion";
  }
  return "unknown";
}

struct InitMode {
  InitKind kind = InitKind::base;
  double sigma = 0.1;  // gaussian only

  static InitMode base() { return {}; }
  static InitMode zeros() { return {InitKind::zeros, 0.1}; }
  static InitMode gaussian(double sigma) { return {InitKind::gaussian, sigma}; }

  std::string str() const {
    switch (kind) {
      case InitKind::base: return "base";
      case InitKind::zeros: return "zeros";
      case InitKind::gaussian: {
        std::string s = std::to_string(sigma);
        return "gaussian:" + s;
      }
    }
    return "unknown";
  }
};

struct DisguiseConfig {
  double alpha = 1.0;
  double eta = 0.05;  // gd step size
  double gamma1 = 0.10;
  double gamma2 = 0.10;
  int max_epochs = 5000;
  Variant variant = Variant::standard;
  InitMode init;
  OptimizerKind optimizer = OptimizerKind::gd;
  double adam_lr = 0.01;
  int log_every = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ContractError("forge: alpha must be finite and >= 0");
    if (!(eta > 0.0)) throw ContractError("forge: eta must be positive");
    if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw ContractError("forge: thresholds must be positive");
    if (max_epochs < 1) throw ContractError("forge: max_epochs must be >= 1");
    if (init.kind == InitKind::gaussian && !(init.sigma > 0.0))
      throw ContractError("forge: gaussian init sigma must be positive");
    if (optimizer == OptimizerKind::adam && !(adam_lr > 0.0))
      throw ContractError("forge: adam learning rate must be positive");
    if (log_every < 1) throw ContractError("forge: log_every must be >= 1");
  }
};

struct TraceEntry {
  int epoch = 0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d2_flip = 0.0;         // flip variant only
  double reconstruction = 0.0;  // evasion variant only
  double loss = 0.0;
};

struct DisguiseResult {
  Image disguise;
  int epochs_run = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;
  DisguiseConfig config;
};

/// Thrown when the objective becomes non-finite. Carries the trace so far.
class DisguiseAborted : public NumericalError {
 public:
  DisguiseAborted(const std::string& what, DisguiseResult partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const DisguiseResult& partial() const noexcept { return partial_; }

 private:
  DisguiseResult partial_;
};

template <typename T>
struct ObjectiveTerms {
  double d1 = 0.0;
  double d2 = 0.0;
  double d2_flip = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
  Tensor<T> grad;  // d total / d x_d when requested
};

// The disguise objective for one (target, base) pair. Encodings of the
// target are computed once.
template <typename T>
class DisguiseObjective {
 public:
  DisguiseObjective(const AutoencoderWeights<T>& weights, const Tensor<T>& target, const Tensor<T>& base,
                    Variant variant, double alpha)
      : weights_(weights), base_(base), variant_(variant), alpha_(alpha) {
    check_image_dims(target.shape(), "forge target");
    check_image_dims(base.shape(), "forge base");
    if (!(target.shape() == base.shape()))
      throw ShapeError("forge: target " + target.shape().str() + " and base " + base.shape().str() + " differ");
    target_latent_ = encode(weights_, target);
    if (variant_ == Variant::flip_robust) {
      Graph<T> g;
      const auto nodes = bind_weights(g, weights_, false);
      target_flip_latent_ = g.value(graph_ops::encode(g, nodes, g.hflip(g.constant(target))));
    }
  }

  Variant variant() const noexcept { return variant_; }
  double alpha() const noexcept { return alpha_; }

  ObjectiveTerms<T> evaluate(const Tensor<T>& disguise, bool with_grad) const {
    if (!(disguise.shape() == base_.shape()))
      throw ShapeError("forge: disguise dims " + disguise.shape().str() + " vs " + base_.shape().str());
    Graph<T> g;
    const auto nodes = bind_weights(g, weights_, false);
    const NodeId xd = with_grad ? g.variable(disguise) : g.constant(disguise);
    const NodeId xb = g.constant(base_);
    const NodeId zc = g.constant(target_latent_);

    const NodeId in_dist = graph_ops::d1(g, xb, xd);
    const NodeId zd = graph_ops::encode(g, nodes, xd);
    const NodeId feat_dist = graph_ops::d2(g, zc, zd);

    ObjectiveTerms<T> terms;
    NodeId total = g.add(g.scalar_mul(in_dist, alpha_), feat_dist);
    if (variant_ == Variant::flip_robust) {
      const NodeId zd_flip = graph_ops::encode(g, nodes, g.hflip(xd));
      const NodeId flip_dist = graph_ops::d2(g, g.constant(target_flip_latent_), zd_flip);
      terms.d2_flip = static_cast<double>(g.scalar(flip_dist));
      total = g.add(total, flip_dist);
    } else if (variant_ == Variant::evasion) {
      const NodeId recon = graph_ops::decode(g, nodes, zd);
      const NodeId recon_dist = graph_ops::d1(g, recon, xd);
      terms.reconstruction = static_cast<double>(g.scalar(recon_dist));
      total = g.add(g.scalar_mul(g.add(in_dist, recon_dist), alpha_), feat_dist);
    }
    total = g.scalar_mul(total, 1.0 / (1.0 + alpha_));
    terms.d1 = static_cast<double>(g.scalar(in_dist));
    terms.d2 = static_cast<double>(g.scalar(feat_dist));
    terms.total = static_cast<double>(g.scalar(total));
    if (with_grad && std::isfinite(terms.total)) {
      g.backward(total);
      terms.grad = g.grad(xd);
    }
    return terms;
  }

  /// Total objective; the form finite-difference oracles consume.
  double operator()(const Tensor<T>& disguise) const { return evaluate(disguise, false).total; }

 private:
  AutoencoderWeights<T> weights_;
  Tensor<T> base_;
  Tensor<T> target_latent_;
  Tensor<T> target_flip_latent_;
  Variant variant_;
  double alpha_;
};

inline Image init_disguise(const InitMode& mode, const Image& base, std::uint64_t seed) {
  switch (mode.kind) {
    case InitKind::base: return base;
    case InitKind::zeros: return Image(base.shape());
    case InitKind::gaussian: {
      if (!(mode.sigma > 0.0)) throw ContractError("init_disguise: sigma must be positive");
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> dist(0.5, mode.sigma);
      Image out(base.shape());
      for (float& v : out.data()) v = static_cast<float>(std::clamp(dist(rng), 0.0, 1.0));
      return out;
    }
  }
  return base;
}

inline bool thresholds_met(const ObjectiveTerms<float>& t, const DisguiseConfig& cfg) {
  bool ok = t.d1 <= cfg.gamma1 && t.d2 <= cfg.gamma2;
  if (cfg.variant == Variant::flip_robust) ok = ok && t.d2_flip <= cfg.gamma2;
  return ok;
}

inline DisguiseResult generate_disguise(const Weights& weights, const Image& target, const Image& base,
                                        const DisguiseConfig& cfg) {
  cfg.validate();
  const DisguiseObjective<float> objective(weights, target, base, cfg.variant, cfg.alpha);

  DisguiseResult result;
  result.config = cfg;
  Image x = init_disguise(cfg.init, base, cfg.seed);
  std::optional<Adam> adam;
  if (cfg.optimizer == OptimizerKind::adam)
    adam.emplace(AdamParams{cfg.adam_lr, 0.9, 0.999, 1e-8}, std::vector<std::size_t>{x.size()});

  for (int epoch = 0;; ++epoch) {
    const bool last = epoch == cfg.max_epochs;
    auto terms = objective.evaluate(x, !last);
    const TraceEntry entry{epoch, terms.d1, terms.d2, terms.d2_flip, terms.reconstruction, terms.total};
    if (!std::isfinite(terms.total)) {
      result.trace.push_back(entry);
      result.disguise = x;
      result.epochs_run = epoch;
      throw DisguiseAborted("forge: non-finite loss at epoch " + std::to_string(epoch), std::move(result));
    }
    const bool converged = thresholds_met(terms, cfg);
    if (converged || last || epoch % cfg.log_every == 0) result.trace.push_back(entry);
    if (converged || last) {
      result.converged = converged;
      result.epochs_run = epoch;
      break;
    }
    if (!terms.grad.all_finite()) {
      result.disguise = x;
      result.epochs_run = epoch;
      throw DisguiseAborted("forge: non-finite gradient at epoch " + std::to_string(epoch), std::move(result));
    }
    auto xs = x.data();
    const auto gs = terms.grad.data();
    if (adam) {
      adam->begin_step();
      adam->update<float>(0, xs, gs);
    } else {
      const float eta = static_cast<float>(cfg.eta);
      for (std::size_t i = 0; i < xs.size(); ++i) xs[i] -= eta * gs[i];
    }
    for (float& v : xs) v = std::clamp(v, 0.0f, 1.0f);
  }
  result.disguise = std::move(x);
  return result;
}

inline DisguiseResult generate_disguise_flip_robust(const Weights& weights, const Image& target,
                                                    const Image& base, DisguiseConfig cfg) {
  cfg.variant = Variant::flip_robust;
  return generate_disguise(weights, target, base, cfg);
}

inline DisguiseResult generate_disguise_evasive(const Weights& weights, const Image& target, const Image& base,
                                                DisguiseConfig cfg) {
  cfg.variant = Variant::evasion;
  return generate_disguise(weights, target, base, cfg);
}

}  // namespace disguise
