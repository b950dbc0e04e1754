#pragma once

// Fixed convolutional autoencoder: encoder maps H x W x 3 images to
// (H/4) x (W/4) x 4 latents, decoder maps them back.
//
//   encoder: conv3x3 3->16 s1 tanh, conv3x3 16->32 s2 tanh,
//            conv3x3 32->32 s1 tanh, conv3x3 32->4 s2 (linear)
//   decoder: up2, conv3x3 4->32 tanh, conv3x3 32->32 tanh,
//            up2, conv3x3 32->16 tanh, conv3x3 16->3 sigmoid
//
// Weights files ("DWGT"): magic, version 0x01, u32 LE tensor count, then per
// tensor a u16 LE name length, the UTF-8 name and a complete DTNS record.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disguise/adam.hpp"
#include "disguise/distances.hpp"
#include "disguise/dtns.hpp"
#include "disguise/errors.hpp"
#include "disguise/graph.hpp"
#include "disguise/tensor.hpp"

namespace disguise {

inline constexpr int kDownsampleFactor = 4;
inline constexpr int kLatentChannels = 4;
inline constexpr int kImageChannels = 3;
inline constexpr int kKernelSize = 3;

enum class Activation { linear, tanh, sigmoid };

struct LayerSpec {
  int in_channels;
  int out_channels;
  int stride;
  bool upsample_before;
  Activation activation;
};

inline constexpr std::array<LayerSpec, 4> kEncoderLayers{{
    {3, 16, 1, false, Activation::tanh},
    {16, 32, 2, false, Activation::tanh},
    {32, 32, 1, false, Activation::tanh},
    {32, kLatentChannels, 2, false, Activation::linear},
}};

inline constexpr std::array<LayerSpec, 4> kDecoderLayers{{
    {kLatentChannels, 32, 1, true, Activation::tanh},
    {32, 32, 1, false, Activation::tanh},
    {32, 16, 1, true, Activation::tanh},
    {16, 3, 1, false, Activation::sigmoid},
}};

template <typename T>
struct ConvParams {
  Tensor<T> kernel;  // 3 x 3 x Cin x Cout
  Tensor<T> bias;    // Cout
};

template <typename T>
struct AutoencoderWeights {
  std::array<ConvParams<T>, 4> encoder;
  std::array<ConvParams<T>, 4> decoder;

  static AutoencoderWeights zeros() {
    AutoencoderWeights w;
    auto fill = [](auto& layers, const auto& specs) {
      for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].kernel = Tensor<T>(Shape{kKernelSize, kKernelSize, specs[i].in_channels, specs[i].out_channels});
        layers[i].bias = Tensor<T>(Shape{specs[i].out_channels});
      }
    };
    fill(w.encoder, kEncoderLayers);
    fill(w.decoder, kDecoderLayers);
    return w;
  }

  /// The 16 tensors in archive order: encoder.{0..3}.{weight,bias}, then decoder.
  std::vector<std::pair<std::string, const Tensor<T>*>> named() const {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (std::size_t i = 0; i < 4; ++i) {
      out.emplace_back("encoder." + std::to_string(i) + ".weight", &encoder[i].kernel);
      out.emplace_back("encoder." + std::to_string(i) + ".bias", &encoder[i].bias);
    }
    for (std::size_t i = 0; i < 4; ++i) {
      out.emplace_back("decoder." + std::to_string(i) + ".weight", &decoder[i].kernel);
      out.emplace_back("decoder." + std::to_string(i) + ".bias", &decoder[i].bias);
    }
    return out;
  }

  std::vector<Tensor<T>*> tensors() {
    std::vector<Tensor<T>*> out;
    for (auto* layers : {&encoder, &decoder})
      for (auto& l : *layers) {
        out.push_back(&l.kernel);
        out.push_back(&l.bias);
      }
    return out;
  }

  template <typename U>
  AutoencoderWeights<U> cast() const {
    AutoencoderWeights<U> out;
    for (std::size_t i = 0; i < 4; ++i) {
      out.encoder[i] = {encoder[i].kernel.template cast<U>(), encoder[i].bias.template cast<U>()};
      out.decoder[i] = {decoder[i].kernel.template cast<U>(), decoder[i].bias.template cast<U>()};
    }
    return out;
  }

  bool all_finite() const {
    for (const auto& [name, t] : named())
      if (!t->all_finite()) return false;
    return true;
  }

  friend bool operator==(const AutoencoderWeights& a, const AutoencoderWeights& b) {
    for (std::size_t i = 0; i < 4; ++i) {
      if (!(a.encoder[i].kernel == b.encoder[i].kernel) || !(a.encoder[i].bias == b.encoder[i].bias)) return false;
      if (!(a.decoder[i].kernel == b.decoder[i].kernel) || !(a.decoder[i].bias == b.decoder[i].bias)) return false;
    }
    return true;
  }
};

using Weights = AutoencoderWeights<float>;

inline void check_image_dims(const Shape& s, const char* what) {
  require_image(s, what);
  if (s[2] != kImageChannels)
    throw ShapeError(std::string(what) + ": expected 3 channels, got " + s.str());
  if (s[0] % kDownsampleFactor || s[1] % kDownsampleFactor)
    throw ShapeError(std::string(what) + ": height and width must be divisible by 4, got " + s.str());
}

inline void check_latent_dims(const Shape& s, const char* what) {
  require_image(s, what);
  if (s[2] != kLatentChannels)
    throw ShapeError(std::string(what) + ": expected 4 latent channels, got " + s.str());
}

// ------------------------------------------------------------------ graph

template <typename T>
struct WeightNodes {
  std::array<std::pair<NodeId, NodeId>, 4> encoder;
  std::array<std::pair<NodeId, NodeId>, 4> decoder;
};

template <typename T>
WeightNodes<T> bind_weights(Graph<T>& g, const AutoencoderWeights<T>& w, bool trainable) {
  WeightNodes<T> n;
  auto leaf = [&](const Tensor<T>& t) { return trainable ? g.variable(t) : g.constant(t); };
  for (std::size_t i = 0; i < 4; ++i) {
    n.encoder[i] = {leaf(w.encoder[i].kernel), leaf(w.encoder[i].bias)};
    n.decoder[i] = {leaf(w.decoder[i].kernel), leaf(w.decoder[i].bias)};
  }
  return n;
}

namespace graph_ops {

template <typename T>
NodeId run_layers(Graph<T>& g, const std::array<std::pair<NodeId, NodeId>, 4>& params,
                  const std::array<LayerSpec, 4>& specs, NodeId x) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (specs[i].upsample_before) x = g.upsample2(x);
    x = g.conv2d(x, params[i].first, params[i].second, specs[i].stride);
    switch (specs[i].activation) {
      case Activation::tanh: x = g.tanh(x); break;
      case Activation::sigmoid: x = g.sigmoid(x); break;
      case Activation::linear: break;
    }
  }
  return x;
}

template <typename T>
NodeId encode(Graph<T>& g, const WeightNodes<T>& w, NodeId x) {
  check_image_dims(g.value(x).shape(), "encode");
  return run_layers(g, w.encoder, kEncoderLayers, x);
}

template <typename T>
NodeId decode(Graph<T>& g, const WeightNodes<T>& w, NodeId z) {
  check_latent_dims(g.value(z).shape(), "decode");
  return run_layers(g, w.decoder, kDecoderLayers, z);
}

}  // namespace graph_ops

template <typename T>
Tensor<T> encode(const AutoencoderWeights<T>& w, const Tensor<T>& x) {
  Graph<T> g;
  const auto nodes = bind_weights(g, w, false);
  return g.value(graph_ops::encode(g, nodes, g.constant(x)));
}

template <typename T>
Tensor<T> decode(const AutoencoderWeights<T>& w, const Tensor<T>& z) {
  Graph<T> g;
  const auto nodes = bind_weights(g, w, false);
  return g.value(graph_ops::decode(g, nodes, g.constant(z)));
}

/// decode(encode(x)).
template <typename T>
Tensor<T> reconstruct(const AutoencoderWeights<T>& w, const Tensor<T>& x) {
  Graph<T> g;
  const auto nodes = bind_weights(g, w, false);
  const NodeId z = graph_ops::encode(g, nodes, g.constant(x));
  return g.value(graph_ops::decode(g, nodes, z));
}

/// Reconstruction loss D1(D(E(x)), x).
template <typename T>
double reconstruction_loss(const AutoencoderWeights<T>& w, const Tensor<T>& x) {
  Graph<T> g;
  const auto nodes = bind_weights(g, w, false);
  const NodeId xn = g.constant(x);
  const NodeId r = graph_ops::decode(g, nodes, graph_ops::encode(g, nodes, xn));
  return static_cast<double>(g.scalar(graph_ops::d1(g, r, xn)));
}

// ------------------------------------------------------------------ training

/// Glorot-uniform kernels, zero biases.
inline Weights init_weights(std::uint64_t seed) {
  Weights w = Weights::zeros();
  std::mt19937_64 rng(seed);
  auto fill = [&](auto& layers, const auto& specs) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const double fan_in = kKernelSize * kKernelSize * specs[i].in_channels;
      const double fan_out = kKernelSize * kKernelSize * specs[i].out_channels;
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (float& v : layers[i].kernel.data()) v = static_cast<float>(dist(rng));
    }
  };
  fill(w.encoder, kEncoderLayers);
  fill(w.decoder, kDecoderLayers);
  return w;
}

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double learning_rate = 2e-3;
  std::uint64_t seed = 0;
  std::string corpus_path;

  void validate() const {
    if (epochs < 1) throw ContractError("train: epochs must be >= 1");
    if (batch_size < 1) throw ContractError("train: batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ContractError("train: learning rate must be positive");
  }
};

struct TrainResult {
  Weights weights;
  std::vector<double> epoch_losses;  // mean reconstruction D1 per epoch, pre-update
};

using TrainProgress = std::function<void(int epoch, double mean_loss)>;

/// Mean-D1 reconstruction training with Adam. Batches are drawn from a
/// per-epoch seeded shuffle.
inline TrainResult train_autoencoder(const TrainConfig& cfg, std::span<const Image> corpus,
                                     const TrainProgress& progress = {}) {
  cfg.validate();
  if (corpus.empty()) throw ContractError("train: corpus is empty");
  for (const auto& img : corpus) {
    check_image_dims(img.shape(), "train");
    if (!(img.shape() == corpus.front().shape())) throw ShapeError("train: corpus dims are not uniform");
  }

  TrainResult result{init_weights(cfg.seed), {}};
  std::vector<std::size_t> sizes;
  for (auto* t : result.weights.tensors()) sizes.push_back(t->size());
  Adam adam(AdamParams{cfg.learning_rate, 0.9, 0.999, 1e-8}, sizes);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(corpus.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Graph<float> g;
      const auto nodes = bind_weights(g, result.weights, true);
      std::optional<NodeId> total;
      for (std::size_t k = start; k < end; ++k) {
        const NodeId x = g.constant(corpus[order[k]]);
        const NodeId r = graph_ops::decode(g, nodes, graph_ops::encode(g, nodes, x));
        const NodeId loss = graph_ops::d1(g, r, x);
        epoch_total += static_cast<double>(g.scalar(loss));
        total = total ? g.add(*total, loss) : loss;
      }
      const NodeId batch_loss = g.scalar_mul(*total, 1.0 / static_cast<double>(end - start));
      if (!std::isfinite(g.scalar(batch_loss))) throw NumericalError("train: non-finite loss");
      g.backward(batch_loss);

      adam.begin_step();
      std::size_t block = 0;
      auto apply = [&](auto& layers, const auto& layer_nodes) {
        for (std::size_t i = 0; i < 4; ++i) {
          adam.update<float>(block++, layers[i].kernel.data(), g.grad(layer_nodes[i].first).data());
          adam.update<float>(block++, layers[i].bias.data(), g.grad(layer_nodes[i].second).data());
        }
      };
      apply(result.weights.encoder, nodes.encoder);
      apply(result.weights.decoder, nodes.decoder);
    }
    const double mean_loss = epoch_total / static_cast<double>(corpus.size());
    result.epoch_losses.push_back(mean_loss);
    if (progress) progress(epoch, mean_loss);
  }
  return result;
}

/// Mean reconstruction loss over a set of images.
inline double mean_reconstruction_loss(const Weights& w, std::span<const Image> images) {
  if (images.empty()) throw ContractError("mean_reconstruction_loss: no images");
  double total = 0.0;
  for (const auto& x : images) total += reconstruction_loss(w, x);
  return total / static_cast<double>(images.size());
}

// ------------------------------------------------------------------ DWGT

inline constexpr std::array<char, 4> kDwgtMagic{'D', 'W', 'G', 'T'};
inline constexpr std::uint8_t kDwgtVersion = 0x01;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
  std::size_t offset = 0;  // byte offset of the entry in its archive
};

inline io::Bytes encode_archive(std::span<const std::pair<std::string, const Tensor<float>*>> entries) {
  io::ByteWriter w;
  w.raw(kDwgtMagic.data(), kDwgtMagic.size());
  w.u8(kDwgtVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    if (name.size() > 0xffff) throw ContractError("archive: tensor name too long");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name.data(), name.size());
    io::write_dtns(w, *t);
  }
  return w.take();
}

inline std::vector<NamedTensor> decode_archive(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  const std::string magic = r.str(4, "DWGT magic");
  if (std::memcmp(magic.data(), kDwgtMagic.data(), 4) != 0) throw FormatError("bad DWGT magic", 0);
  const std::uint8_t version = r.u8("DWGT version");
  if (version != kDwgtVersion) throw FormatError("unsupported DWGT version " + std::to_string(version), 4);
  const std::uint32_t count = r.u32("DWGT tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.offset = r.offset();
    const std::uint16_t len = r.u16("DWGT name length");
    nt.name = r.str(len, "DWGT name");
    nt.tensor = io::read_dtns(r);
    out.push_back(std::move(nt));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after DWGT archive", r.offset());
  return out;
}

inline io::Bytes encode_weights(const Weights& w) {
  const auto named = w.named();
  return encode_archive(named);
}

inline Weights decode_weights(std::span<const std::uint8_t> bytes) {
  const auto entries = decode_archive(bytes);
  Weights w = Weights::zeros();
  const auto expected = w.named();
  const auto slots = w.tensors();
  if (entries.size() != expected.size())
    throw FormatError("DWGT: expected " + std::to_string(expected.size()) + " tensors, found " +
                          std::to_string(entries.size()),
                      9);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name != expected[i].first)
      throw FormatError("DWGT: expected tensor '" + expected[i].first + "', found '" + entries[i].name + "'",
                        entries[i].offset);
    if (!(entries[i].tensor.shape() == expected[i].second->shape()))
      throw FormatError("DWGT: tensor '" + entries[i].name + "' has dims " + entries[i].tensor.shape().str() +
                            ", expected " + expected[i].second->shape().str(),
                        entries[i].offset);
    *slots[i] = entries[i].tensor;
  }
  return w;
}

inline void save_weights(const std::filesystem::path& path, const Weights& w) {
  io::write_file(path, encode_weights(w));
}

inline Weights load_weights(const std::filesystem::path& path) { return decode_weights(io::read_file(path)); }

}  // namespace disguise
