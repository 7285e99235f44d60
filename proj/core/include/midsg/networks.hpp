#pragma once

// Encoder E(x, s), style-based generator G(z, c), timestep-conditioned
// discriminator D(y, t) with realness and domain heads, and the frozen
// perceptual feature pyramid phi.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/autograd.hpp"
#include "midsg/rng.hpp"

namespace midsg {

struct NetworkConfig {
  int image_size = 32;  // 4 * 2^k, k >= 1
  int channels = 1;
  int num_domains = 3;
  int latent_dim = 128;
  int w_dim = 128;
  int mapping_layers = 2;
  int label_embed_dim = 16;   // target-domain embedding fed to the mapping net
  int source_embed_dim = 4;   // source-domain embedding tiled onto encoder input
  int base_channels = 16;     // width at full resolution, doubling per halving
  int max_channels = 64;
  int timestep_embed_dim = 32;
  int disc_fc_dim = 128;
  std::vector<int> phi_channels{16, 32, 64};
  std::uint64_t phi_seed = 0;

  void validate() const;
  // Number of synthesis layers L (one per resolution 4, 8, ..., image_size).
  int num_layers() const;
  int channels_at(int resolution) const;

  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);
};

using NamedParams = std::vector<std::pair<std::string, ag::Tensor>>;

class ParamTable {
 public:
  ag::Tensor add(std::string name, ag::Shape shape, std::vector<double> values,
                 bool trainable = true);
  const NamedParams& items() const { return items_; }

 private:
  NamedParams items_;
};

class Encoder {
 public:
  Encoder(const NetworkConfig& config, Rng& rng);
  // [B,C,H,W] images with source labels -> [B, latent_dim] codes.
  ag::Tensor forward(const ag::Tensor& x, std::span<const int> source) const;
  const NamedParams& parameters() const { return table_.items(); }

 private:
  NetworkConfig config_;
  ParamTable table_;
  ag::Tensor source_embedding_;
  std::vector<ag::Tensor> conv_w_, conv_b_;
  ag::Tensor fc_w_, fc_b_;
};

struct StyleMix {
  ag::Tensor second;  // [B, latent_dim]
  int crossover = 0;  // layers >= crossover use `second`; valid range [0, L]
};

class Generator {
 public:
  Generator(const NetworkConfig& config, Rng& rng);

  // Mapping network: (z, target label) -> w [B, w_dim].
  ag::Tensor map(const ag::Tensor& z, std::span<const int> target) const;
  // One w per synthesis layer (size L); the last also drives the output layer.
  ag::Tensor synthesize(std::span<const ag::Tensor> ws) const;
  ag::Tensor forward(const ag::Tensor& z, std::span<const int> target,
                     const std::optional<StyleMix>& mix = std::nullopt) const;

  int num_layers() const { return static_cast<int>(layer_w_.size()); }
  const NamedParams& parameters() const { return table_.items(); }

 private:
  NetworkConfig config_;
  ParamTable table_;
  ag::Tensor label_embedding_;
  std::vector<ag::Tensor> map_w_, map_b_;
  ag::Tensor const_input_;
  std::vector<ag::Tensor> affine_w_, affine_b_, layer_w_, layer_b_;
  ag::Tensor rgb_affine_w_, rgb_affine_b_, rgb_w_, rgb_b_;
};

struct DiscriminatorOutput {
  ag::Tensor realness_logit;  // [B]; realness = sigmoid(logit), |logit| < 30
  ag::Tensor domain_logits;   // [B, num_domains]

  std::vector<double> realness() const;
};

class Discriminator {
 public:
  Discriminator(const NetworkConfig& config, Rng& rng);
  DiscriminatorOutput forward(const ag::Tensor& y, std::span<const int> t) const;
  const NamedParams& parameters() const { return table_.items(); }

 private:
  NetworkConfig config_;
  ParamTable table_;
  std::vector<ag::Tensor> conv_w_, conv_b_;
  ag::Tensor temb_w_, temb_b_;
  ag::Tensor fc_w_, fc_b_, real_w_, real_b_, domain_w_, domain_b_;
};

// Sinusoidal embedding of integer timesteps, [B, dim].
ag::Tensor timestep_embedding(std::span<const int> t, int dim);

// Fixed random three-block convolutional pyramid. Its weights never receive
// gradients; inputs still do.
class FeatureExtractor {
 public:
  FeatureExtractor(const NetworkConfig& config);
  std::vector<ag::Tensor> features(const ag::Tensor& x) const;
  // Final block, globally average-pooled: [B, phi_channels.back()].
  ag::Tensor embed(const ag::Tensor& x) const;
  const NamedParams& parameters() const { return table_.items(); }

 private:
  ParamTable table_;
  std::vector<ag::Tensor> conv_w_, conv_b_;
};

struct ModelBundle {
  NetworkConfig config;
  Encoder encoder;
  Generator generator;
  Discriminator discriminator;
  FeatureExtractor phi;

  ModelBundle(const NetworkConfig& cfg, Rng& rng);
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;
  ModelBundle(ModelBundle&&) = default;

  NamedParams all_parameters() const;  // prefixed encoder./generator./discriminator./phi.
  NamedParams generator_side() const;  // encoder + generator
  std::size_t parameter_count() const;
  void set_discriminator_trainable(bool on) const;
};

ModelBundle init_bundle(const NetworkConfig& config, std::uint64_t seed);

// Convenience entry points mirroring the model's roles.
ag::Tensor encode(const ModelBundle& bundle, const ag::Tensor& x, std::span<const int> source);
ag::Tensor generate(const ModelBundle& bundle, const ag::Tensor& z, std::span<const int> target,
                    const std::optional<StyleMix>& mix = std::nullopt);
DiscriminatorOutput discriminate(const ModelBundle& bundle, const ag::Tensor& y,
                                 std::span<const int> t);
std::vector<ag::Tensor> perceptual_features(const ModelBundle& bundle, const ag::Tensor& x);

std::uint64_t checksum(const NamedParams& params);

}  // namespace midsg
