#include "midsg/networks.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "midsg/errors.hpp"
#include "midsg/ops.hpp"

namespace midsg {

using ag::Shape;
using ag::Tensor;
using nlohmann::json;

namespace {

constexpr double kSlope = 0.2;
constexpr double kLogitBound = 30.0;

std::vector<double> normal_values(Rng& rng, std::size_t n, double stddev) {
  std::vector<double> v(n);
  fill_normal(rng, v, stddev);
  return v;
}

// He-normal weights for a layer with the given fan-in.
std::vector<double> he(Rng& rng, std::size_t n, int fan_in, double gain = std::sqrt(2.0)) {
  return normal_values(rng, n, gain / std::sqrt(static_cast<double>(fan_in)));
}

Tensor conv_weight(ParamTable& t, Rng& rng, const std::string& name, int cout, int cin, int k,
                   bool trainable = true) {
  return t.add(name, {cout, cin, k, k},
               he(rng, static_cast<std::size_t>(cout) * cin * k * k, cin * k * k), trainable);
}

Tensor zeros_param(ParamTable& t, const std::string& name, int n, bool trainable = true) {
  return t.add(name, {n}, std::vector<double>(static_cast<std::size_t>(n), 0.0), trainable);
}

void check_labels(std::span<const int> labels, int batch, int num_domains, const char* what) {
  if (labels.size() != static_cast<std::size_t>(batch))
    throw ValidationError(std::string(what) + ": expected one label per sample");
  for (int l : labels)
    if (l < 0 || l >= num_domains)
      throw ValidationError(std::string(what) + ": domain label " + std::to_string(l) +
                            " outside [0, " + std::to_string(num_domains) + ")");
}

void check_images(const Tensor& x, const NetworkConfig& c, const char* what) {
  if (x.rank() != 4 || x.dim(1) != c.channels || x.dim(2) != c.image_size ||
      x.dim(3) != c.image_size)
    throw ValidationError(std::string(what) + ": expected images of shape (B," +
                          std::to_string(c.channels) + "," + std::to_string(c.image_size) + "," +
                          std::to_string(c.image_size) + "), got " + ag::to_string(x.shape()));
}

}  // namespace

// --- NetworkConfig ----------------------------------------------------------

void NetworkConfig::validate() const {
  if (image_size < 8 || !std::has_single_bit(static_cast<unsigned>(image_size)))
    throw ValidationError("image_size must be 4 * 2^k with k >= 1, got " +
                          std::to_string(image_size));
  if (channels != 1 && channels != 3) throw ValidationError("channels must be 1 or 3");
  if (num_domains < 2) throw ValidationError("num_domains must be at least 2");
  if (latent_dim < 1 || w_dim < 1 || mapping_layers < 1 || label_embed_dim < 1 ||
      source_embed_dim < 1 || base_channels < 1 || max_channels < base_channels ||
      timestep_embed_dim < 2 || timestep_embed_dim % 2 != 0 || disc_fc_dim < 1)
    throw ValidationError("network widths must be positive (timestep_embed_dim even)");
  if (phi_channels.size() != 3) throw ValidationError("phi needs exactly three blocks");
  for (int c : phi_channels)
    if (c < 1) throw ValidationError("phi channel widths must be positive");
}

int NetworkConfig::num_layers() const {
  return std::countr_zero(static_cast<unsigned>(image_size / 4)) + 1;
}

int NetworkConfig::channels_at(int resolution) const {
  return std::min(max_channels, base_channels * (image_size / resolution));
}

json NetworkConfig::to_json() const {
  return {{"image_size", image_size},
          {"channels", channels},
          {"num_domains", num_domains},
          {"latent_dim", latent_dim},
          {"w_dim", w_dim},
          {"mapping_layers", mapping_layers},
          {"label_embed_dim", label_embed_dim},
          {"source_embed_dim", source_embed_dim},
          {"base_channels", base_channels},
          {"max_channels", max_channels},
          {"timestep_embed_dim", timestep_embed_dim},
          {"disc_fc_dim", disc_fc_dim},
          {"phi_channels", phi_channels},
          {"phi_seed", phi_seed}};
}

NetworkConfig NetworkConfig::from_json(const json& j) {
  NetworkConfig c;
  c.image_size = j.at("image_size").get<int>();
  c.channels = j.at("channels").get<int>();
  c.num_domains = j.at("num_domains").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.w_dim = j.at("w_dim").get<int>();
  c.mapping_layers = j.at("mapping_layers").get<int>();
  c.label_embed_dim = j.at("label_embed_dim").get<int>();
  c.source_embed_dim = j.at("source_embed_dim").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.max_channels = j.at("max_channels").get<int>();
  c.timestep_embed_dim = j.at("timestep_embed_dim").get<int>();
  c.disc_fc_dim = j.at("disc_fc_dim").get<int>();
  c.phi_channels = j.at("phi_channels").get<std::vector<int>>();
  c.phi_seed = j.at("phi_seed").get<std::uint64_t>();
  c.validate();
  return c;
}

Tensor ParamTable::add(std::string name, Shape shape, std::vector<double> values, bool trainable) {
  Tensor t = trainable ? Tensor::parameter(std::move(shape), std::move(values))
                       : Tensor::from(std::move(shape), std::move(values));
  items_.emplace_back(std::move(name), t);
  return t;
}

// --- Encoder -----------------------------------------------------------------

Encoder::Encoder(const NetworkConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const int s = config_.image_size;
  source_embedding_ = table_.add(
      "source_embedding", {config_.num_domains, config_.source_embed_dim},
      normal_values(rng, static_cast<std::size_t>(config_.num_domains) * config_.source_embed_dim,
                    1.0));
  int cin = config_.channels + config_.source_embed_dim;
  conv_w_.push_back(conv_weight(table_, rng, "stem.weight", config_.channels_at(s), cin, 3));
  conv_b_.push_back(zeros_param(table_, "stem.bias", config_.channels_at(s)));
  for (int res = s; res > 4; res /= 2) {
    const std::string name = "down" + std::to_string(res);
    conv_w_.push_back(conv_weight(table_, rng, name + ".weight", config_.channels_at(res / 2),
                                  config_.channels_at(res), 3));
    conv_b_.push_back(zeros_param(table_, name + ".bias", config_.channels_at(res / 2)));
  }
  const int flat = config_.channels_at(4) * 16;
  fc_w_ = table_.add("fc.weight", {config_.latent_dim, flat},
                     he(rng, static_cast<std::size_t>(config_.latent_dim) * flat, flat, 1.0));
  fc_b_ = zeros_param(table_, "fc.bias", config_.latent_dim);
}

Tensor Encoder::forward(const Tensor& x, std::span<const int> source) const {
  check_images(x, config_, "encode");
  check_labels(source, x.dim(0), config_.num_domains, "encode");
  const int s = config_.image_size;
  Tensor label_maps = ag::tile_spatial(ag::embedding(source_embedding_, source), s, s);
  // Concatenate along channels: [B, C + e, H, W].
  const int batch = x.dim(0);
  Tensor h = ag::reshape(
      ag::concat_features(ag::reshape(x, {batch, config_.channels * s * s}),
                          ag::reshape(label_maps, {batch, config_.source_embed_dim * s * s})),
      {batch, config_.channels + config_.source_embed_dim, s, s});
  h = ag::leaky_relu(ag::conv2d(h, conv_w_[0], conv_b_[0], 1, 1), kSlope);
  for (std::size_t i = 1; i < conv_w_.size(); ++i)
    h = ag::leaky_relu(ag::conv2d(h, conv_w_[i], conv_b_[i], 2, 1), kSlope);
  return ag::linear(ag::flatten(h), fc_w_, fc_b_);
}

// --- Generator ---------------------------------------------------------------

Generator::Generator(const NetworkConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  label_embedding_ = table_.add(
      "label_embedding", {config_.num_domains, config_.label_embed_dim},
      normal_values(rng, static_cast<std::size_t>(config_.num_domains) * config_.label_embed_dim,
                    1.0));
  int in = config_.latent_dim + config_.label_embed_dim;
  for (int i = 0; i < config_.mapping_layers; ++i) {
    const std::string name = "mapping" + std::to_string(i);
    map_w_.push_back(table_.add(name + ".weight", {config_.w_dim, in},
                                he(rng, static_cast<std::size_t>(config_.w_dim) * in, in)));
    map_b_.push_back(zeros_param(table_, name + ".bias", config_.w_dim));
    in = config_.w_dim;
  }
  const int c4 = config_.channels_at(4);
  const_input_ = table_.add("const", {1, c4, 4, 4}, normal_values(rng, c4 * 16, 1.0));

  const int layers = config_.num_layers();
  for (int l = 0; l < layers; ++l) {
    const int res = 4 << l;
    const int cin = l == 0 ? c4 : config_.channels_at(res / 2);
    const int cout = config_.channels_at(res);
    const std::string name = "layer" + std::to_string(l);
    affine_w_.push_back(table_.add(
        name + ".affine.weight", {cin, config_.w_dim},
        he(rng, static_cast<std::size_t>(cin) * config_.w_dim, config_.w_dim, 1.0)));
    affine_b_.push_back(table_.add(name + ".affine.bias", {cin},
                                   std::vector<double>(static_cast<std::size_t>(cin), 1.0)));
    layer_w_.push_back(conv_weight(table_, rng, name + ".weight", cout, cin, 3));
    layer_b_.push_back(zeros_param(table_, name + ".bias", cout));
  }
  const int top = config_.channels_at(config_.image_size);
  rgb_affine_w_ = table_.add("to_rgb.affine.weight", {top, config_.w_dim},
                             he(rng, static_cast<std::size_t>(top) * config_.w_dim, config_.w_dim, 1.0));
  rgb_affine_b_ = table_.add("to_rgb.affine.bias", {top},
                             std::vector<double>(static_cast<std::size_t>(top), 1.0));
  rgb_w_ = conv_weight(table_, rng, "to_rgb.weight", config_.channels, top, 1, true);
  rgb_b_ = zeros_param(table_, "to_rgb.bias", config_.channels);
}

Tensor Generator::map(const Tensor& z, std::span<const int> target) const {
  if (z.rank() != 2 || z.dim(1) != config_.latent_dim)
    throw ValidationError("generate: latent codes must be [B, " +
                          std::to_string(config_.latent_dim) + "], got " + ag::to_string(z.shape()));
  for (double v : z.values())
    if (!std::isfinite(v)) throw ValidationError("generate: non-finite latent code");
  check_labels(target, z.dim(0), config_.num_domains, "generate");
  Tensor h = ag::concat_features(z, ag::embedding(label_embedding_, target));
  for (std::size_t i = 0; i < map_w_.size(); ++i)
    h = ag::leaky_relu(ag::linear(h, map_w_[i], map_b_[i]), kSlope);
  return h;
}

Tensor Generator::synthesize(std::span<const Tensor> ws) const {
  if (ws.size() != layer_w_.size())
    throw ValidationError("synthesize: expected one style vector per layer");
  const int batch = ws[0].dim(0);
  std::vector<int> zeros(static_cast<std::size_t>(batch), 0);
  Tensor x = ag::gather_rows(const_input_, zeros);
  for (std::size_t l = 0; l < layer_w_.size(); ++l) {
    if (l > 0) x = ag::upsample2x(x);
    Tensor style = ag::linear(ws[l], affine_w_[l], affine_b_[l]);
    Tensor y = ag::conv2d(ag::scale_channels(x, style), layer_w_[l], Tensor(), 1, 1);
    y = ag::scale_channels(y, ag::demod_coeffs(layer_w_[l], style, 1e-8));
    x = ag::leaky_relu(ag::add_bias(y, layer_b_[l]), kSlope);
  }
  Tensor style = ag::linear(ws.back(), rgb_affine_w_, rgb_affine_b_);
  Tensor rgb = ag::conv2d(ag::scale_channels(x, style), rgb_w_, rgb_b_, 1, 0);
  return ag::tanh(rgb);
}

Tensor Generator::forward(const Tensor& z, std::span<const int> target,
                          const std::optional<StyleMix>& mix) const {
  const int layers = num_layers();
  Tensor w = map(z, target);
  std::vector<Tensor> ws(static_cast<std::size_t>(layers), w);
  if (mix) {
    if (mix->crossover < 0 || mix->crossover > layers)
      throw ValidationError("style mix crossover " + std::to_string(mix->crossover) +
                            " outside [0, " + std::to_string(layers) + "]");
    if (!mix->second.defined() || mix->second.shape() != z.shape())
      throw ValidationError("style mix code must match the primary code shape");
    if (mix->crossover < layers) {
      Tensor w2 = map(mix->second, target);
      for (int l = mix->crossover; l < layers; ++l) ws[static_cast<std::size_t>(l)] = w2;
    }
  }
  return synthesize(ws);
}

// --- Discriminator -----------------------------------------------------------

std::vector<double> DiscriminatorOutput::realness() const {
  std::vector<double> r(realness_logit.numel());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = 1.0 / (1.0 + std::exp(-realness_logit.at(i)));
  return r;
}

Tensor timestep_embedding(std::span<const int> t, int dim) {
  const int half = dim / 2;
  std::vector<double> v(t.size() * static_cast<std::size_t>(dim));
  for (std::size_t b = 0; b < t.size(); ++b)
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      v[b * dim + i] = std::sin(t[b] * freq);
      v[b * dim + half + i] = std::cos(t[b] * freq);
    }
  return Tensor::from({static_cast<int>(t.size()), dim}, std::move(v));
}

Discriminator::Discriminator(const NetworkConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const int s = config_.image_size;
  conv_w_.push_back(
      conv_weight(table_, rng, "stem.weight", config_.channels_at(s), config_.channels, 3));
  conv_b_.push_back(zeros_param(table_, "stem.bias", config_.channels_at(s)));
  for (int res = s; res > 4; res /= 2) {
    const std::string name = "down" + std::to_string(res);
    conv_w_.push_back(conv_weight(table_, rng, name + ".weight", config_.channels_at(res / 2),
                                  config_.channels_at(res), 3));
    conv_b_.push_back(zeros_param(table_, name + ".bias", config_.channels_at(res / 2)));
  }
  const int mid = config_.channels_at(s / 2);
  const int te = config_.timestep_embed_dim;
  temb_w_ = table_.add("timestep.weight", {mid, te},
                       he(rng, static_cast<std::size_t>(mid) * te, te, 1.0));
  temb_b_ = zeros_param(table_, "timestep.bias", mid);
  const int flat = config_.channels_at(4) * 16;
  const int fc = config_.disc_fc_dim;
  fc_w_ = table_.add("fc.weight", {fc, flat}, he(rng, static_cast<std::size_t>(fc) * flat, flat));
  fc_b_ = zeros_param(table_, "fc.bias", fc);
  real_w_ = table_.add("realness.weight", {1, fc}, he(rng, static_cast<std::size_t>(fc), fc, 1.0));
  real_b_ = zeros_param(table_, "realness.bias", 1);
  domain_w_ = table_.add("domain.weight", {config_.num_domains, fc},
                         he(rng, static_cast<std::size_t>(config_.num_domains) * fc, fc, 1.0));
  domain_b_ = zeros_param(table_, "domain.bias", config_.num_domains);
}

DiscriminatorOutput Discriminator::forward(const Tensor& y, std::span<const int> t) const {
  check_images(y, config_, "discriminate");
  if (t.size() != static_cast<std::size_t>(y.dim(0)))
    throw ValidationError("discriminate: expected one timestep per sample");
  for (int ti : t)
    if (ti < 0) throw ValidationError("discriminate: negative timestep");
  Tensor h = ag::leaky_relu(ag::conv2d(y, conv_w_[0], conv_b_[0], 1, 1), kSlope);
  for (std::size_t i = 1; i < conv_w_.size(); ++i) {
    h = ag::leaky_relu(ag::conv2d(h, conv_w_[i], conv_b_[i], 2, 1), kSlope);
    if (i == 1)
      h = ag::add_channels(
          h, ag::linear(timestep_embedding(t, config_.timestep_embed_dim), temb_w_, temb_b_));
  }
  Tensor f = ag::leaky_relu(ag::linear(ag::flatten(h), fc_w_, fc_b_), kSlope);
  Tensor raw = ag::reshape(ag::linear(f, real_w_, real_b_), {y.dim(0)});
  // Soft bound keeps sigmoid(logit) strictly inside (0,1) in double precision.
  Tensor logit = ag::scale(ag::tanh(ag::scale(raw, 1.0 / kLogitBound)), kLogitBound);
  return {logit, ag::linear(f, domain_w_, domain_b_)};
}

// --- Feature extractor -------------------------------------------------------

FeatureExtractor::FeatureExtractor(const NetworkConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.phi_seed, 0xf1ULL));
  int cin = config.channels;
  for (std::size_t i = 0; i < config.phi_channels.size(); ++i) {
    const std::string name = "block" + std::to_string(i);
    const int cout = config.phi_channels[i];
    conv_w_.push_back(conv_weight(table_, rng, name + ".weight", cout, cin, 3, false));
    conv_b_.push_back(table_.add(name + ".bias", {cout}, normal_values(rng, cout, 0.1), false));
    cin = cout;
  }
}

std::vector<Tensor> FeatureExtractor::features(const Tensor& x) const {
  std::vector<Tensor> out;
  Tensor h = x;
  for (std::size_t i = 0; i < conv_w_.size(); ++i) {
    h = ag::avg_pool2x(ag::leaky_relu(ag::conv2d(h, conv_w_[i], conv_b_[i], 1, 1), kSlope));
    out.push_back(h);
  }
  return out;
}

Tensor FeatureExtractor::embed(const Tensor& x) const {
  return ag::global_avg_pool(features(x).back());
}

// --- Bundle ------------------------------------------------------------------

ModelBundle::ModelBundle(const NetworkConfig& cfg, Rng& rng)
    : config(cfg), encoder(cfg, rng), generator(cfg, rng), discriminator(cfg, rng), phi(cfg) {}

namespace {
void append(NamedParams& out, const std::string& prefix, const NamedParams& in) {
  for (const auto& [name, t] : in) out.emplace_back(prefix + name, t);
}
}  // namespace

NamedParams ModelBundle::all_parameters() const {
  NamedParams out;
  append(out, "encoder.", encoder.parameters());
  append(out, "generator.", generator.parameters());
  append(out, "discriminator.", discriminator.parameters());
  append(out, "phi.", phi.parameters());
  return out;
}

NamedParams ModelBundle::generator_side() const {
  NamedParams out;
  append(out, "encoder.", encoder.parameters());
  append(out, "generator.", generator.parameters());
  return out;
}

std::size_t ModelBundle::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : all_parameters()) n += t.numel();
  return n;
}

void ModelBundle::set_discriminator_trainable(bool on) const {
  for (auto [name, t] : discriminator.parameters()) t.set_requires_grad(on);
}

ModelBundle init_bundle(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, 0x6e7ULL));
  return ModelBundle(config, rng);
}

Tensor encode(const ModelBundle& bundle, const Tensor& x, std::span<const int> source) {
  return bundle.encoder.forward(x, source);
}

Tensor generate(const ModelBundle& bundle, const Tensor& z, std::span<const int> target,
                const std::optional<StyleMix>& mix) {
  return bundle.generator.forward(z, target, mix);
}

DiscriminatorOutput discriminate(const ModelBundle& bundle, const Tensor& y,
                                 std::span<const int> t) {
  return bundle.discriminator.forward(y, t);
}

std::vector<Tensor> perceptual_features(const ModelBundle& bundle, const Tensor& x) {
  return bundle.phi.features(x);
}

std::uint64_t checksum(const NamedParams& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, t] : params) {
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(t.values().data(), t.values().size() * sizeof(double), h);
  }
  return h;
}

}  // namespace midsg
