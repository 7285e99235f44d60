#include "midsg/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "midsg/errors.hpp"

namespace midsg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(DomainEffect effect) {
  switch (effect) {
    case DomainEffect::none: return "none";
    case DomainEffect::halftone_overlay: return "halftone_overlay";
    case DomainEffect::ring_overlay: return "ring_overlay";
  }
  return "none";
}

DomainEffect parse_domain_effect(const std::string& name) {
  if (name == "none") return DomainEffect::none;
  if (name == "halftone_overlay") return DomainEffect::halftone_overlay;
  if (name == "ring_overlay") return DomainEffect::ring_overlay;
  throw ValidationError("unknown domain effect '" + name + "'");
}

void ToyDomainSpec::validate() const {
  auto check_range = [](const Range& r, const char* name, double upper) {
    if (!(r.lo > 0.0 && r.lo <= r.hi && r.hi < upper))
      throw ValidationError(std::string(name) + " must satisfy 0 < lo <= hi < " +
                            std::to_string(upper));
  };
  if (image_size < 8) throw ValidationError("image_size must be at least 8");
  if (channels != 1 && channels != 3) throw ValidationError("channels must be 1 or 3");
  check_range(pupil_radius_range, "pupil_radius_range", 0.5);
  check_range(iris_radius_range, "iris_radius_range", 0.5);
  if (pupil_radius_range.hi >= iris_radius_range.lo)
    throw ValidationError("pupil_radius_range must lie below iris_radius_range");
  if (!(iris_texture_frequency_range.lo > 0.0 &&
        iris_texture_frequency_range.lo <= iris_texture_frequency_range.hi))
    throw ValidationError("iris_texture_frequency_range must be positive and ordered");
  if (!(effect_strength >= 0.0 && effect_strength <= 1.0))
    throw ValidationError("effect_strength must lie in [0,1]");
}

std::vector<ToyDomain> default_toy_domains() {
  return {{{0, "bonafide"}, DomainEffect::none, 0.0},
          {{1, "print"}, DomainEffect::halftone_overlay, 1.0},
          {{2, "lens"}, DomainEffect::ring_overlay, 1.0}};
}

namespace {

double draw(Rng& rng, const Range& r) { return r.lo + (r.hi - r.lo) * uniform01(rng); }

// 0 below edge - 0.5, 1 above edge + 0.5, linear in between (1px anti-aliasing).
double ramp(double x, double edge) { return std::clamp(x - edge + 0.5, 0.0, 1.0); }

}  // namespace

Image8 render_toy_image(const ToyDomainSpec& spec, std::uint64_t stream, std::uint64_t index) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, stream, index));
  const int n = spec.image_size;
  const double size = n;

  // Geometry.
  const double cx = size / 2.0 + (uniform01(rng) - 0.5) * 0.12 * size;
  const double cy = size / 2.0 + (uniform01(rng) - 0.5) * 0.12 * size;
  const double r_pupil = draw(rng, spec.pupil_radius_range) * size;
  const double r_iris = draw(rng, spec.iris_radius_range) * size;
  const double freq = std::round(draw(rng, spec.iris_texture_frequency_range));
  const double rotation = 2.0 * std::numbers::pi * uniform01(rng);
  const double iris_level = 0.35 + 0.15 * uniform01(rng);
  const double sclera_level = 0.78 + 0.12 * uniform01(rng);
  const double tint[3] = {1.0 + 0.25 * uniform01(rng), 0.95, 0.75 + 0.2 * uniform01(rng)};
  std::vector<double> grain(static_cast<std::size_t>(n) * n);
  fill_normal(rng, grain, 0.015);

  // Effect parameters are drawn afterwards so geometry is effect-independent.
  const int phase_x = uniform_int(rng, 0, 3);
  const int phase_y = uniform_int(rng, 0, 3);
  const double ring_phase = 2.0 * std::numbers::pi * uniform01(rng);
  const double s = spec.effect_strength;

  Image8 image{n, n, spec.channels, {}};
  image.pixels.resize(static_cast<std::size_t>(n) * n * spec.channels);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double r = std::hypot(dx, dy);
      const double theta = std::atan2(dy, dx);
      const double t_iris = ramp(r, r_pupil) * (1.0 - ramp(r, r_iris));  // annulus mask
      const double in_pupil = 1.0 - ramp(r, r_pupil);
      const double radial = std::clamp((r - r_pupil) / (r_iris - r_pupil), 0.0, 1.0);
      const double texture = 0.10 * std::sin(freq * theta + rotation) +
                             0.04 * std::cos(2.0 * freq * theta - 1.3 * rotation) -
                             0.06 * radial * radial;
      const double lid = 0.10 * std::pow((y + 0.5 - size / 2.0) / size, 2.0) * 4.0;
      double v = (1.0 - t_iris - in_pupil) * (sclera_level - lid) +
                 t_iris * (iris_level + texture) + in_pupil * 0.06;

      double iris_weight = t_iris;
      switch (spec.domain_effect) {
        case DomainEffect::none:
          break;
        case DomainEffect::halftone_overlay: {
          const double gx = std::cos(2.0 * std::numbers::pi * (x + phase_x) / 4.0);
          const double gy = std::cos(2.0 * std::numbers::pi * (y + phase_y) / 4.0);
          const double dots = 0.5 + 0.5 * gx * gy;  // regular halftone grid
          const double printed = (0.5 + 0.65 * (v - 0.5)) * (1.0 - 0.45 * dots) + 0.12;
          v = (1.0 - s) * v + s * printed;
          break;
        }
        case DomainEffect::ring_overlay: {
          const double rings = std::sin(2.0 * std::numbers::pi * r / 3.0 + ring_phase);
          const double lens = v - 0.08 + 0.22 * rings;
          const double cover = ramp(r, r_pupil * 0.8) * (1.0 - ramp(r, r_iris + 1.0));
          v = v + s * cover * (lens - v);
          iris_weight = std::max(iris_weight, s * cover);
          break;
        }
      }
      v += grain[static_cast<std::size_t>(y) * n + x];

      const std::size_t p = (static_cast<std::size_t>(y) * n + x) * spec.channels;
      for (int c = 0; c < spec.channels; ++c) {
        double vc = v;
        if (spec.channels == 3) vc = v * (1.0 - iris_weight + iris_weight * tint[c]);
        image.pixels[p + c] =
            static_cast<std::uint8_t>(std::lround(std::clamp(vc, 0.0, 1.0) * 255.0));
      }
    }
  return image;
}

std::string image_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d.png", index);
  return buf;
}

void generate_toy_dataset(const ToyDomainSpec& spec, int per_domain_count,
                          std::span<const ToyDomain> domains, const fs::path& root) {
  spec.validate();
  if (per_domain_count < 1) throw ValidationError("per_domain_count must be at least 1");
  if (domains.size() < 2) throw ValidationError("at least two domains are required");
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i].label.index != static_cast<int>(i))
      throw ValidationError("domain indices must be 0..n-1 in order");
    if (domains[i].label.name.empty()) throw ValidationError("domain name must be nonempty");
  }

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create dataset directory " + root.string() + ": " + ec.message());

  json manifest;
  manifest["format"] = "midsg-toy-dataset";
  manifest["version"] = 1;
  manifest["seed"] = spec.seed;
  manifest["image_size"] = spec.image_size;
  manifest["channels"] = spec.channels;
  manifest["count"] = per_domain_count;
  manifest["pupil_radius_range"] = {spec.pupil_radius_range.lo, spec.pupil_radius_range.hi};
  manifest["iris_radius_range"] = {spec.iris_radius_range.lo, spec.iris_radius_range.hi};
  manifest["iris_texture_frequency_range"] = {spec.iris_texture_frequency_range.lo,
                                              spec.iris_texture_frequency_range.hi};
  manifest["domains"] = json::array();

  for (const auto& domain : domains) {
    ToyDomainSpec ds = spec;
    ds.domain_effect = domain.effect;
    ds.effect_strength = domain.strength;
    const fs::path dir = root / domain.label.name;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (int i = 0; i < per_domain_count; ++i)
      write_png(dir / image_filename(i),
                render_toy_image(ds, static_cast<std::uint64_t>(domain.label.index),
                                 static_cast<std::uint64_t>(i)));
    manifest["domains"].push_back({{"index", domain.label.index},
                                   {"name", domain.label.name},
                                   {"effect", to_string(domain.effect)},
                                   {"strength", domain.strength}});
  }

  std::ofstream out(root / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + (root / "manifest.json").string());
}

std::vector<DomainLabel> read_domains(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
  std::vector<DomainLabel> domains;
  const fs::path manifest_path = root / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    json manifest;
    try {
      manifest = json::parse(in);
      for (const auto& d : manifest.at("domains"))
        domains.push_back({d.at("index").get<int>(), d.at("name").get<std::string>()});
    } catch (const json::exception& e) {
      throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    std::sort(domains.begin(), domains.end(),
              [](const auto& a, const auto& b) { return a.index < b.index; });
  } else {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    for (std::size_t i = 0; i < names.size(); ++i)
      domains.push_back({static_cast<int>(i), names[i]});
  }
  if (domains.empty()) throw ValidationError("no domains found under " + root.string());
  return domains;
}

std::vector<Sample> list_samples(const fs::path& root) {
  std::vector<Sample> samples;
  for (const auto& domain : read_domains(root)) {
    const fs::path dir = root / domain.name;
    if (!fs::is_directory(dir)) throw ValidationError("missing domain directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".png")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (auto& f : files) samples.push_back({std::move(f), domain});
  }
  return samples;
}

DatasetSplit split_dataset(const fs::path& root, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ValidationError("split fraction must lie in (0,1)");
  DatasetSplit split;
  split.split_fraction = fraction;
  split.domains = read_domains(root);
  const auto all = list_samples(root);
  for (const auto& domain : split.domains) {
    std::vector<Sample> group;
    for (const auto& s : all)
      if (s.label.index == domain.index) group.push_back(s);
    const int n = static_cast<int>(group.size());
    if (n < 2)
      throw ValidationError("domain '" + domain.name + "' needs at least 2 images, found " +
                            std::to_string(n));
    Rng rng(derive_seed(seed, 0x5b117ULL, static_cast<std::uint64_t>(domain.index)));
    for (int i = n - 1; i > 0; --i) std::swap(group[i], group[uniform_int(rng, 0, i)]);
    int n_test = static_cast<int>(std::floor(n * (1.0 - fraction) + 1e-9));
    n_test = std::clamp(n_test, 1, n - 1);
    const int n_train = n - n_test;
    split.train.insert(split.train.end(), group.begin(), group.begin() + n_train);
    split.test.insert(split.test.end(), group.begin() + n_train, group.end());
  }
  return split;
}

void ImageBatch::validate(int num_domains) const {
  if (!data.defined() || data.rank() != 4) throw ValidationError("image batch must be rank 4");
  if (data.dim(0) < 1) throw ValidationError("image batch is empty");
  if (data.dim(1) != 1 && data.dim(1) != 3)
    throw ValidationError("image batch must have 1 or 3 channels");
  if (labels.size() != static_cast<std::size_t>(data.dim(0)))
    throw ValidationError("image batch label count does not match batch size");
  for (double v : data.values())
    if (!std::isfinite(v) || v < -1.0 || v > 1.0)
      throw ValidationError("image batch values must be finite and within [-1,1]");
  if (num_domains > 0)
    for (int l : labels)
      if (l < 0 || l >= num_domains) throw ValidationError("domain label out of range");
}

ImageBatch load_batch(std::span<const Sample> samples) {
  if (samples.empty()) throw ValidationError("load_batch: no samples");
  std::vector<double> data;
  std::vector<int> labels;
  int c = 0, h = 0, w = 0;
  for (const auto& s : samples) {
    Image8 img = read_png(s.path);
    if (labels.empty()) {
      c = img.channels, h = img.height, w = img.width;
    } else if (img.channels != c || img.height != h || img.width != w) {
      throw IoError("image has inconsistent dimensions: " + s.path.string());
    }
    auto planar = to_planar_unit(img);
    data.insert(data.end(), planar.begin(), planar.end());
    labels.push_back(s.label.index);
  }
  return {ag::Tensor::from({static_cast<int>(samples.size()), c, h, w}, std::move(data)),
          std::move(labels)};
}

BatchIterator::BatchIterator(std::vector<Sample> samples, std::uint64_t seed)
    : samples_(std::move(samples)), rng_(derive_seed(seed, 0xba7c4ULL)) {
  if (samples_.empty()) throw ValidationError("BatchIterator: no samples");
  reshuffle();
}

void BatchIterator::reshuffle() {
  order_.resize(samples_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  for (int i = static_cast<int>(order_.size()) - 1; i > 0; --i)
    std::swap(order_[i], order_[uniform_int(rng_, 0, i)]);
  cursor_ = 0;
}

const std::vector<double>& BatchIterator::pixels(int index) {
  auto it = cache_.find(index);
  if (it != cache_.end()) return it->second;
  const Sample& s = samples_[static_cast<std::size_t>(index)];
  Image8 img = read_png(s.path);
  if (channels_ == 0) {
    channels_ = img.channels, height_ = img.height, width_ = img.width;
  } else if (img.channels != channels_ || img.height != height_ || img.width != width_) {
    throw IoError("image has inconsistent dimensions: " + s.path.string());
  }
  return cache_.emplace(index, to_planar_unit(img)).first->second;
}

ImageBatch BatchIterator::next(int batch_size) {
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > samples_.size())
    throw ValidationError("batch_size must lie in [1, " + std::to_string(samples_.size()) + "]");
  last_.clear();
  std::vector<double> data;
  std::vector<int> labels;
  for (int i = 0; i < batch_size; ++i) {
    if (cursor_ == order_.size()) {
      reshuffle();
      ++epoch_;
    }
    const int idx = order_[cursor_++];
    last_.push_back(idx);
    const auto& px = pixels(idx);
    data.insert(data.end(), px.begin(), px.end());
    labels.push_back(samples_[static_cast<std::size_t>(idx)].label.index);
  }
  return {ag::Tensor::from({batch_size, channels_, height_, width_}, std::move(data)),
          std::move(labels)};
}

json BatchIterator::save_state() const {
  return {{"rng", save_rng(rng_)}, {"order", order_}, {"cursor", cursor_}, {"epoch", epoch_}};
}

void BatchIterator::restore_state(const json& state) {
  rng_ = restore_rng(state.at("rng").get<std::string>());
  order_ = state.at("order").get<std::vector<int>>();
  cursor_ = state.at("cursor").get<std::size_t>();
  epoch_ = state.at("epoch").get<long>();
  if (order_.size() != samples_.size() || cursor_ > order_.size())
    throw ValidationError("batch iterator state does not match the dataset");
}

}  // namespace midsg
