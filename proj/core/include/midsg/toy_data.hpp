#pragma once

// Procedural multi-domain "toy ocular" imagery: a dark pupil disc inside a
// radially textured iris annulus on a bright sclera, plus per-domain
// presentation-attack overlays. Datasets live on disk as
// <root>/<domain>/<index>.png with a <root>/manifest.json.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/autograd.hpp"
#include "midsg/image_io.hpp"
#include "midsg/rng.hpp"

namespace midsg {

struct DomainLabel {
  int index = 0;
  std::string name;

  friend bool operator==(const DomainLabel&, const DomainLabel&) = default;
};

enum class DomainEffect { none, halftone_overlay, ring_overlay };

std::string to_string(DomainEffect effect);
DomainEffect parse_domain_effect(const std::string& name);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct ToyDomainSpec {
  int image_size = 32;
  int channels = 1;
  Range pupil_radius_range{0.08, 0.14};   // fraction of width
  Range iris_radius_range{0.26, 0.36};    // fraction of width
  Range iris_texture_frequency_range{5.0, 11.0};  // cycles around the annulus
  DomainEffect domain_effect = DomainEffect::none;
  double effect_strength = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// A domain of a generated dataset together with how it is rendered.
struct ToyDomain {
  DomainLabel label;
  DomainEffect effect = DomainEffect::none;
  double strength = 1.0;
};

// bonafide (no overlay), print (halftone), lens (rings).
std::vector<ToyDomain> default_toy_domains();

// Renders image `index` of stream `stream` under `spec`. Geometry is drawn
// before any effect randomness, so changing only the effect keeps geometry.
Image8 render_toy_image(const ToyDomainSpec& spec, std::uint64_t stream, std::uint64_t index);

// Writes per_domain_count images per domain plus manifest.json. Rendering is
// a pure function of (spec, domain index, image index).
void generate_toy_dataset(const ToyDomainSpec& spec, int per_domain_count,
                          std::span<const ToyDomain> domains,
                          const std::filesystem::path& root);

std::string image_filename(int index);

struct Sample {
  std::filesystem::path path;
  DomainLabel label;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
  double split_fraction = 0.70;
  std::vector<DomainLabel> domains;
};

// Domains of a dataset root: from manifest.json when present, otherwise the
// sorted subdirectory names.
std::vector<DomainLabel> read_domains(const std::filesystem::path& root);

// All images of a dataset root, grouped by domain, files sorted by name.
std::vector<Sample> list_samples(const std::filesystem::path& root);

// Stratified split. Per domain with n images, the test share is
// floor(n * (1 - fraction)) clamped to [1, n-1]; the remainder goes to train.
DatasetSplit split_dataset(const std::filesystem::path& root, double fraction = 0.70,
                           std::uint64_t seed = 0);

// Images in [-1,1], shape [B,C,H,W], paired with domain indices.
struct ImageBatch {
  ag::Tensor data;
  std::vector<int> labels;

  int size() const { return data.defined() ? data.dim(0) : 0; }
  // Throws ValidationError on NaN/Inf, out-of-range values, or bad shapes.
  void validate(int num_domains = -1) const;
};

// Decodes and stacks the given samples in order.
ImageBatch load_batch(std::span<const Sample> samples);

// Epoch-shuffled sampling without replacement. Batches always have the
// requested size; a batch that crosses an epoch boundary takes the tail of the
// old permutation followed by the head of a fresh one.
class BatchIterator {
 public:
  BatchIterator(std::vector<Sample> samples, std::uint64_t seed);

  ImageBatch next(int batch_size);

  std::size_t size() const { return samples_.size(); }
  long epoch() const { return epoch_; }
  // Sample indices emitted by the most recent next() call.
  const std::vector<int>& last_indices() const { return last_; }

  nlohmann::json save_state() const;
  void restore_state(const nlohmann::json& state);

 private:
  void reshuffle();
  const std::vector<double>& pixels(int index);

  std::vector<Sample> samples_;
  std::map<int, std::vector<double>> cache_;
  Rng rng_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  long epoch_ = 0;
  std::vector<int> last_;
  int channels_ = 0, height_ = 0, width_ = 0;
};

}  // namespace midsg
