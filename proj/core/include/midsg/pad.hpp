#pragma once

// Bonafide-vs-attack detector and the two-arm augmentation experiment.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/networks.hpp"
#include "midsg/roc.hpp"
#include "midsg/toy_data.hpp"

namespace midsg {

struct PadDetectorConfig {
  std::vector<int> widths{24, 48, 96, 128};  // one conv block per entry
  int epochs = 8;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static PadDetectorConfig from_json(const nlohmann::json& j);
};

class PadDetector {
 public:
  PadDetector(const PadDetectorConfig& config, int channels, int image_size);
  // Attack logits [B].
  ag::Tensor forward(const ag::Tensor& x) const;
  std::vector<double> score(const ag::Tensor& x) const;
  const NamedParams& parameters() const { return table_.items(); }
  std::size_t parameter_count() const;

 private:
  ParamTable table_;
  std::vector<ag::Tensor> conv_w_, conv_b_;
  ag::Tensor fc_w_, fc_b_;
};

// Samples whose domain is bonafide carry label 0, every other domain 1.
// The bonafide domain is the one named "bonafide", else index 0.
int bonafide_index(const std::vector<DomainLabel>& domains);

PadDetector train_pad_detector(const PadDetectorConfig& config, const std::vector<Sample>& train,
                               int bonafide);

struct PadTestSet {
  std::string name;
  std::vector<Sample> samples;
};

struct PadArmResult {
  std::string name;  // "Experiment-0" (real only) or "Experiment-1" (real + synthetic)
  std::size_t train_images = 0;
  std::vector<std::pair<std::string, std::vector<double>>> tdr;  // per test set
};

struct PadReport {
  std::vector<double> fdr_targets;
  std::vector<PadArmResult> arms;

  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

// Default test sets: the whole held-out split, then bonafide paired with each
// attack domain on its own.
std::vector<PadTestSet> default_pad_test_sets(const DatasetSplit& split);

// Synthetic images under <synth_dir>/<domain name>/*.png.
std::vector<Sample> synthetic_samples(const std::filesystem::path& synth_dir,
                                      const std::vector<DomainLabel>& domains);

// Trains one detector on `train` and scores every test set.
PadArmResult run_pad_arm(const std::string& name, const std::vector<Sample>& train,
                         const std::vector<PadTestSet>& test_sets, const PadDetectorConfig& det,
                         int bonafide, std::span<const double> fdr_targets = kDefaultFdrTargets);

PadReport pad_experiment(const DatasetSplit& train_real,
                         const std::optional<std::filesystem::path>& synth_dir,
                         const std::vector<PadTestSet>& test_sets, const PadDetectorConfig& det);

// pad-bench configuration file.
struct PadBenchConfig {
  std::string data_dir;
  std::string synth_dir;  // empty: baseline arm only
  std::string out = "pad_report.json";
  double split_fraction = 0.70;
  std::uint64_t split_seed = 0;
  PadDetectorConfig detector;

  static PadBenchConfig from_json(const nlohmann::json& j);
  static std::string help();
};

PadBenchConfig load_pad_bench_config(const std::filesystem::path& file);

}  // namespace midsg
