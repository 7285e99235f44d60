#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/checkpoint.hpp"
#include "midsg/config.hpp"
#include "midsg/diffusion.hpp"
#include "midsg/losses.hpp"
#include "midsg/networks.hpp"
#include "midsg/optim.hpp"
#include "midsg/rng.hpp"
#include "midsg/toy_data.hpp"

namespace midsg {

struct StepOutcome {
  long step = 0;  // 1-based index of the completed step
  LossReport d_report, g_report;
  double r_d = 0.0;        // most recent overfitting metric
  int t_current = 0;       // diffusion length after this step
  bool schedule_updated = false;

  // One metrics record: step, every loss term, totals, r_d, t_current.
  nlohmann::json to_json() const;
};

struct TrainState {
  TrainConfig config;
  long step = 0;
  ModelBundle bundle;
  Adam opt_d, opt_g;
  AdaptiveDiffusionState diffusion;
  NoiseSchedule schedule;
  Rng rng;
  double path_mean = 0.0;
  bool path_mean_ready = false;
  std::vector<double> rd_realness;  // realness on diffused reals since the last update
  int rd_batches = 0;
  long schedule_updates = 0;
  std::vector<StepOutcome> history;

  explicit TrainState(const TrainConfig& config);
};

// One D step followed by one G/E step on `real`; see the README for order.
StepOutcome train_step(TrainState& state, const ImageBatch& real);

// Checkpoint = archive with parameters, optimizer moments and a meta block
// holding config, diffusion state, RNG state, counters and `extra`.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  std::unique_ptr<TrainState> state;
  nlohmann::json extra;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Parameters and config only, for inference.
struct TrainedModel {
  TrainConfig config;
  ModelBundle bundle;
  std::vector<DomainLabel> domains;
  std::string hash;
};
TrainedModel load_model(const std::filesystem::path& path);

class RunDirectory {
 public:
  // Creates root with checkpoints/, samples/, metrics/, reports/ and
  // run.json. A fresh root is assembled in a sibling and renamed into place.
  static RunDirectory create(const std::filesystem::path& root, const TrainConfig& config);
  static nlohmann::json run_record(const TrainConfig& config);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path checkpoints() const { return root_ / "checkpoints"; }
  std::filesystem::path samples() const { return root_ / "samples"; }
  std::filesystem::path metrics() const { return root_ / "metrics"; }
  std::filesystem::path reports() const { return root_ / "reports"; }
  std::filesystem::path checkpoint_path(long step) const;

 private:
  explicit RunDirectory(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path root_;
};

std::string code_version();

struct FitOptions {
  std::optional<std::filesystem::path> resume;
  std::function<void(const StepOutcome&)> on_step;
  bool progress = false;  // one line per 50 steps on stderr
};

// Runs config.total_steps steps in config.out_dir and returns the final
// checkpoint. Metrics go to metrics/metrics.jsonl (deterministic) and
// metrics/timing.jsonl (wall time).
std::filesystem::path fit(const TrainConfig& config, const DatasetSplit& dataset,
                          const FitOptions& options = {});

// G(E(x, s), c) without style mixing, evaluated without gradient tracking.
ag::Tensor translate(const ModelBundle& bundle, const ag::Tensor& x, std::span<const int> source,
                     std::span<const int> target, int chunk = 64);

// Writes `count` translated PNGs (cycling through the sources in a
// seed-determined order) plus manifest.json. source_dir may be a dataset
// root (the source domain's subdirectory is used) or a flat image folder.
std::filesystem::path translate_corpus(const std::filesystem::path& ckpt,
                                       const std::filesystem::path& source_dir, int source,
                                       int target, int count, const std::filesystem::path& out_dir,
                                       std::uint64_t seed = 0);

// Resolves a domain given as index or name against `domains`.
int resolve_domain(const std::string& text, std::span<const DomainLabel> domains);

}  // namespace midsg
