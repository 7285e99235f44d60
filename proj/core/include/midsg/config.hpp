#pragma once

// Flat training configuration. Every key of the config file maps to one
// field below; the schema table drives parsing, serialization, CLI flag
// overrides and help text.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/diffusion.hpp"
#include "midsg/losses.hpp"
#include "midsg/networks.hpp"

namespace midsg {

struct DiffusionConfig {
  int t_max = 64;
  int t_min = 4;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  double sigma = 0.5;
  double d_target = 0.6;
  int c_step = 1;
  int update_interval = 4;
  TimestepKind pi_kind = TimestepKind::uniform;

  AdaptiveDiffusionState initial_state() const;
  NoiseSchedule schedule() const;
};

struct TrainConfig {
  std::string data_dir;
  std::string out_dir = "run";
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  double split_fraction = 0.70;
  long total_steps = 0;
  int batch_size = 32;
  double lr_d = 2e-4;
  double lr_g = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  long checkpoint_interval = 1000;
  long eval_interval = 0;

  double mixing_prob = 0.9;
  bool path_reg = true;
  int path_batch = 4;
  double path_decay = 0.01;
  bool multi_domain_d = true;
  bool saturating_adv = false;
  bool literal_eq10 = false;

  LossWeights weights;
  DiffusionConfig diffusion;
  NetworkConfig network;

  void validate() const;

  friend bool operator==(const TrainConfig& a, const TrainConfig& b);
};

struct ConfigKeyInfo {
  std::string name;
  std::string type;  // int, float, bool, string, int_list
  bool required = false;
  std::string default_text;
  std::string help;
};

const std::vector<ConfigKeyInfo>& config_keys();
// "--help" listing of every key.
std::string config_help();

nlohmann::json to_json(const TrainConfig& config);
// Accepts a bare config object or a run.json wrapper {"config": {...}}.
// Unknown keys, missing required keys and type mismatches raise ValidationError.
TrainConfig config_from_json(const nlohmann::json& j);

// Loads the file (IoError if unreadable, ValidationError if malformed) and
// applies overrides keyed by config key name, values as command-line text.
TrainConfig resolve_config(const std::filesystem::path& file,
                           const std::map<std::string, std::string>& overrides = {});
void apply_override(nlohmann::json& j, const std::string& key, const std::string& text);

}  // namespace midsg
