#include "midsg/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "midsg/errors.hpp"

namespace midsg {

using nlohmann::json;

AdaptiveDiffusionState DiffusionConfig::initial_state() const {
  AdaptiveDiffusionState s;
  s.t_min = t_min;
  s.t_max = t_max;
  s.t_current = t_min;
  s.d_target = d_target;
  s.c_step = c_step;
  s.update_interval = update_interval;
  s.pi_kind = pi_kind;
  return s;
}

NoiseSchedule DiffusionConfig::schedule() const {
  return build_schedule(t_max, beta_min, beta_max, sigma);
}

namespace {

struct Entry {
  ConfigKeyInfo info;
  std::function<json(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const json&)> set;
};

template <class T>
using Accessor = T& (*)(TrainConfig&);

bool type_matches(const std::string& type, const json& v) {
  if (type == "int") return v.is_number_integer();
  if (type == "uint") return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (type == "float") return v.is_number();
  if (type == "bool") return v.is_boolean();
  if (type == "string") return v.is_string();
  if (type == "int_list") {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!e.is_number_integer()) return false;
    return true;
  }
  return false;
}

template <class T>
Entry entry(std::string name, std::string type, bool required, std::string help, Accessor<T> acc) {
  Entry e;
  e.info.name = std::move(name);
  e.info.type = std::move(type);
  e.info.required = required;
  e.info.help = std::move(help);
  e.get = [acc](const TrainConfig& c) { return json(acc(const_cast<TrainConfig&>(c))); };
  e.set = [acc](TrainConfig& c, const json& v) { acc(c) = v.get<T>(); };
  TrainConfig defaults;
  e.info.default_text = required ? "" : json(acc(defaults)).dump();
  return e;
}

Entry pi_kind_entry() {
  Entry e;
  e.info = {"pi_kind", "string", false, "\"uniform\"",
            "timestep distribution over 1..T: uniform or priority (weight ~ t)"};
  e.get = [](const TrainConfig& c) { return json(to_string(c.diffusion.pi_kind)); };
  e.set = [](TrainConfig& c, const json& v) {
    c.diffusion.pi_kind = parse_timestep_kind(v.get<std::string>());
  };
  return e;
}

#define MIDSG_FIELD(expr) +[](TrainConfig& c) -> decltype(auto) { return (expr); }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(entry<std::string>("data_dir", "string", true, "toy dataset root", MIDSG_FIELD(c.data_dir)));
    t.push_back(entry<std::string>("out_dir", "string", false, "run directory", MIDSG_FIELD(c.out_dir)));
    t.push_back(entry<std::uint64_t>("seed", "uint", false, "training seed", MIDSG_FIELD(c.seed)));
    t.push_back(entry<std::uint64_t>("split_seed", "uint", false, "train/test split seed", MIDSG_FIELD(c.split_seed)));
    t.push_back(entry<double>("split_fraction", "float", false, "train share per domain", MIDSG_FIELD(c.split_fraction)));
    t.push_back(entry<long>("total_steps", "int", true, "number of training steps", MIDSG_FIELD(c.total_steps)));
    t.push_back(entry<int>("batch_size", "int", false, "minibatch size", MIDSG_FIELD(c.batch_size)));
    t.push_back(entry<double>("lr_d", "float", false, "discriminator learning rate", MIDSG_FIELD(c.lr_d)));
    t.push_back(entry<double>("lr_g", "float", false, "encoder/generator learning rate", MIDSG_FIELD(c.lr_g)));
    t.push_back(entry<double>("beta1", "float", false, "Adam first moment decay", MIDSG_FIELD(c.beta1)));
    t.push_back(entry<double>("beta2", "float", false, "Adam second moment decay", MIDSG_FIELD(c.beta2)));
    t.push_back(entry<long>("checkpoint_interval", "int", false, "steps between checkpoints (0: final only)", MIDSG_FIELD(c.checkpoint_interval)));
    t.push_back(entry<long>("eval_interval", "int", false, "steps between sample grids (0: off)", MIDSG_FIELD(c.eval_interval)));
    t.push_back(entry<double>("mixing_prob", "float", false, "probability of crossover style mixing per batch", MIDSG_FIELD(c.mixing_prob)));
    t.push_back(entry<bool>("path_reg", "bool", false, "path length regularization", MIDSG_FIELD(c.path_reg)));
    t.push_back(entry<int>("path_batch", "int", false, "samples used by the path length penalty", MIDSG_FIELD(c.path_batch)));
    t.push_back(entry<double>("path_decay", "float", false, "running mean decay of the path length", MIDSG_FIELD(c.path_decay)));
    t.push_back(entry<bool>("multi_domain_d", "bool", false, "discriminator domain head (false: single-domain ablation)", MIDSG_FIELD(c.multi_domain_d)));
    t.push_back(entry<bool>("saturating_adv", "bool", false, "saturating generator adversarial loss", MIDSG_FIELD(c.saturating_adv)));
    t.push_back(entry<bool>("literal_eq10", "bool", false, "mean-distance style mixing penalty between two translations", MIDSG_FIELD(c.literal_eq10)));
    t.push_back(entry<double>("lambda_adv", "float", false, "adversarial weight", MIDSG_FIELD(c.weights.adv)));
    t.push_back(entry<double>("lambda_domain", "float", false, "domain classification weight", MIDSG_FIELD(c.weights.domain)));
    t.push_back(entry<double>("lambda_recon", "float", false, "pixel reconstruction weight", MIDSG_FIELD(c.weights.recon)));
    t.push_back(entry<double>("lambda_lpips", "float", false, "perceptual reconstruction weight", MIDSG_FIELD(c.weights.lpips)));
    t.push_back(entry<double>("lambda_inr", "float", false, "identity (in-domain) weight", MIDSG_FIELD(c.weights.inr)));
    t.push_back(entry<double>("lambda_mix", "float", false, "style mixing penalty weight", MIDSG_FIELD(c.weights.mix)));
    t.push_back(entry<double>("lambda_path", "float", false, "path length penalty weight", MIDSG_FIELD(c.weights.path)));
    t.push_back(entry<int>("t_max", "int", false, "largest diffusion length", MIDSG_FIELD(c.diffusion.t_max)));
    t.push_back(entry<int>("t_min", "int", false, "smallest (and initial) diffusion length", MIDSG_FIELD(c.diffusion.t_min)));
    t.push_back(entry<double>("beta_min", "float", false, "first noise variance", MIDSG_FIELD(c.diffusion.beta_min)));
    t.push_back(entry<double>("beta_max", "float", false, "last noise variance", MIDSG_FIELD(c.diffusion.beta_max)));
    t.push_back(entry<double>("sigma", "float", false, "noise scale", MIDSG_FIELD(c.diffusion.sigma)));
    t.push_back(entry<double>("d_target", "float", false, "target overfitting metric", MIDSG_FIELD(c.diffusion.d_target)));
    t.push_back(entry<int>("c_step", "int", false, "diffusion length step per update", MIDSG_FIELD(c.diffusion.c_step)));
    t.push_back(entry<int>("update_interval", "int", false, "minibatches between diffusion length updates", MIDSG_FIELD(c.diffusion.update_interval)));
    t.push_back(pi_kind_entry());
    t.push_back(entry<int>("image_size", "int", false, "image side, 4*2^k", MIDSG_FIELD(c.network.image_size)));
    t.push_back(entry<int>("channels", "int", false, "image channels (1 or 3)", MIDSG_FIELD(c.network.channels)));
    t.push_back(entry<int>("num_domains", "int", false, "number of domains", MIDSG_FIELD(c.network.num_domains)));
    t.push_back(entry<int>("latent_dim", "int", false, "encoder code width", MIDSG_FIELD(c.network.latent_dim)));
    t.push_back(entry<int>("w_dim", "int", false, "style vector width", MIDSG_FIELD(c.network.w_dim)));
    t.push_back(entry<int>("mapping_layers", "int", false, "mapping network depth", MIDSG_FIELD(c.network.mapping_layers)));
    t.push_back(entry<int>("label_embed_dim", "int", false, "target label embedding width", MIDSG_FIELD(c.network.label_embed_dim)));
    t.push_back(entry<int>("source_embed_dim", "int", false, "source label embedding width", MIDSG_FIELD(c.network.source_embed_dim)));
    t.push_back(entry<int>("base_channels", "int", false, "convolution width at full resolution", MIDSG_FIELD(c.network.base_channels)));
    t.push_back(entry<int>("max_channels", "int", false, "convolution width cap", MIDSG_FIELD(c.network.max_channels)));
    t.push_back(entry<int>("timestep_embed_dim", "int", false, "discriminator timestep embedding width", MIDSG_FIELD(c.network.timestep_embed_dim)));
    t.push_back(entry<int>("disc_fc_dim", "int", false, "discriminator hidden width", MIDSG_FIELD(c.network.disc_fc_dim)));
    t.push_back(entry<std::vector<int>>("phi_channels", "int_list", false, "feature extractor widths", MIDSG_FIELD(c.network.phi_channels)));
    t.push_back(entry<std::uint64_t>("phi_seed", "uint", false, "feature extractor weight seed", MIDSG_FIELD(c.network.phi_seed)));
    return t;
  }();
  return table;
}

#undef MIDSG_FIELD

const Entry* find_entry(const std::string& name) {
  for (const auto& e : entries())
    if (e.info.name == name) return &e;
  return nullptr;
}

}  // namespace

void TrainConfig::validate() const {
  if (data_dir.empty()) throw ValidationError("config: data_dir is empty");
  if (total_steps <= 0) throw ValidationError("config: total_steps must be positive");
  if (batch_size <= 0) throw ValidationError("config: batch_size must be positive");
  if (!(lr_d > 0.0) || !(lr_g > 0.0)) throw ValidationError("config: learning rates must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ValidationError("config: beta1/beta2 must lie in [0, 1)");
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw ValidationError("config: split_fraction must lie in (0, 1)");
  if (checkpoint_interval < 0 || eval_interval < 0)
    throw ValidationError("config: intervals must be nonnegative");
  if (!(mixing_prob >= 0.0 && mixing_prob <= 1.0))
    throw ValidationError("config: mixing_prob must lie in [0, 1]");
  if (path_batch <= 0) throw ValidationError("config: path_batch must be positive");
  if (!(path_decay > 0.0 && path_decay <= 1.0))
    throw ValidationError("config: path_decay must lie in (0, 1]");
  if (!(diffusion.beta_min > 0.0 && diffusion.beta_min <= diffusion.beta_max && diffusion.beta_max < 1.0))
    throw ValidationError("config: need 0 < beta_min <= beta_max < 1");
  if (!(diffusion.sigma > 0.0)) throw ValidationError("config: sigma must be positive");
  weights.validate();
  diffusion.initial_state().validate();
  network.validate();
}

bool operator==(const TrainConfig& a, const TrainConfig& b) { return to_json(a) == to_json(b); }

const std::vector<ConfigKeyInfo>& config_keys() {
  static const std::vector<ConfigKeyInfo> keys = [] {
    std::vector<ConfigKeyInfo> k;
    for (const auto& e : entries()) k.push_back(e.info);
    return k;
  }();
  return keys;
}

std::string config_help() {
  std::ostringstream os;
  os << "Config keys (JSON object; each key may also be given as --key-name VALUE):\n";
  for (const auto& k : config_keys()) {
    os << "  " << k.name << " (" << k.type << ", "
       << (k.required ? std::string("required") : "default " + k.default_text) << ")\n      "
       << k.help << "\n";
  }
  return os.str();
}

json to_json(const TrainConfig& config) {
  json j = json::object();
  for (const auto& e : entries()) j[e.info.name] = e.get(config);
  return j;
}

TrainConfig config_from_json(const json& input) {
  const json& j = (input.is_object() && input.contains("config") && input["config"].is_object())
                      ? input["config"]
                      : input;
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!find_entry(key)) throw ValidationError("config: unknown key '" + key + "'");
  }
  TrainConfig config;
  for (const auto& e : entries()) {
    auto it = j.find(e.info.name);
    if (it == j.end()) {
      if (e.info.required) throw ValidationError("config: missing required key '" + e.info.name + "'");
      continue;
    }
    if (!type_matches(e.info.type, *it))
      throw ValidationError("config: key '" + e.info.name + "' expects " + e.info.type);
    e.set(config, *it);
  }
  config.validate();
  return config;
}

void apply_override(json& j, const std::string& key, const std::string& text) {
  const Entry* e = find_entry(key);
  if (!e) throw ValidationError("config: unknown key '" + key + "'");
  const auto& type = e->info.type;
  auto bad = [&] { return ValidationError("config: cannot parse '" + text + "' as " + type + " for " + key); };
  try {
    std::size_t used = 0;
    if (type == "int") {
      long long v = std::stoll(text, &used);
      if (used != text.size()) throw bad();
      j[key] = v;
    } else if (type == "uint") {
      if (!text.empty() && text[0] == '-') throw bad();
      unsigned long long v = std::stoull(text, &used);
      if (used != text.size()) throw bad();
      j[key] = v;
    } else if (type == "float") {
      double v = std::stod(text, &used);
      if (used != text.size()) throw bad();
      j[key] = v;
    } else if (type == "bool") {
      if (text == "true" || text == "1") j[key] = true;
      else if (text == "false" || text == "0") j[key] = false;
      else throw bad();
    } else if (type == "int_list") {
      json arr = json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        int v = std::stoi(item, &used);
        if (used != item.size()) throw bad();
        arr.push_back(v);
      }
      j[key] = arr;
    } else {
      j[key] = text;
    }
  } catch (const std::logic_error&) {
    throw bad();
  }
}

TrainConfig resolve_config(const std::filesystem::path& file,
                           const std::map<std::string, std::string>& overrides) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open config file " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& err) {
    throw ValidationError("config file " + file.string() + " is not valid JSON: " + err.what());
  }
  if (j.is_object() && j.contains("config") && j["config"].is_object()) j = j["config"];
  for (const auto& [key, text] : overrides) apply_override(j, key, text);
  return config_from_json(j);
}

}  // namespace midsg
