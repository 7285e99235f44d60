#include "midsg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "midsg/errors.hpp"
#include "midsg/image_io.hpp"
#include "midsg/ops.hpp"

#ifndef MIDSG_VERSION
#define MIDSG_VERSION "0.0.0"
#endif

namespace midsg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainStream = 0x7a11;
constexpr std::uint64_t kDataStream = 0xda7a;

AdamConfig adam_config(const TrainConfig& c, double lr) { return {lr, c.beta1, c.beta2, 1e-8}; }

std::vector<int> rolled(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = (i + 1) % n;
  return idx;
}

ag::Tensor first_rows(const ag::Tensor& x, int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return ag::gather_rows(x, idx);
}

}  // namespace

json StepOutcome::to_json() const {
  json j = json::object();
  j["step"] = step;
  for (const auto& [name, value] : d_report.terms) j[name] = value;
  for (const auto& [name, value] : g_report.terms) j[name] = value;
  j["d_total"] = d_report.total;
  j["g_total"] = g_report.total;
  j["r_d"] = r_d;
  j["t_current"] = t_current;
  return j;
}

TrainState::TrainState(const TrainConfig& cfg)
    : config(cfg),
      bundle(init_bundle(cfg.network, cfg.seed)),
      opt_d(bundle.discriminator.parameters(), adam_config(cfg, cfg.lr_d)),
      opt_g(bundle.generator_side(), adam_config(cfg, cfg.lr_g)),
      diffusion(cfg.diffusion.initial_state()),
      schedule(cfg.diffusion.schedule()),
      rng(derive_seed(cfg.seed, kTrainStream)) {
  config.validate();
}

StepOutcome train_step(TrainState& state, const ImageBatch& real) {
  const TrainConfig& cfg = state.config;
  const ModelBundle& net = state.bundle;
  const int K = cfg.network.num_domains;
  real.validate(K);
  const int B = real.size();
  const long step_index = state.step + 1;
  const ag::Tensor& x = real.data;
  const std::vector<int>& s = real.labels;
  const int L = net.generator.num_layers();

  std::vector<int> c(static_cast<std::size_t>(B));
  for (int& v : c) v = uniform_int(state.rng, 0, K - 1);

  auto draw_mix = [&](const ag::Tensor& z) -> std::optional<StyleMix> {
    if (L < 2 || B < 2 || cfg.mixing_prob <= 0.0) return std::nullopt;
    if (uniform01(state.rng) >= cfg.mixing_prob) return std::nullopt;
    const int crossover = uniform_int(state.rng, 1, L - 1);
    const auto roll = rolled(B);
    return StyleMix{ag::gather_rows(z, roll), crossover};
  };

  // Discriminator step.
  TotalLosses d_side;
  {
    std::vector<int> t = sample_timesteps(state.diffusion.distribution(), B, state.rng);
    ag::Tensor fake;
    {
      ag::NoGradGuard guard;
      ag::Tensor z = encode(net, x, s);
      fake = generate(net, z, c, draw_mix(z));
    }
    ag::Tensor y_real = diffuse(x, t, state.schedule, state.rng);
    ag::Tensor y_fake = diffuse(fake, t, state.schedule, state.rng);
    DiscriminatorOutput d_real = discriminate(net, y_real, t);
    DiscriminatorOutput d_fake = discriminate(net, y_fake, t);

    LossTerms terms;
    terms.adv_d = adv_loss_d(d_real, d_fake);
    if (cfg.multi_domain_d) terms.domain_real = domain_loss_real(d_real.domain_logits, s);
    d_side = total_losses(terms, cfg.weights, step_index);

    auto realness = d_real.realness();
    state.rd_realness.insert(state.rd_realness.end(), realness.begin(), realness.end());

    state.opt_d.zero_grad();
    if (d_side.d_total.defined() && d_side.d_total.requires_grad()) {
      ag::backward(d_side.d_total);
      state.opt_d.step();
    }
  }

  // Encoder / generator step.
  TotalLosses g_side;
  net.set_discriminator_trainable(false);
  try {
    std::vector<int> t = sample_timesteps(state.diffusion.distribution(), B, state.rng);
    const LossWeights& w = cfg.weights;
    ag::Tensor z = encode(net, x, s);
    ag::Tensor fake = generate(net, z, c, draw_mix(z));
    ag::Tensor y_fake = diffuse(fake, t, state.schedule, state.rng);
    DiscriminatorOutput d_fake = discriminate(net, y_fake, t);

    LossTerms terms;
    terms.adv_g = adv_loss_g(d_fake, cfg.saturating_adv);
    if (cfg.multi_domain_d) terms.domain_synth = domain_loss_synth(d_fake.domain_logits, c);
    if (w.recon > 0.0) terms.recon = recon_loss(x, fake);
    if (w.lpips > 0.0) terms.lpips = lpips_loss(x, fake, net.phi);
    if (w.inr > 0.0) terms.identity = identity_loss(x, generate(net, z, s));
    if (cfg.literal_eq10 && w.mix > 0.0 && B >= 2) {
      const auto roll = rolled(B);
      ag::Tensor other = generate(net, ag::gather_rows(z, roll), c);
      terms.mix = style_mix_loss(fake, other, L);
    }
    if (cfg.path_reg && w.path > 0.0) {
      const int n = std::min(cfg.path_batch, B);
      std::vector<int> sub_c(c.begin(), c.begin() + n);
      ag::Tensor w_vec = net.generator.map(first_rows(z, n), sub_c);
      std::vector<double> dirs(w_vec.numel());
      for (int b = 0; b < n; ++b) {
        const std::size_t width = static_cast<std::size_t>(w_vec.dim(1));
        double norm = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
          double v = standard_normal(state.rng);
          dirs[b * width + k] = v;
          norm += v * v;
        }
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < width; ++k) dirs[b * width + k] /= norm;
      }
      PathLength pl = path_length_penalty(net.generator, w_vec, dirs, state.path_mean);
      if (state.path_mean_ready) {
        terms.path = pl.penalty;
        state.path_mean += cfg.path_decay * (pl.mean_length - state.path_mean);
      } else {
        state.path_mean = pl.mean_length;
        state.path_mean_ready = true;
      }
    }
    g_side = total_losses(terms, cfg.weights, step_index);

    state.opt_g.zero_grad();
    if (g_side.g_total.defined() && g_side.g_total.requires_grad()) {
      ag::backward(g_side.g_total);
      state.opt_g.step();
    }
  } catch (...) {
    net.set_discriminator_trainable(true);
    throw;
  }
  net.set_discriminator_trainable(true);

  StepOutcome out;
  out.step = step_index;
  out.d_report = d_side.d_report;
  out.g_report = g_side.g_report;

  if (++state.rd_batches >= state.diffusion.update_interval) {
    const double r_d = overfit_metric(state.rd_realness);
    update_diffusion_length(state.diffusion, r_d);
    state.rd_realness.clear();
    state.rd_batches = 0;
    ++state.schedule_updates;
    out.schedule_updated = true;
  }
  out.r_d = state.diffusion.r_d_last;
  out.t_current = state.diffusion.t_current;

  state.step = step_index;
  state.history.push_back(out);
  return out;
}

void save_checkpoint(const TrainState& state, const fs::path& path, const json& extra) {
  Archive archive;
  store_params(archive, state.bundle.all_parameters());
  for (auto& [name, values] : state.opt_d.export_moments("adam_d."))
    archive.put(name, {static_cast<int>(values.size())}, values);
  for (auto& [name, values] : state.opt_g.export_moments("adam_g."))
    archive.put(name, {static_cast<int>(values.size())}, values);
  json& m = archive.meta;
  m["kind"] = "midsg-train-state";
  m["code_version"] = code_version();
  m["config"] = to_json(state.config);
  m["step"] = state.step;
  m["diffusion"] = state.diffusion.to_json();
  m["rng"] = save_rng(state.rng);
  m["path_mean"] = state.path_mean;
  m["path_mean_ready"] = state.path_mean_ready;
  m["rd_realness"] = state.rd_realness;
  m["rd_batches"] = state.rd_batches;
  m["schedule_updates"] = state.schedule_updates;
  m["adam_d_t"] = state.opt_d.steps();
  m["adam_g_t"] = state.opt_g.steps();
  m["extra"] = extra;
  write_archive(path, archive);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  Archive archive = read_archive(path);
  const json& m = archive.meta;
  if (m.value("kind", "") != "midsg-train-state")
    throw ValidationError(path.string() + " is not a training checkpoint");
  TrainConfig config = config_from_json(m.at("config"));
  auto state = std::make_unique<TrainState>(config);
  load_params(archive, state->bundle.all_parameters());
  std::map<std::string, std::vector<double>> moments;
  for (const auto& [name, entry] : archive.arrays)
    if (name.rfind("adam_", 0) == 0) moments[name] = entry.values;
  state->opt_d.import_moments(moments, "adam_d.", m.at("adam_d_t").get<long>());
  state->opt_g.import_moments(moments, "adam_g.", m.at("adam_g_t").get<long>());
  state->step = m.at("step").get<long>();
  state->diffusion = AdaptiveDiffusionState::from_json(m.at("diffusion"));
  state->rng = restore_rng(m.at("rng").get<std::string>());
  state->path_mean = m.at("path_mean").get<double>();
  state->path_mean_ready = m.at("path_mean_ready").get<bool>();
  state->rd_realness = m.at("rd_realness").get<std::vector<double>>();
  state->rd_batches = m.at("rd_batches").get<int>();
  state->schedule_updates = m.at("schedule_updates").get<long>();
  return {std::move(state), m.value("extra", json::object())};
}

TrainedModel load_model(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path.string());
  Archive archive = read_archive(path);
  TrainConfig config = config_from_json(archive.meta.at("config"));
  TrainedModel model{config, init_bundle(config.network, config.seed), {}, file_hash(path)};
  load_params(archive, model.bundle.all_parameters());
  const json extra = archive.meta.value("extra", json::object());
  if (extra.contains("domains"))
    for (const auto& d : extra["domains"])
      model.domains.push_back({d.at("index").get<int>(), d.at("name").get<std::string>()});
  if (model.domains.empty())
    for (int k = 0; k < config.network.num_domains; ++k)
      model.domains.push_back({k, "domain" + std::to_string(k)});
  return model;
}

std::string code_version() { return MIDSG_VERSION; }

json RunDirectory::run_record(const TrainConfig& config) {
  return {{"config", to_json(config)}, {"code_version", code_version()}, {"seed", config.seed}};
}

fs::path RunDirectory::checkpoint_path(long step) const {
  char name[32];
  std::snprintf(name, sizeof name, "ckpt_%06ld.ckpt", step);
  return checkpoints() / name;
}

RunDirectory RunDirectory::create(const fs::path& root, const TrainConfig& config) {
  auto populate = [&](const fs::path& dir) {
    for (const char* sub : {"checkpoints", "samples", "metrics", "reports"})
      fs::create_directories(dir / sub);
    const fs::path tmp = dir / "run.json.tmp";
    {
      std::ofstream os(tmp);
      os << run_record(config).dump(2) << "\n";
      if (!os) throw IoError("cannot write " + (dir / "run.json").string());
    }
    fs::rename(tmp, dir / "run.json");
  };
  try {
    if (fs::exists(root)) {
      populate(root);
    } else {
      fs::path staging = root;
      staging += ".staging";
      fs::remove_all(staging);
      if (root.has_parent_path()) fs::create_directories(root.parent_path());
      populate(staging);
      fs::rename(staging, root);
    }
  } catch (const fs::filesystem_error& err) {
    throw IoError("cannot create run directory " + root.string() + ": " + err.what());
  }
  return RunDirectory(root);
}

namespace {

// Keeps metrics records with step <= last_step.
void truncate_metrics(const fs::path& path, long last_step) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      if (json::parse(line).at("step").get<long>() <= last_step) keep.push_back(line);
    } catch (const json::exception&) {
      // Partial trailing record from an interrupted run.
    }
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

void write_sample_grid(const ModelBundle& net, const DatasetSplit& data, const fs::path& path) {
  const auto& pool = data.test.empty() ? data.train : data.test;
  const int K = net.config.num_domains;
  std::vector<Sample> rows;
  for (int k = 0; k < K; ++k) {
    auto it = std::find_if(pool.begin(), pool.end(), [k](const Sample& s) { return s.label.index == k; });
    if (it != pool.end()) rows.push_back(*it);
  }
  if (rows.empty()) return;
  ImageBatch batch = load_batch(rows);
  const int n = batch.size(), C = batch.data.dim(1), H = batch.data.dim(2), W = batch.data.dim(3);
  Image8 grid{W * (K + 1), H * n, C, {}};
  grid.pixels.assign(static_cast<std::size_t>(grid.width) * grid.height * C, 0);
  auto blit = [&](const double* planar, int row, int col) {
    Image8 tile = from_planar_unit(planar, C, H, W);
    for (int i = 0; i < H; ++i)
      std::copy_n(tile.pixels.begin() + static_cast<std::ptrdiff_t>(i) * W * C, W * C,
                  grid.pixels.begin() + ((static_cast<std::ptrdiff_t>(row) * H + i) * grid.width +
                                         static_cast<std::ptrdiff_t>(col) * W) * C);
  };
  const std::size_t per = static_cast<std::size_t>(C) * H * W;
  for (int r = 0; r < n; ++r) blit(batch.data.values().data() + r * per, r, 0);
  for (int k = 0; k < K; ++k) {
    std::vector<int> target(static_cast<std::size_t>(n), k);
    ag::Tensor out = translate(net, batch.data, batch.labels, target);
    for (int r = 0; r < n; ++r) blit(out.values().data() + r * per, r, k + 1);
  }
  write_png(path, grid);
}

json domains_json(std::span<const DomainLabel> domains) {
  json arr = json::array();
  for (const auto& d : domains) arr.push_back({{"index", d.index}, {"name", d.name}});
  return arr;
}

}  // namespace

fs::path fit(const TrainConfig& config, const DatasetSplit& dataset, const FitOptions& options) {
  config.validate();
  if (dataset.train.empty()) throw ValidationError("fit: training split is empty");
  if (static_cast<int>(dataset.domains.size()) != config.network.num_domains)
    throw ValidationError("fit: dataset has " + std::to_string(dataset.domains.size()) +
                          " domains but num_domains is " +
                          std::to_string(config.network.num_domains));

  RunDirectory run = RunDirectory::create(config.out_dir, config);
  BatchIterator batches(dataset.train, derive_seed(config.seed, kDataStream));
  std::unique_ptr<TrainState> state;
  if (options.resume) {
    LoadedCheckpoint loaded = load_checkpoint(*options.resume);
    TrainConfig saved = loaded.state->config;
    saved.total_steps = config.total_steps;
    saved.checkpoint_interval = config.checkpoint_interval;
    saved.eval_interval = config.eval_interval;
    saved.out_dir = config.out_dir;
    if (!(saved == config))
      throw ValidationError("resume: config differs from the checkpoint beyond total_steps, "
                            "checkpoint_interval, eval_interval and out_dir");
    state = std::move(loaded.state);
    state->config = config;
    if (loaded.extra.contains("iterator")) batches.restore_state(loaded.extra["iterator"]);
  } else {
    state = std::make_unique<TrainState>(config);
  }

  const fs::path metrics_path = run.metrics() / "metrics.jsonl";
  const fs::path timing_path = run.metrics() / "timing.jsonl";
  if (options.resume) {
    truncate_metrics(metrics_path, state->step);
    truncate_metrics(timing_path, state->step);
  } else {
    std::ofstream(metrics_path, std::ios::trunc);
    std::ofstream(timing_path, std::ios::trunc);
  }
  std::ofstream metrics(metrics_path, std::ios::app);
  std::ofstream timing(timing_path, std::ios::app);
  if (!metrics || !timing) throw IoError("cannot open metrics stream in " + run.metrics().string());

  auto extra = [&] {
    return json{{"iterator", batches.save_state()}, {"domains", domains_json(dataset.domains)}};
  };
  auto checkpoint = [&](long step) {
    const fs::path path = run.checkpoint_path(step);
    metrics.flush();
    timing.flush();
    save_checkpoint(*state, path, extra());
    return path;
  };

  const auto start = std::chrono::steady_clock::now();
  fs::path last_ckpt;
  long last_ckpt_step = -1;
  while (state->step < config.total_steps) {
    const auto t0 = std::chrono::steady_clock::now();
    ImageBatch batch = batches.next(config.batch_size);
    StepOutcome out;
    try {
      out = train_step(*state, batch);
    } catch (const TrainingAborted& err) {
      metrics.flush();
      json dump{{"error", err.what()}, {"term", err.term()}, {"step", err.step()},
                {"t_current", state->diffusion.t_current}};
      if (!state->history.empty()) dump["last_record"] = state->history.back().to_json();
      std::ofstream(run.reports() / "abort.json") << dump.dump(2) << "\n";
      throw;
    }
    const auto t1 = std::chrono::steady_clock::now();
    metrics << out.to_json().dump() << "\n";
    metrics.flush();
    timing << json{{"step", out.step},
                   {"step_seconds", std::chrono::duration<double>(t1 - t0).count()},
                   {"wall_seconds", std::chrono::duration<double>(t1 - start).count()}}
                  .dump()
           << "\n";
    timing.flush();
    if (!metrics || !timing) throw IoError("failed writing metrics (disk full?)");
    if (options.on_step) options.on_step(out);
    if (options.progress && (out.step % 50 == 0 || out.step == config.total_steps))
      std::cerr << "step " << out.step << "/" << config.total_steps
                << " d=" << out.d_report.total << " g=" << out.g_report.total
                << " T=" << out.t_current << "\n";

    if (config.checkpoint_interval > 0 && out.step % config.checkpoint_interval == 0) {
      last_ckpt = checkpoint(out.step);
      last_ckpt_step = out.step;
    }
    if (config.eval_interval > 0 && out.step % config.eval_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06ld.png", out.step);
      write_sample_grid(state->bundle, dataset, run.samples() / name);
    }
  }
  if (last_ckpt_step != state->step) last_ckpt = checkpoint(state->step);
  return last_ckpt;
}

ag::Tensor translate(const ModelBundle& bundle, const ag::Tensor& x, std::span<const int> source,
                     std::span<const int> target, int chunk) {
  ag::NoGradGuard guard;
  const int n = x.dim(0);
  if (static_cast<int>(source.size()) != n || static_cast<int>(target.size()) != n)
    throw ValidationError("translate: label count does not match the batch");
  const std::size_t per = x.numel() / static_cast<std::size_t>(n);
  std::vector<double> out;
  out.reserve(x.numel());
  for (int begin = 0; begin < n; begin += chunk) {
    const int m = std::min(chunk, n - begin);
    ag::Shape shape = x.shape();
    shape[0] = m;
    auto src = x.values().subspan(begin * per, m * per);
    ag::Tensor part = ag::Tensor::from(shape, std::vector<double>(src.begin(), src.end()));
    ag::Tensor z = encode(bundle, part, source.subspan(begin, m));
    ag::Tensor y = generate(bundle, z, target.subspan(begin, m));
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  return ag::Tensor::from(x.shape(), std::move(out));
}

int resolve_domain(const std::string& text, std::span<const DomainLabel> domains) {
  for (const auto& d : domains)
    if (d.name == text) return d.index;
  try {
    std::size_t used = 0;
    int v = std::stoi(text, &used);
    if (used == text.size() && v >= 0 && v < static_cast<int>(domains.size())) return v;
  } catch (const std::logic_error&) {
  }
  std::string names;
  for (const auto& d : domains) names += (names.empty() ? "" : ", ") + d.name;
  throw ValidationError("unknown domain '" + text + "' (known: " + names + ")");
}

fs::path translate_corpus(const fs::path& ckpt, const fs::path& source_dir, int source, int target,
                          int count, const fs::path& out_dir, std::uint64_t seed) {
  if (count <= 0) throw ValidationError("translate_corpus: count must be positive");
  TrainedModel model = load_model(ckpt);
  const int K = model.config.network.num_domains;
  if (source < 0 || source >= K || target < 0 || target >= K)
    throw ValidationError("translate_corpus: domain index out of range");
  const DomainLabel& src_label = model.domains.at(static_cast<std::size_t>(source));

  fs::path dir = source_dir;
  if (fs::is_directory(source_dir / src_label.name)) dir = source_dir / src_label.name;
  if (!fs::is_directory(dir)) throw IoError("source directory not found: " + source_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PNG images in " + dir.string());

  Rng rng(derive_seed(seed, 0x7a45));
  for (int i = static_cast<int>(files.size()) - 1; i > 0; --i)
    std::swap(files[static_cast<std::size_t>(i)], files[static_cast<std::size_t>(uniform_int(rng, 0, i))]);

  fs::create_directories(out_dir);
  json manifest{{"format", "midsg-translations"},
                {"version", 1},
                {"checkpoint", ckpt.string()},
                {"checkpoint_hash", model.hash},
                {"source_domain", {{"index", source}, {"name", src_label.name}}},
                {"target_domain",
                 {{"index", target}, {"name", model.domains.at(static_cast<std::size_t>(target)).name}}},
                {"count", count},
                {"seed", seed},
                {"sources", json::array()}};
  constexpr int kChunk = 64;
  for (int begin = 0; begin < count; begin += kChunk) {
    const int m = std::min(kChunk, count - begin);
    std::vector<Sample> chunk;
    for (int i = begin; i < begin + m; ++i) {
      const fs::path& f = files[static_cast<std::size_t>(i) % files.size()];
      chunk.push_back({f, src_label});
      manifest["sources"].push_back(f.filename().string());
    }
    ImageBatch batch = load_batch(chunk);
    std::vector<int> tgt(static_cast<std::size_t>(m), target);
    ag::Tensor y = translate(model.bundle, batch.data, batch.labels, tgt);
    const int C = y.dim(1), H = y.dim(2), W = y.dim(3);
    const std::size_t per = static_cast<std::size_t>(C) * H * W;
    for (int i = 0; i < m; ++i)
      write_png(out_dir / image_filename(begin + i), from_planar_unit(y.values().data() + i * per, C, H, W));
  }
  std::ofstream os(out_dir / "manifest.json");
  os << manifest.dump(2) << "\n";
  if (!os) throw IoError("cannot write manifest in " + out_dir.string());
  return out_dir;
}

}  // namespace midsg
