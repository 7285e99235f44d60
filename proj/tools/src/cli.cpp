#include "midsg/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "midsg/config.hpp"
#include "midsg/errors.hpp"
#include "midsg/eval.hpp"
#include "midsg/generations.hpp"
#include "midsg/pad.hpp"
#include "midsg/toy_data.hpp"
#include "midsg/trainer.hpp"

namespace midsg {

namespace fs = std::filesystem;

namespace {

class UsageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// "--batch-size 16" / "--batch-size=16" -> {"batch_size": "16"}.
std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& extras) {
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2), value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw UsageError("flag '" + arg + "' needs a value");
      value = extras[++i];
    }
    for (char& c : key)
      if (c == '-') c = '_';
    bool known = false;
    for (const auto& k : config_keys()) known = known || k.name == key;
    if (!known) throw UsageError("unknown flag '" + arg + "'");
    out[key] = value;
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  os << text;
  if (!os) throw IoError("cannot write " + path.string());
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path stem = path;
  stem.replace_extension();
  return fs::path(stem.string() + suffix);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"midsg: multi-domain diffusion-augmented style GAN for toy ocular PAD data", "midsg"};
  app.require_subcommand(1);
  const std::string footer = "\n" + config_help();
  std::function<void()> action;

  // datagen
  std::string dg_out;
  int dg_per_domain = 0, dg_size = 32, dg_channels = 1;
  std::uint64_t dg_seed = 0;
  auto* datagen = app.add_subcommand("datagen", "Render a procedural three-domain toy dataset");
  datagen->add_option("--out", dg_out, "output dataset root")->required();
  datagen->add_option("--per-domain", dg_per_domain, "images per domain")->required()->check(CLI::PositiveNumber);
  datagen->add_option("--size", dg_size, "image side in pixels")->capture_default_str();
  datagen->add_option("--channels", dg_channels, "1 (gray) or 3 (RGB)")->capture_default_str();
  datagen->add_option("--seed", dg_seed, "rendering seed")->capture_default_str();
  datagen->footer(footer);
  datagen->callback([&] {
    action = [&] {
      ToyDomainSpec spec;
      spec.image_size = dg_size;
      spec.channels = dg_channels;
      spec.seed = dg_seed;
      generate_toy_dataset(spec, dg_per_domain, default_toy_domains(), dg_out);
      out << "wrote " << dg_per_domain * 3 << " images to " << dg_out << "\n";
    };
  });

  // train
  std::string tr_config, tr_resume;
  auto* train = app.add_subcommand("train", "Train a model; extra --key-name VALUE flags override config keys");
  train->add_option("--config", tr_config, "config file (JSON)")->required();
  train->add_option("--resume", tr_resume, "checkpoint to resume from");
  train->allow_extras();
  train->footer(footer);
  train->callback([&] {
    action = [&] {
      TrainConfig config = resolve_config(tr_config, parse_overrides(train->remaining()));
      DatasetSplit split = split_dataset(config.data_dir, config.split_fraction, config.split_seed);
      FitOptions options;
      options.progress = true;
      if (!tr_resume.empty()) options.resume = fs::path(tr_resume);
      fs::path ckpt = fit(config, split, options);
      out << ckpt.string() << "\n";
    };
  });

  // generate
  std::string ge_ckpt, ge_source_dir, ge_source, ge_target, ge_out;
  int ge_count = 100;
  std::uint64_t ge_seed = 0;
  auto* generate = app.add_subcommand("generate", "Translate source images into a target domain");
  generate->add_option("--ckpt", ge_ckpt, "checkpoint file")->required();
  generate->add_option("--source-dir", ge_source_dir, "dataset root or image folder")->required();
  generate->add_option("--source-domain", ge_source, "source domain (name or index)")->required();
  generate->add_option("--target-domain", ge_target, "target domain (name or index)")->required();
  generate->add_option("--out", ge_out, "output folder")->required();
  generate->add_option("--count", ge_count, "number of images")->capture_default_str()->check(CLI::PositiveNumber);
  generate->add_option("--seed", ge_seed, "source ordering seed")->capture_default_str();
  generate->footer(footer);
  generate->callback([&] {
    action = [&] {
      if (!fs::exists(ge_ckpt)) throw IoError("checkpoint not found: " + ge_ckpt);
      TrainedModel model = load_model(ge_ckpt);
      const int s = resolve_domain(ge_source, model.domains);
      const int c = resolve_domain(ge_target, model.domains);
      translate_corpus(ge_ckpt, ge_source_dir, s, c, ge_count, ge_out, ge_seed);
      out << "wrote " << ge_count << " images to " << ge_out << "\n";
    };
  });

  // evaluate
  std::string ev_real, ev_synth, ev_out;
  RealismOptions ev_options;
  std::uint64_t ev_phi_seed = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Per-domain FID of a synthetic corpus against real images");
  evaluate->add_option("--real", ev_real, "real corpus root")->required();
  evaluate->add_option("--synth", ev_synth, "synthetic corpus root")->required();
  evaluate->add_option("--out", ev_out, "report path (JSON; .md and _hist.svg written beside it)")->required();
  evaluate->add_option("--bootstrap", ev_options.bootstrap, "bootstrap resamples for the histogram")->capture_default_str();
  evaluate->add_option("--bins", ev_options.bins, "histogram bins")->capture_default_str();
  evaluate->add_option("--seed", ev_options.seed, "bootstrap seed")->capture_default_str();
  evaluate->add_option("--phi-seed", ev_phi_seed, "feature extractor seed")->capture_default_str();
  evaluate->footer(footer);
  evaluate->callback([&] {
    action = [&] {
      auto real = domain_folders(ev_real);
      ImageBatch probe = load_batch(std::span<const Sample>(real.begin()->second.data(), 1));
      FeatureExtractor phi = make_phi(probe.data.dim(1), probe.data.dim(2), ev_phi_seed);
      RealismReport report = realism_report(ev_real, ev_synth, phi, ev_options);
      write_realism_report(report, ev_out);
      out << report.to_markdown();
    };
  });

  // pad-bench
  std::string pb_config;
  auto* pad = app.add_subcommand("pad-bench", "Train and score the PAD detector with and without synthetic data");
  pad->add_option("--config", pb_config, "pad-bench config file (JSON)")->required();
  pad->footer("\n" + PadBenchConfig::help() + footer);
  pad->callback([&] {
    action = [&] {
      PadBenchConfig cfg = load_pad_bench_config(pb_config);
      DatasetSplit split = split_dataset(cfg.data_dir, cfg.split_fraction, cfg.split_seed);
      std::optional<fs::path> synth;
      if (!cfg.synth_dir.empty()) synth = fs::path(cfg.synth_dir);
      PadReport report = pad_experiment(split, synth, default_pad_test_sets(split), cfg.detector);
      write_text(cfg.out, report.to_json().dump(2) + "\n");
      write_text(sibling(cfg.out, ".md"), report.to_markdown());
      out << report.to_markdown();
    };
  });

  // generations
  std::string gn_config;
  int gn_k = 3;
  auto* gens = app.add_subcommand("generations", "Retrain successive generations on synthetic data only");
  gens->add_option("--config", gn_config, "training config file (JSON)")->required();
  gens->add_option("--k", gn_k, "number of generations")->capture_default_str()->check(CLI::PositiveNumber);
  gens->allow_extras();
  gens->footer(footer);
  gens->callback([&] {
    action = [&] {
      TrainConfig config = resolve_config(gn_config, parse_overrides(gens->remaining()));
      GenerationsOptions options;
      options.progress = true;
      GenerationsReport report = generations_harness(config, gn_k, options);
      const fs::path path = fs::path(config.out_dir) / "generations_report.json";
      write_text(path, report.to_json().dump(2) + "\n");
      write_text(sibling(path, ".md"), report.to_markdown());
      out << report.to_markdown();
    };
  });

  if (!args.empty() && args.front().rfind("-", 0) != 0) {
    bool known = false;
    for (const auto* sub : app.get_subcommands([](CLI::App*) { return true; }))
      known = known || sub->get_name() == args.front();
    if (!known) {
      err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
      return 1;
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace midsg
