#include "midsg/generations.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "midsg/errors.hpp"
#include "midsg/image_io.hpp"
#include "midsg/trainer.hpp"

namespace midsg {

namespace fs = std::filesystem;
using nlohmann::json;

void write_synthetic_corpus(const ModelBundle& bundle, const std::vector<Sample>& sources,
                            const std::vector<DomainLabel>& domains,
                            const std::vector<int>& per_domain_count, const fs::path& out_root) {
  if (sources.empty()) throw ValidationError("synthetic corpus: no source images");
  if (per_domain_count.size() != domains.size())
    throw ValidationError("synthetic corpus: one count per domain required");
  fs::create_directories(out_root);
  json manifest{{"format", "midsg-synthetic-corpus"}, {"version", 1}, {"domains", json::array()}};
  constexpr int kChunk = 64;
  for (std::size_t k = 0; k < domains.size(); ++k) {
    const auto& d = domains[k];
    const int count = per_domain_count[k];
    const fs::path dir = out_root / d.name;
    fs::create_directories(dir);
    for (int begin = 0; begin < count; begin += kChunk) {
      const int m = std::min(kChunk, count - begin);
      std::vector<Sample> chunk;
      for (int i = begin; i < begin + m; ++i) chunk.push_back(sources[static_cast<std::size_t>(i) % sources.size()]);
      ImageBatch batch = load_batch(chunk);
      std::vector<int> target(static_cast<std::size_t>(m), d.index);
      ag::Tensor y = translate(bundle, batch.data, batch.labels, target);
      const int C = y.dim(1), H = y.dim(2), W = y.dim(3);
      const std::size_t per = static_cast<std::size_t>(C) * H * W;
      for (int i = 0; i < m; ++i)
        write_png(dir / image_filename(begin + i), from_planar_unit(y.values().data() + i * per, C, H, W));
    }
    manifest["domains"].push_back({{"index", d.index}, {"name", d.name}, {"count", count}});
  }
  std::ofstream os(out_root / "manifest.json");
  os << manifest.dump(2) << "\n";
  if (!os) throw IoError("cannot write corpus manifest under " + out_root.string());
}

GenerationsReport generations_harness(const TrainConfig& base, int k, const GenerationsOptions& options) {
  if (k < 1) throw ValidationError("generations: K must be at least 1");
  base.validate();
  const DatasetSplit real = split_dataset(base.data_dir, base.split_fraction, base.split_seed);
  const auto test_sets = default_pad_test_sets(real);
  const int bona = bonafide_index(real.domains);

  std::vector<int> counts(real.domains.size(), 0);
  for (const auto& s : real.train) ++counts[static_cast<std::size_t>(s.label.index)];
  if (options.corpus_per_domain > 0) std::fill(counts.begin(), counts.end(), options.corpus_per_domain);

  GenerationsReport report;
  report.fdr_targets.assign(kDefaultFdrTargets.begin(), kDefaultFdrTargets.end());
  report.baseline = run_pad_arm("Experiment-0", real.train, test_sets, options.detector, bona);

  const fs::path root = base.out_dir;
  std::string data_dir = base.data_dir;
  for (int g = 1; g <= k; ++g) {
    const fs::path gen_dir = root / ("gen_" + std::to_string(g));
    TrainConfig cfg = base;
    cfg.data_dir = data_dir;
    cfg.out_dir = (gen_dir / "run").string();
    const DatasetSplit split = g == 1 ? real : split_dataset(data_dir, cfg.split_fraction, cfg.split_seed);
    if (options.progress) std::cerr << "generation " << g << ": training on " << data_dir << "\n";
    const fs::path ckpt = fit(cfg, split);

    TrainedModel model = load_model(ckpt);
    const fs::path corpus = gen_dir / "corpus";
    fs::remove_all(corpus);
    write_synthetic_corpus(model.bundle, split.train, real.domains, counts, corpus);

    std::vector<DomainCorpus> corpora;
    auto synth = synthetic_samples(corpus, real.domains);
    for (const auto& d : real.domains) {
      DomainCorpus dc{d.name, {}, {}};
      for (const auto& s : real.test)
        if (s.label.index == d.index) dc.real.push_back(s);
      for (const auto& s : synth)
        if (s.label.index == d.index) dc.synth.push_back(s);
      corpora.push_back(std::move(dc));
    }
    GenerationRow row;
    row.generation = g;
    row.train_data = data_dir;
    row.checkpoint = ckpt.string();
    row.corpus = corpus.string();
    row.realism = realism_report(corpora, model.bundle.phi, options.realism);

    auto mixed = real.train;
    mixed.insert(mixed.end(), synth.begin(), synth.end());
    row.augmented = run_pad_arm("Experiment-1", mixed, test_sets, options.detector, bona);
    report.rows.push_back(std::move(row));
    data_dir = corpus.string();
  }
  return report;
}

json GenerationsReport::to_json() const {
  json j{{"fdr_targets", fdr_targets}, {"baseline", json::object()}, {"generations", json::array()}};
  for (const auto& [set, v] : baseline.tdr) j["baseline"][set] = v;
  for (const auto& r : rows) {
    json tdr = json::object();
    for (const auto& [set, v] : r.augmented.tdr) tdr[set] = v;
    json fids = json::object();
    for (const auto& d : r.realism.domains) fids[d.domain] = d.fid;
    j["generations"].push_back({{"generation", r.generation},
                                {"train_data", r.train_data},
                                {"checkpoint", r.checkpoint},
                                {"corpus", r.corpus},
                                {"fid", r.realism.average},
                                {"fid_per_domain", fids},
                                {"tdr", tdr}});
  }
  j["reference_fid"] = kPublishedGenerationFid;
  j["reference_note"] = "published full-scale average FID of generations 1-5, not reproduced here";
  return j;
}

std::string GenerationsReport::to_markdown() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "| generation | FID |";
  for (double f : fdr_targets) os << " TDR @ " << std::setprecision(0) << f * 100 << "% FDR (all) |" << std::setprecision(4);
  os << "\n|---|---|";
  for (std::size_t i = 0; i < fdr_targets.size(); ++i) os << "---|";
  os << "\n| real only | |";
  if (!baseline.tdr.empty())
    for (double v : baseline.tdr.front().second) os << " " << v << " |";
  os << "\n";
  for (const auto& r : rows) {
    os << "| " << r.generation << " | " << r.realism.average << " |";
    if (!r.augmented.tdr.empty())
      for (double v : r.augmented.tdr.front().second) os << " " << v << " |";
    os << "\n";
  }
  os << "\nReference (published, full scale): Synthetic-1..5 average FID";
  for (double f : kPublishedGenerationFid) os << " " << std::setprecision(2) << f;
  os << ".\n";
  return os.str();
}

}  // namespace midsg
