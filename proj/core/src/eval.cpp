#include "midsg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "midsg/errors.hpp"

namespace midsg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<fs::path> pngs_in(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::map<std::string, std::vector<Sample>> domain_folders(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("directory not found: " + root.string());
  std::map<std::string, std::vector<Sample>> out;
  auto flat = pngs_in(root);
  if (!flat.empty()) {
    for (auto& f : flat) out["all"].push_back({f, {0, "all"}});
    return out;
  }
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  int index = 0;
  for (const auto& d : dirs) {
    auto files = pngs_in(d);
    if (files.empty()) continue;
    const std::string name = d.filename().string();
    for (auto& f : files) out[name].push_back({f, {index, name}});
    ++index;
  }
  if (out.empty()) throw IoError("no PNG images under " + root.string());
  return out;
}

FeatureExtractor make_phi(int channels, int image_size, std::uint64_t seed) {
  NetworkConfig c;
  c.channels = channels;
  c.image_size = image_size;
  c.phi_seed = seed;
  return FeatureExtractor(c);
}

RealismReport realism_report(const std::vector<DomainCorpus>& corpora, const FeatureExtractor& phi,
                             const RealismOptions& options) {
  if (corpora.empty()) throw ValidationError("realism_report: no domains to compare");
  RealismReport report;
  for (const auto& corpus : corpora) {
    if (corpus.real.size() < 2 || corpus.synth.size() < 2)
      throw ValidationError("realism_report: domain '" + corpus.domain + "' needs at least 2 images per side");
    DomainFid row;
    row.domain = corpus.domain;
    row.n_real = static_cast<long>(corpus.real.size());
    row.n_synth = static_cast<long>(corpus.synth.size());
    const GaussianStats real = embed(phi, corpus.real);
    const auto feats = embed_features(phi, load_batch(corpus.synth).data);
    const int n = static_cast<int>(corpus.synth.size());
    const int d = static_cast<int>(feats.size()) / n;
    row.fid = fid(real, gaussian_stats(feats, n, d));

    Rng rng(derive_seed(options.seed, fnv1a(corpus.domain.data(), corpus.domain.size())));
    std::vector<double> resampled(feats.size());
    for (int b = 0; b < options.bootstrap; ++b) {
      for (int i = 0; i < n; ++i) {
        const int j = uniform_int(rng, 0, n - 1);
        std::copy_n(feats.begin() + static_cast<std::ptrdiff_t>(j) * d, d,
                    resampled.begin() + static_cast<std::ptrdiff_t>(i) * d);
      }
      row.bootstrap.push_back(fid(real, gaussian_stats(resampled, n, d)));
    }
    if (!row.bootstrap.empty() && options.bins > 0) {
      auto [mn, mx] = std::minmax_element(row.bootstrap.begin(), row.bootstrap.end());
      row.histogram.lo = *mn;
      row.histogram.hi = *mx > *mn ? *mx : *mn + 1e-12;
      row.histogram.counts.assign(static_cast<std::size_t>(options.bins), 0);
      const double width = (row.histogram.hi - row.histogram.lo) / options.bins;
      for (double v : row.bootstrap) {
        int bin = static_cast<int>((v - row.histogram.lo) / width);
        ++row.histogram.counts[static_cast<std::size_t>(std::clamp(bin, 0, options.bins - 1))];
      }
    }
    report.domains.push_back(std::move(row));
  }
  double sum = 0.0;
  for (const auto& r : report.domains) sum += r.fid;
  report.average = sum / static_cast<double>(report.domains.size());
  return report;
}

RealismReport realism_report(const fs::path& real_root, const fs::path& synth_root,
                             const FeatureExtractor& phi, const RealismOptions& options) {
  auto real = domain_folders(real_root);
  auto synth = domain_folders(synth_root);
  std::vector<DomainCorpus> corpora;
  if (real.size() == 1 && synth.size() == 1) {
    corpora.push_back({synth.begin()->first, real.begin()->second, synth.begin()->second});
  } else {
    for (auto& [name, samples] : real) {
      auto it = synth.find(name);
      if (it != synth.end()) corpora.push_back({name, samples, it->second});
    }
  }
  if (corpora.empty())
    throw ValidationError("no common domains between " + real_root.string() + " and " + synth_root.string());
  return realism_report(corpora, phi, options);
}

json RealismReport::to_json() const {
  json j{{"domains", json::array()}, {"average_fid", average},
         {"reference_average_fid", kPublishedGenerationFid[0]},
         {"note", "FID uses a fixed random feature extractor; values are not comparable to "
                  "Inception-based FID"}};
  for (const auto& r : domains)
    j["domains"].push_back({{"domain", r.domain},
                            {"fid", r.fid},
                            {"n_real", r.n_real},
                            {"n_synth", r.n_synth},
                            {"bootstrap_fid", r.bootstrap},
                            {"histogram", {{"lo", r.histogram.lo}, {"hi", r.histogram.hi}, {"counts", r.histogram.counts}}}});
  return j;
}

std::string RealismReport::to_markdown() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "| domain | real | synthetic | FID |\n|---|---|---|---|\n";
  for (const auto& r : domains) os << "| " << r.domain << " | " << r.n_real << " | " << r.n_synth << " | " << r.fid << " |\n";
  os << "| average | | | " << average << " |\n";
  os << "\nFID is computed on a fixed random feature extractor and is not comparable to Inception-based "
        "values (published full-scale average: 19.71).\n";
  return os.str();
}

std::string RealismReport::histogram_svg() const {
  const int panel_w = 260, panel_h = 180, pad = 30;
  const int width = pad + static_cast<int>(domains.size()) * (panel_w + pad);
  const int height = panel_h + 2 * pad + 20;
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < domains.size(); ++k) {
    const auto& r = domains[k];
    const double x0 = pad + static_cast<double>(k) * (panel_w + pad);
    const double y0 = pad;
    os << "<text x=\"" << x0 << "\" y=\"" << y0 - 8 << "\" font-size=\"12\" font-family=\"sans-serif\">"
       << r.domain << " (FID " << r.fid << ")</text>\n";
    os << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << panel_w << "\" height=\"" << panel_h
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    const auto& c = r.histogram.counts;
    if (c.empty()) continue;
    const int peak = std::max(1, *std::max_element(c.begin(), c.end()));
    const double bw = static_cast<double>(panel_w) / static_cast<double>(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double h = panel_h * static_cast<double>(c[i]) / peak;
      os << "<rect x=\"" << x0 + i * bw << "\" y=\"" << y0 + panel_h - h << "\" width=\"" << bw - 1
         << "\" height=\"" << h << "\" fill=\"#4a78b5\"/>\n";
    }
    os << "<text x=\"" << x0 << "\" y=\"" << y0 + panel_h + 14 << "\" font-size=\"10\" font-family=\"sans-serif\">"
       << r.histogram.lo << "</text>\n";
    os << "<text x=\"" << x0 + panel_w << "\" y=\"" << y0 + panel_h + 14
       << "\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\">" << r.histogram.hi << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_realism_report(const RealismReport& report, const fs::path& out) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
    if (!os) throw IoError("cannot write " + p.string());
  };
  fs::path stem = out;
  stem.replace_extension();
  write(out, report.to_json().dump(2) + "\n");
  write(fs::path(stem.string() + ".md"), report.to_markdown());
  write(fs::path(stem.string() + "_hist.svg"), report.histogram_svg());
}

}  // namespace midsg
