#include "midsg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "midsg/errors.hpp"
#include "midsg/rng.hpp"

namespace midsg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'M', 'I', 'D', 'S', 'G', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian");

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

void Archive::put(const std::string& name, ag::Shape shape, std::vector<double> values) {
  if (ag::numel(shape) != values.size())
    throw ValidationError("archive entry " + name + ": shape does not match value count");
  arrays[name] = ArrayEntry{std::move(shape), std::move(values)};
}

const ArrayEntry& Archive::get(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw ValidationError("archive has no array named " + name);
  return it->second;
}

void write_archive(const fs::path& path, const Archive& archive) {
  json header;
  header["version"] = kArchiveVersion;
  header["meta"] = archive.meta;
  header["arrays"] = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, entry] : archive.arrays) {
    header["arrays"].push_back({{"name", name}, {"shape", entry.shape}, {"offset", offset}});
    offset += entry.values.size();
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os.write(kMagic, sizeof kMagic);
    write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, entry] : archive.arrays)
      os.write(reinterpret_cast<const char*>(entry.values.data()),
               static_cast<std::streamsize>(entry.values.size() * sizeof(double)));
    os.flush();
    if (!os) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("failed writing " + path.string() + " (disk full?)");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Archive read_archive(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  is.read(magic, sizeof magic);
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw IoError(path.string() + " is not a checkpoint archive");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw IoError(path.string() + ": truncated header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error&) {
    throw IoError(path.string() + ": corrupt header");
  }
  if (header.value("version", -1) != kArchiveVersion)
    throw IoError(path.string() + ": unsupported archive version");

  Archive archive;
  archive.meta = header["meta"];
  for (const auto& a : header["arrays"]) {
    ArrayEntry entry;
    entry.shape = a["shape"].get<ag::Shape>();
    entry.values.resize(ag::numel(entry.shape));
    is.read(reinterpret_cast<char*>(entry.values.data()),
            static_cast<std::streamsize>(entry.values.size() * sizeof(double)));
    if (!is) throw IoError(path.string() + ": truncated payload");
    archive.arrays[a["name"].get<std::string>()] = std::move(entry);
  }
  return archive;
}

std::string file_hash(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  const std::string bytes = ss.str();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
  return buf;
}

void store_params(Archive& archive, const NamedParams& params) {
  for (const auto& [name, p] : params) {
    auto v = p.values();
    archive.put("param." + name, p.shape(), std::vector<double>(v.begin(), v.end()));
  }
}

void load_params(const Archive& archive, const NamedParams& params) {
  for (const auto& [name, p] : params) {
    const auto& entry = archive.get("param." + name);
    if (entry.shape != p.shape())
      throw ValidationError("checkpoint shape mismatch for " + name + ": " + ag::to_string(entry.shape) +
                            " vs " + ag::to_string(p.shape()));
    ag::Tensor handle = p;
    auto dst = handle.mutable_values();
    std::copy(entry.values.begin(), entry.values.end(), dst.begin());
  }
}

}  // namespace midsg
