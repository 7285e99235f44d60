#pragma once

// Versioned key -> array container:
//   8 bytes  magic "MIDSGCK1"
//   u64 LE   header length
//   header   UTF-8 JSON {"version", "meta", "arrays": [{"name", "shape", "offset"}]}
//   payload  float64 little-endian values, arrays concatenated in header order

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/autograd.hpp"
#include "midsg/networks.hpp"

namespace midsg {

inline constexpr int kArchiveVersion = 1;

struct ArrayEntry {
  ag::Shape shape;
  std::vector<double> values;
};

struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, ArrayEntry> arrays;

  void put(const std::string& name, ag::Shape shape, std::vector<double> values);
  const ArrayEntry& get(const std::string& name) const;
};

// Written to a temporary sibling and renamed into place.
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

// FNV-1a over the file bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

void store_params(Archive& archive, const NamedParams& params);
// Every parameter must be present with a matching shape.
void load_params(const Archive& archive, const NamedParams& params);

}  // namespace midsg
