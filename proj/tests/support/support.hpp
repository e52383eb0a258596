#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "genderpair/jsonl.hpp"
#include "genderpair/model_client.hpp"
#include "genderpair/registry.hpp"

namespace gptest {

namespace fs = std::filesystem;
using genderpair::Json;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "gptest-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline const genderpair::GenderTargetRegistry& reference_registry() {
  static const auto reg = genderpair::GenderTargetRegistry::load(GP_REGISTRY);
  return reg;
}

inline const genderpair::GenderTarget& find_target(const genderpair::GenderTargetRegistry& reg, genderpair::GroupId g,
                                                   const std::string& surface) {
  for (const auto& t : reg.benchmark_targets(g)) {
    if (t.surface == surface) return t;
  }
  throw std::runtime_error("target not found: " + surface);
}

inline const genderpair::DescriptorTriplet& find_triplet(const genderpair::GenderTargetRegistry& reg,
                                                         genderpair::GroupId g, const std::string& biased) {
  for (const auto& t : reg.triplets(g)) {
    if (t.biased == biased) return t;
  }
  throw std::runtime_error("triplet not found: " + biased);
}

inline genderpair::GenerationParams mock_params() {
  genderpair::GenerationParams p;
  p.model = "mock";
  return p;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Lowercase pseudo-words that never collide with the fixed filler vocabulary.
inline std::string random_word(std::mt19937_64& rng, size_t min_len = 4, size_t max_len = 9) {
  static const std::string letters = "bcdfghjklmnpqrstvwxz";
  static const std::string vowels = "aeiouy";
  std::uniform_int_distribution<size_t> len(min_len, max_len);
  size_t n = len(rng);
  std::string w;
  for (size_t i = 0; i < n; ++i) {
    const std::string& pool = (i % 2 == 0) ? letters : vowels;
    w += pool[std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng)];
  }
  return "q" + w;
}

// Small registry with distinct random surfaces: `targets` identities and `pairs` media triplets per group.
inline Json random_registry_json(std::mt19937_64& rng, size_t targets, size_t pairs, const std::string& version = "rand-1") {
  Json doc = {{"schema", "genderpair-registry/1"}, {"version", version}};
  Json tg = Json::array();
  Json tr = Json::array();
  std::set<std::string> used;
  auto fresh = [&] {
    while (true) {
      std::string w = random_word(rng);
      if (used.insert(w).second) return w;
    }
  };
  for (int g = 1; g <= 3; ++g) {
    for (size_t i = 0; i < targets; ++i) tg.push_back({{"group", g}, {"kind", "identity"}, {"surface", fresh()}});
    for (size_t i = 0; i < pairs; ++i) {
      tr.push_back({{"group", g}, {"biased", fresh()}, {"anti_biased", fresh()}, {"source", "media"},
                    {"rank", static_cast<int>(i + 1)}});
    }
  }
  Json groups = Json::object();
  for (int g = 1; g <= 3; ++g) {
    groups[std::to_string(g)] = {{"identities", targets}, {"titles", 0}, {"pronouns", 0}, {"names", 0},
                                 {"biased_descriptors", pairs}, {"anti_biased_descriptors", pairs},
                                 {"descriptor_pairs", pairs}};
  }
  doc["manifest"] = {{"groups", groups}};
  doc["targets"] = tg;
  doc["triplets"] = tr;
  return doc;
}

}  // namespace gptest
