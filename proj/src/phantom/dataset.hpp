#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "phantom/phantom.hpp"

namespace divseg::phantom {

struct ManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
  std::array<std::string, kModalityCount> images;  // relative to the root
  std::string label;
};

struct Manifest {
  std::string root;
  std::string split;  // "train" or "test"
  std::uint64_t seed = 0;
  Dims dims;
  std::vector<ManifestEntry> entries;
};

struct DatasetPaths {
  std::string train_manifest;
  std::string test_manifest;
};

// Path of the manifest for `split` under `root`: <root>/<split>_manifest.json.
std::string manifest_path(const std::string& root, const std::string& split);

// Per-sample seeds for both splits, drawn from one seed sequence; all distinct.
std::vector<std::uint64_t> sample_seeds(std::uint64_t seed, std::size_t count);

// Writes <root>/<split>/<id>_m{1..4}.vol, <id>_lbl.vol and one manifest per split.
DatasetPaths make_dataset(std::size_t n_train, std::size_t n_test, std::uint64_t seed,
                          const std::string& root, Dims dims = {});

std::string manifest_to_json(const Manifest& m);
// Parses and checks that every referenced file exists.
Manifest load_manifest(const std::string& path);

// Reads every volume of a manifest back into memory.
std::vector<Sample> load_samples(const Manifest& m);

}  // namespace divseg::phantom
