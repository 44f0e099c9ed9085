#include "phantom/dataset.hpp"

#include <filesystem>
#include <random>
#include <set>

#include "common/error.hpp"
#include "common/file_io.hpp"
#include "json.hpp"
#include "phantom/volume_io.hpp"

namespace divseg::phantom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sample_id(const std::string& split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu", split.c_str(), i);
  return buf;
}

Manifest write_split(const std::string& root, const std::string& split, std::uint64_t seed,
                     const std::vector<std::uint64_t>& seeds, Dims dims) {
  fs::create_directories(fs::path(root) / split);
  Manifest m{root, split, seed, dims, {}};
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Sample s = generate_phantom(seeds[i], dims);
    ManifestEntry e;
    e.id = sample_id(split, i);
    e.seed = seeds[i];
    for (int k = 0; k < kModalityCount; ++k) {
      e.images[k] = split + "/" + e.id + "_m" + std::to_string(k + 1) + ".vol";
      write_volume((fs::path(root) / e.images[k]).string(), s.volumes[k], VolumeDtype::F32);
    }
    e.label = split + "/" + e.id + "_lbl.vol";
    write_volume((fs::path(root) / e.label).string(), s.labels, VolumeDtype::U8);
    m.entries.push_back(std::move(e));
  }
  write_file(manifest_path(root, split), manifest_to_json(m));
  return m;
}

}  // namespace

std::string manifest_path(const std::string& root, const std::string& split) {
  return (fs::path(root) / (split + "_manifest.json")).string();
}

std::vector<std::uint64_t> sample_seeds(std::uint64_t seed, std::size_t count) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::set<std::uint64_t> seen;
  std::vector<std::uint64_t> out;
  while (out.size() < count) {
    const auto s = rng();
    if (seen.insert(s).second) out.push_back(s);
  }
  return out;
}

DatasetPaths make_dataset(std::size_t n_train, std::size_t n_test, std::uint64_t seed,
                          const std::string& root, Dims dims) {
  if (n_train < 1 || n_test < 1) throw ConfigError("make_dataset: each split needs n >= 1");
  const auto seeds = sample_seeds(seed, n_train + n_test);
  try {
    write_split(root, "train", seed, {seeds.begin(), seeds.begin() + n_train}, dims);
    write_split(root, "test", seed, {seeds.begin() + n_train, seeds.end()}, dims);
  } catch (const fs::filesystem_error& e) {
    throw IoError(e.what());
  }
  return {manifest_path(root, "train"), manifest_path(root, "test")};
}

std::string manifest_to_json(const Manifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"id", e.id},
                       {"seed", e.seed},
                       {"images", std::vector<std::string>(e.images.begin(), e.images.end())},
                       {"label", e.label}});
  }
  json j{{"root", m.root},
         {"split", m.split},
         {"seed", m.seed},
         {"dims", {m.dims.d, m.dims.h, m.dims.w}},
         {"samples", entries}};
  return j.dump(2) + "\n";
}

Manifest load_manifest(const std::string& path) {
  const std::string text = read_file(path);
  Manifest m;
  try {
    const json j = json::parse(text);
    m.split = j.at("split").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3) throw ParseError("manifest: dims must have 3 entries");
    m.dims = {dims[0], dims[1], dims[2]};
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.seed = s.at("seed").get<std::uint64_t>();
      const auto images = s.at("images").get<std::vector<std::string>>();
      if (images.size() != kModalityCount) {
        throw ParseError("manifest: sample " + e.id + " needs 4 images");
      }
      std::copy(images.begin(), images.end(), e.images.begin());
      e.label = s.at("label").get<std::string>();
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError("manifest '" + path + "': " + e.what());
  }
  if (m.split != "train" && m.split != "test") {
    throw ParseError("manifest '" + path + "': unknown split '" + m.split + "'");
  }
  // Paths resolve against the manifest's own directory, so datasets can move.
  m.root = fs::path(path).parent_path().string();
  if (m.root.empty()) m.root = ".";
  for (const auto& e : m.entries) {
    for (const auto& rel : e.images) {
      if (!fs::exists(fs::path(m.root) / rel)) throw IoError("manifest references missing " + rel);
    }
    if (!fs::exists(fs::path(m.root) / e.label)) {
      throw IoError("manifest references missing " + e.label);
    }
  }
  return m;
}

std::vector<Sample> load_samples(const Manifest& m) {
  std::vector<Sample> out;
  for (const auto& e : m.entries) {
    Sample s;
    s.id = e.id;
    for (int k = 0; k < kModalityCount; ++k) {
      auto v = read_volume((fs::path(m.root) / e.images[k]).string());
      if (v.dtype != VolumeDtype::F32 || v.tensor.shape().size() != 4 ||
          v.tensor.shape()[0] != 1) {
        throw ParseError(e.images[k] + ": expected a single-channel f32 volume");
      }
      s.volumes[k] = std::move(v.tensor);
    }
    auto lbl = read_volume((fs::path(m.root) / e.label).string());
    if (lbl.dtype != VolumeDtype::U8) throw ParseError(e.label + ": expected a u8 label volume");
    for (double c : lbl.tensor.data()) {
      if (c > 3) throw ParseError(e.label + ": label value " + std::to_string(c) + " out of range");
    }
    s.labels = std::move(lbl.tensor);
    const nd::Shape spatial(s.volumes[0].shape().begin() + 1, s.volumes[0].shape().end());
    if (s.labels.shape() != spatial) {
      throw ParseError(e.id + ": label shape " + nd::to_string(s.labels.shape()) +
                       " does not match image shape " + nd::to_string(spatial));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace divseg::phantom
