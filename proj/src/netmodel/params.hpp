#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ndtensor/tensor.hpp"

namespace divseg::net {

struct ArchConfig {
  std::vector<std::size_t> channels{8, 16, 32};
  std::size_t classes = 4;
  std::size_t groups = 4;
  double norm_eps = 1e-5;

  std::size_t levels() const noexcept { return channels.size(); }
  // Throws ConfigError on empty channel lists, fewer than 2 classes, or
  // channel widths not divisible by the group count.
  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

struct ParamSpec {
  std::string name;
  nd::Shape shape;
};

// Ordered parameter names and shapes for an architecture, including the
// variational heads ("mi<k>.*").
std::vector<ParamSpec> param_layout(const ArchConfig& arch);

class ModelParams {
 public:
  ModelParams(ArchConfig arch, std::vector<std::string> names,
              std::vector<nd::Tensor> values);

  const ArchConfig& arch() const noexcept { return arch_; }
  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const nd::Tensor& value(std::size_t i) const { return values_.at(i); }
  nd::Tensor& value(std::size_t i) { return values_.at(i); }
  std::size_t index(std::string_view name) const;
  const nd::Tensor& operator[](std::string_view name) const { return values_[index(name)]; }
  nd::Tensor& operator[](std::string_view name) { return values_[index(name)]; }
  // Total scalar count.
  std::size_t count() const;

  bool operator==(const ModelParams& o) const {
    return arch_ == o.arch_ && names_ == o.names_ && values_ == o.values_;
  }

 private:
  ArchConfig arch_;
  std::vector<std::string> names_;
  std::vector<nd::Tensor> values_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// Conv weights and biases uniform in +-1/sqrt(fan_in); norm gain 1, bias 0;
// log sigma 0.
ModelParams init_params(std::uint64_t seed, const ArchConfig& arch);

// Checkpoint bytes: "DSEGPRM", u16 version, u32 count, per parameter
// (u32 name length, name, u32 rank, u32 extents), then all values as f64,
// little-endian throughout.
std::string serialize(const ModelParams& params);
// Parses checkpoint bytes and checks them against the layout of `arch`.
ModelParams deserialize(std::string_view bytes, const ArchConfig& arch);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path, const ArchConfig& arch);

}  // namespace divseg::net
