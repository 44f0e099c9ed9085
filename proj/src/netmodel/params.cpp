#include "netmodel/params.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "common/error.hpp"
#include "common/file_io.hpp"
#include "netmodel/modality.hpp"

namespace divseg::net {

namespace {

constexpr std::string_view kMagic = "DSEGPRM";
constexpr std::uint16_t kVersion = 1;

void put_u(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  std::uint64_t u(int bytes, const char* what) {
    need(bytes, what);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= std::uint64_t(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    }
    pos_ += bytes;
    return v;
  }
  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what +
                       " at byte " + std::to_string(pos_));
    }
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

std::size_t fan_in(const nd::Shape& w) {
  std::size_t f = 1;
  for (std::size_t i = 1; i < w.size(); ++i) f *= w[i];
  return f;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

void ArchConfig::validate() const {
  if (channels.empty()) throw ConfigError("arch: channel list is empty");
  if (classes < 2) throw ConfigError("arch: need at least 2 classes");
  if (groups == 0) throw ConfigError("arch: group count must be positive");
  for (std::size_t c : channels) {
    if (c == 0 || c % groups != 0) {
      throw ConfigError("arch: " + std::to_string(c) + " channels not divisible into " +
                        std::to_string(groups) + " groups");
    }
  }
  if (!(norm_eps > 0)) throw ConfigError("arch: norm eps must be positive");
}

std::vector<ParamSpec> param_layout(const ArchConfig& arch) {
  arch.validate();
  const auto& ch = arch.channels;
  const std::size_t c1 = ch[0];
  std::vector<ParamSpec> out;
  auto conv = [&](const std::string& prefix, std::size_t co, std::size_t ci, std::size_t k,
                  bool bias) {
    out.push_back({prefix + ".w", {co, ci, k, k, k}});
    if (bias) out.push_back({prefix + ".b", {co}});
  };
  auto norm = [&](const std::string& prefix, std::size_t c) {
    out.push_back({prefix + ".gain", {c}});
    out.push_back({prefix + ".bias", {c}});
  };
  for (int i = 1; i <= kModalities; ++i) conv("enc" + std::to_string(i), c1, 1, 3, true);
  for (std::size_t l = 0; l < ch.size(); ++l) {
    const std::string p = "bb" + std::to_string(l + 1);
    if (l > 0) conv(p + ".lift", ch[l], ch[l - 1], 1, true);
    conv(p + ".conv1", ch[l], ch[l], 3, false);
    norm(p + ".norm1", ch[l]);
    conv(p + ".conv2", ch[l], ch[l], 3, false);
    norm(p + ".norm2", ch[l]);
  }
  for (std::size_t l = ch.size() - 1; l-- > 0;) {
    const std::string p = "dec" + std::to_string(l + 1);
    conv(p + ".reduce", ch[l], ch[l + 1], 1, true);
    conv(p + ".conv", ch[l], ch[l], 3, false);
    norm(p + ".norm", ch[l]);
  }
  conv("head", arch.classes, c1, 1, true);
  for (std::size_t l = 0; l < ch.size(); ++l) {
    const std::string p = "mi" + std::to_string(l + 1);
    conv(p, ch[l], ch[l], 1, true);
    out.push_back({p + ".log_sigma", {ch[l]}});
  }
  return out;
}

ModelParams::ModelParams(ArchConfig arch, std::vector<std::string> names,
                         std::vector<nd::Tensor> values)
    : arch_(std::move(arch)), names_(std::move(names)), values_(std::move(values)) {
  if (names_.size() != values_.size()) {
    throw ContractError("ModelParams: names and values differ in length");
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!by_name_.emplace(names_[i], i).second) {
      throw ContractError("ModelParams: duplicate parameter '" + names_[i] + "'");
    }
  }
}

std::size_t ModelParams::index(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) {
    throw ContractError("ModelParams: no parameter '" + std::string(name) + "'");
  }
  return it->second;
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.numel();
  return n;
}

ModelParams init_params(std::uint64_t seed, const ArchConfig& arch) {
  const auto layout = param_layout(arch);
  std::mt19937_64 rng(seed);
  std::vector<std::string> names;
  std::vector<nd::Tensor> values;
  std::size_t last_fan_in = 1;
  for (const auto& spec : layout) {
    nd::Tensor t(spec.shape);
    if (ends_with(spec.name, ".gain")) {
      t = nd::Tensor(spec.shape, 1.0);
    } else if (ends_with(spec.name, ".w") || ends_with(spec.name, ".b")) {
      // A bias follows its weight and shares the weight's fan-in.
      if (ends_with(spec.name, ".w")) last_fan_in = fan_in(spec.shape);
      const double bound = 1.0 / std::sqrt(double(last_fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& v : t.data()) v = u(rng);
    }
    names.push_back(spec.name);
    values.push_back(std::move(t));
  }
  return ModelParams(arch, std::move(names), std::move(values));
}

std::string serialize(const ModelParams& params) {
  std::string out(kMagic);
  put_u(out, kVersion, 2);
  put_u(out, params.size(), 4);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    const auto& shape = params.value(i).shape();
    put_u(out, name.size(), 4);
    out += name;
    put_u(out, shape.size(), 4);
    for (std::size_t e : shape) put_u(out, e, 4);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double v : params.value(i).data()) put_u(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  return out;
}

ModelParams deserialize(std::string_view bytes, const ArchConfig& arch) {
  Reader r(bytes);
  if (r.take(kMagic.size(), "magic") != kMagic) {
    throw ParseError("checkpoint: bad magic (expected DSEGPRM)");
  }
  const auto version = r.u(2, "version");
  if (version != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = r.u(4, "parameter count");
  const auto layout = param_layout(arch);
  if (count != layout.size()) {
    throw ParseError("checkpoint: " + std::to_string(count) + " parameters, architecture has " +
                     std::to_string(layout.size()));
  }
  std::vector<std::string> names;
  std::vector<nd::Shape> shapes;
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = r.u(4, "name length");
    names.emplace_back(r.take(len, "name"));
    const auto rank = r.u(4, "rank");
    if (rank > 8) throw ParseError("checkpoint: implausible rank for " + names.back());
    nd::Shape s(rank);
    for (auto& e : s) e = r.u(4, "extent");
    if (names.back() != layout[i].name || s != layout[i].shape) {
      throw ParseError("checkpoint: parameter " + std::to_string(i) + " is '" + names.back() +
                       "' " + nd::to_string(s) + ", architecture expects '" + layout[i].name +
                       "' " + nd::to_string(layout[i].shape));
    }
    shapes.push_back(std::move(s));
  }
  std::vector<nd::Tensor> values;
  for (const auto& s : shapes) {
    nd::Tensor t(s);
    for (double& v : t.data()) v = std::bit_cast<double>(r.u(8, "values"));
    values.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw ParseError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return ModelParams(arch, std::move(names), std::move(values));
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  write_file(path, serialize(params));
}

ModelParams load_checkpoint(const std::string& path, const ArchConfig& arch) {
  return deserialize(read_file(path), arch);
}

}  // namespace divseg::net
