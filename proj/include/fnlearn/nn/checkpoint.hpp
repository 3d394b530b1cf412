#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fnlearn/errors.hpp"
#include "fnlearn/nn/encoder.hpp"

namespace fnlearn::nn {

inline constexpr std::string_view kBundleVersion = "fnlearn-arrays v1";

enum class DType { kF32, kF64 };

inline std::string_view dtype_name(DType d) { return d == DType::kF32 ? "f32" : "f64"; }

/// Named arrays plus string metadata, persisted as a text manifest
/// (`<stem>.manifest`) and little-endian raw arrays in manifest order
/// (`<stem>.bin`).
struct ArrayBundle {
  struct Array {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;
  };

  DType dtype = DType::kF64;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<Array> arrays;

  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : meta)
      if (k == key) {
        v = value;
        return;
      }
    meta.emplace_back(key, value);
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    throw FormatError("bundle has no metadata key '" + key + "'");
  }

  void add(std::string name, std::vector<std::size_t> shape, std::vector<double> data) {
    arrays.push_back({std::move(name), std::move(shape), std::move(data)});
  }

  const Array& array(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return a;
    throw FormatError("bundle has no array '" + name + "'");
  }
};

namespace detail {
template <class U>
void write_le(std::ostream& os, U v) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(U)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  os.write(reinterpret_cast<const char*>(bits.data()), sizeof(U));
}

template <class U>
U read_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bits{};
  is.read(reinterpret_cast<char*>(bits.data()), sizeof(U));
  if (!is) throw FormatError("array data truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<U>(bits);
}

inline std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  auto p = stem;
  p += suffix;
  return p;
}
}  // namespace detail

inline void save_bundle(const std::filesystem::path& stem, const ArrayBundle& b) {
  std::ofstream man(detail::with_suffix(stem, ".manifest"), std::ios::binary);
  std::ofstream bin(detail::with_suffix(stem, ".bin"), std::ios::binary);
  if (!man || !bin) throw Error("cannot write bundle " + stem.string());
  man << kBundleVersion << '\n' << "dtype=" << dtype_name(b.dtype) << '\n';
  for (const auto& [k, v] : b.meta) man << "meta " << k << '=' << v << '\n';
  for (const auto& a : b.arrays) {
    man << "array " << a.name << ' ';
    for (std::size_t i = 0; i < a.shape.size(); ++i) man << (i ? "x" : "") << a.shape[i];
    man << '\n';
    for (double v : a.data) {
      if (b.dtype == DType::kF32)
        detail::write_le(bin, static_cast<float>(v));
      else
        detail::write_le(bin, v);
    }
  }
  man << "end\n";
  if (!man || !bin) throw Error("write failed for bundle " + stem.string());
}

inline ArrayBundle load_bundle(const std::filesystem::path& stem) {
  const auto man_path = detail::with_suffix(stem, ".manifest");
  const auto bin_path = detail::with_suffix(stem, ".bin");
  std::ifstream man(man_path, std::ios::binary);
  if (!man) throw MissingArtifact(man_path.string());
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw MissingArtifact(bin_path.string());
  ArrayBundle b;
  std::string line;
  if (!std::getline(man, line) || line != kBundleVersion)
    throw FormatError(man_path.string() + ": unsupported version tag '" + line + "'");
  if (!std::getline(man, line) || !line.starts_with("dtype="))
    throw FormatError(man_path.string() + ": missing dtype");
  const auto dt = line.substr(6);
  if (dt == "f32")
    b.dtype = DType::kF32;
  else if (dt == "f64")
    b.dtype = DType::kF64;
  else
    throw FormatError(man_path.string() + ": unknown dtype '" + dt + "'");
  bool ended = false;
  while (std::getline(man, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    if (line.starts_with("meta ")) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError(man_path.string() + ": bad meta line");
      b.meta.emplace_back(line.substr(5, eq - 5), line.substr(eq + 1));
    } else if (line.starts_with("array ")) {
      std::istringstream ls(line.substr(6));
      ArrayBundle::Array a;
      std::string dims;
      ls >> a.name >> dims;
      std::size_t count = 1;
      std::istringstream ds(dims);
      std::string part;
      while (std::getline(ds, part, 'x')) {
        a.shape.push_back(std::stoul(part));
        count *= a.shape.back();
      }
      a.data.resize(count);
      for (auto& v : a.data)
        v = b.dtype == DType::kF32 ? static_cast<double>(detail::read_le<float>(bin)) : detail::read_le<double>(bin);
      b.arrays.push_back(std::move(a));
    } else {
      throw FormatError(man_path.string() + ": unexpected line '" + line + "'");
    }
  }
  if (!ended) throw FormatError(man_path.string() + ": missing end marker");
  if (bin.peek() != std::char_traits<char>::eof()) throw FormatError(bin_path.string() + ": trailing bytes");
  return b;
}

// ---------------------------------------------------------------------------
// Encoder checkpoints

struct CheckpointInfo {
  std::uint64_t seed = 0;
  long steps = 0;
};

template <class T>
ArrayBundle encoder_bundle(Encoder<T>& enc, const CheckpointInfo& info) {
  ArrayBundle b;
  b.dtype = std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
  const auto& c = enc.config();
  b.set("kind", "encoder");
  b.set("seed", std::to_string(info.seed));
  b.set("steps", std::to_string(info.steps));
  b.set("input_len", std::to_string(c.input_len));
  b.set("rep_dim", std::to_string(c.rep_dim));
  b.set("proj_dim", std::to_string(c.proj_dim));
  b.set("proj_hidden", std::to_string(c.proj_hidden));
  b.set("channels", std::to_string(c.channels));
  for (auto* p : enc.params())
    b.add(p->name, p->value.shape(), std::vector<double>(p->value.values().begin(), p->value.values().end()));
  for (auto& buf : enc.buffers())
    b.add(buf.name, buf.value->shape(), std::vector<double>(buf.value->values().begin(), buf.value->values().end()));
  return b;
}

template <class T>
void save_encoder(const std::filesystem::path& stem, Encoder<T>& enc, const CheckpointInfo& info) {
  save_bundle(stem, encoder_bundle(enc, info));
}

template <class T>
Encoder<T> encoder_from_bundle(const ArrayBundle& b, CheckpointInfo* info = nullptr) {
  if (b.get("kind") != "encoder") throw FormatError("bundle is not an encoder checkpoint");
  EncoderConfig cfg;
  cfg.input_len = std::stoul(b.get("input_len"));
  cfg.rep_dim = std::stoul(b.get("rep_dim"));
  cfg.proj_dim = std::stoul(b.get("proj_dim"));
  cfg.proj_hidden = std::stoul(b.get("proj_hidden"));
  cfg.channels = std::stoul(b.get("channels"));
  Encoder<T> enc(cfg);
  std::size_t k = 0;
  auto fill = [&](const std::string& name, Tensor<T>& dst) {
    if (k >= b.arrays.size()) throw FormatError("checkpoint missing array '" + name + "'");
    const auto& a = b.arrays[k++];
    if (a.name != name || a.shape != dst.shape())
      throw FormatError("checkpoint array '" + a.name + "' does not match '" + name + "'");
    for (std::size_t i = 0; i < a.data.size(); ++i) dst[i] = static_cast<T>(a.data[i]);
  };
  for (auto* p : enc.params()) fill(p->name, p->value);
  for (auto& buf : enc.buffers()) fill(buf.name, *buf.value);
  if (k != b.arrays.size()) throw FormatError("checkpoint has extra arrays");
  if (info) {
    info->seed = std::stoull(b.get("seed"));
    info->steps = std::stol(b.get("steps"));
  }
  return enc;
}

template <class T>
Encoder<T> load_encoder(const std::filesystem::path& stem, CheckpointInfo* info = nullptr) {
  return encoder_from_bundle<T>(load_bundle(stem), info);
}

}  // namespace fnlearn::nn
