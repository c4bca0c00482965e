// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout:
//   line 1  "rosetta-checkpoint <format_version>"
//   line 2  ModelConfig as canonical JSON
//   line 3  payload descriptor JSON {"dtype","count","step","optimizer"}
//   payload parameters, then (optionally) AdamW first and second moments,
//           each `count` little-endian values of `dtype`.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rosetta/error.hpp"
#include "rosetta/model/config.hpp"
#include "rosetta/model/params.hpp"

namespace rosetta::model {

inline constexpr int kCheckpointFormatVersion = 1;

template <typename Real>
struct Checkpoint {
  ModelConfig config;
  std::uint64_t step = 0;
  ParamStore<Real> params;
  /// AdamW moments; empty when the checkpoint carries weights only.
  std::vector<Real> m;
  std::vector<Real> v;
  bool has_optimizer() const noexcept { return !m.empty(); }
};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(p[b]) << (8 * b);
  return std::bit_cast<T>(bits);
}

template <typename Stored, typename Real>
void put_block(std::string& out, const std::vector<Real>& values) {
  for (Real x : values) put_le<Stored>(out, static_cast<Stored>(x));
}

template <typename Stored, typename Real>
std::vector<Real> get_block(const unsigned char*& p, std::size_t count) {
  std::vector<Real> out(count);
  for (std::size_t i = 0; i < count; ++i, p += sizeof(Stored)) out[i] = static_cast<Real>(get_le<Stored>(p));
  return out;
}

}  // namespace detail

/// Payload precision follows config.precision, so an f64 model reloads
/// bit-exactly and an f32 model stores exactly its own values.
template <typename Real>
std::string serialize_checkpoint(const Checkpoint<Real>& ck) {
  const bool wide = ck.config.precision == Precision::f64;
  nlohmann::ordered_json desc{{"dtype", wide ? "f64" : "f32"},
                              {"count", ck.params.size()},
                              {"step", ck.step},
                              {"optimizer", ck.has_optimizer()}};
  std::string out = "rosetta-checkpoint " + std::to_string(kCheckpointFormatVersion) + "\n";
  out += canonical_json(ck.config) + "\n" + desc.dump() + "\n";
  auto block = [&](const std::vector<Real>& values) {
    if (wide) {
      detail::put_block<double>(out, values);
    } else {
      detail::put_block<float>(out, values);
    }
  };
  block(ck.params.values);
  if (ck.has_optimizer()) {
    block(ck.m);
    block(ck.v);
  }
  return out;
}

template <typename Real>
Checkpoint<Real> parse_checkpoint(const std::string& bytes, const std::string& origin = "<memory>") {
  auto fail = [&](const std::string& why) { return ValidationError("checkpoint " + origin + ": " + why); };
  std::size_t pos = 0;
  auto line = [&]() {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw fail("truncated header");
    std::string s = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return s;
  };
  const std::string magic = line();
  if (magic != "rosetta-checkpoint " + std::to_string(kCheckpointFormatVersion)) throw fail("bad magic or version");
  Checkpoint<Real> ck;
  nlohmann::ordered_json desc;
  try {
    ck.config = nlohmann::ordered_json::parse(line()).template get<ModelConfig>();
    desc = nlohmann::ordered_json::parse(line());
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  ck.config.validate();
  const std::string dtype = desc.at("dtype").get<std::string>();
  const auto count = desc.at("count").get<std::size_t>();
  ck.step = desc.at("step").get<std::uint64_t>();
  const bool opt = desc.at("optimizer").get<bool>();
  if (dtype != "f32" && dtype != "f64") throw fail("unknown dtype " + dtype);
  if (count != ParamLayout(ck.config).total()) throw fail("parameter count does not match config");
  const std::size_t width = dtype == "f64" ? 8 : 4;
  const std::size_t blocks = opt ? 3 : 1;
  if (bytes.size() - pos != blocks * count * width) throw fail("payload size mismatch");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
  auto block = [&]() {
    return width == 8 ? detail::get_block<double, Real>(p, count) : detail::get_block<float, Real>(p, count);
  };
  ck.params.values = block();
  if (opt) {
    ck.m = block();
    ck.v = block();
  }
  return ck;
}

template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<Real>& ck) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint", tmp.string());
    const std::string bytes = serialize_checkpoint(ck);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("checkpoint write failed", tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + ec.message(), path.string());
}

template <typename Real>
Checkpoint<Real> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint", path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint<Real>(bytes, path.string());
}

/// Reads only the header to learn the stored config.
inline ModelConfig peek_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint", path.string());
  std::string magic, config;
  std::getline(in, magic);
  std::getline(in, config);
  if (magic != "rosetta-checkpoint " + std::to_string(kCheckpointFormatVersion))
    throw ValidationError("checkpoint " + path.string() + ": bad magic or version");
  try {
    return nlohmann::ordered_json::parse(config).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace rosetta::model
