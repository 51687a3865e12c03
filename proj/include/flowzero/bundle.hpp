// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "flowzero/dss.hpp"
#include "flowzero/error.hpp"
#include "flowzero/io.hpp"
#include "flowzero/llm.hpp"
#include "flowzero/mns.hpp"

namespace flowzero {

// ---------------------------------------------------------------------------
// Tensor file
//
//   offset 0   4 bytes  magic "FZT1"
//   offset 4   1 byte   dtype (1 = float32, 2 = float64)
//   offset 5   1 byte   ndim
//   offset 6   ndim x uint64 little-endian dims
//   then       prod(dims) values, row-major, little-endian
//
// Noise tensors are written with dims [H, W, C].

enum class TensorDtype : std::uint8_t { kFloat32 = 1, kFloat64 = 2 };

inline constexpr std::array<char, 4> kTensorMagic = {'F', 'Z', 'T', '1'};

inline std::size_t dtype_size(TensorDtype d) { return d == TensorDtype::kFloat32 ? 4 : 8; }
inline std::string_view to_string(TensorDtype d) { return d == TensorDtype::kFloat32 ? "f32" : "f64"; }

namespace detail {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_tensor(const NoiseTensor& t, TensorDtype dtype = TensorDtype::kFloat64) {
  std::string out(kTensorMagic.begin(), kTensorMagic.end());
  out.push_back(static_cast<char>(dtype));
  out.push_back(static_cast<char>(3));
  detail::put_le<std::uint64_t>(out, t.height());
  detail::put_le<std::uint64_t>(out, t.width());
  detail::put_le<std::uint64_t>(out, t.channels());
  out.reserve(out.size() + t.size() * dtype_size(dtype));
  for (double v : t.data()) {
    if (dtype == TensorDtype::kFloat32) {
      detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      detail::put_le(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

/// Accepts ndim 2 ([H, W], one channel) or 3 ([H, W, C]).
inline NoiseTensor decode_tensor(std::string_view bytes, TensorDtype* dtype_out = nullptr) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 6) throw FormatError("tensor file too short for a header");
  if (std::memcmp(bytes.data(), kTensorMagic.data(), 4) != 0) {
    throw FormatError("bad magic \"" + std::string(bytes.substr(0, 4)) + "\", expected \"FZT1\"");
  }
  const auto dtype = static_cast<TensorDtype>(p[4]);
  if (dtype != TensorDtype::kFloat32 && dtype != TensorDtype::kFloat64) {
    throw FormatError("unknown dtype code " + std::to_string(p[4]));
  }
  const std::size_t ndim = p[5];
  if (ndim != 2 && ndim != 3) throw FormatError("expected 2 or 3 dims, got " + std::to_string(ndim));
  const std::size_t header = 6 + 8 * ndim;
  if (bytes.size() < header) throw FormatError("tensor header truncated");
  std::array<std::uint64_t, 3> dims = {1, 1, 1};
  for (std::size_t i = 0; i < ndim; ++i) dims[i] = detail::get_le<std::uint64_t>(p + 6 + 8 * i);

  const std::size_t count = dims[0] * dims[1] * dims[2];
  const std::size_t expected = count * dtype_size(dtype);
  const std::size_t actual = bytes.size() - header;
  if (actual != expected) {
    throw FormatError("payload holds " + std::to_string(actual) + " bytes, expected " +
                      std::to_string(expected));
  }
  std::vector<double> data(count);
  const unsigned char* q = p + header;
  for (std::size_t i = 0; i < count; ++i) {
    if (dtype == TensorDtype::kFloat32) {
      data[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(q + 4 * i));
    } else {
      data[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(q + 8 * i));
    }
  }
  if (dtype_out) *dtype_out = dtype;
  return NoiseTensor(dims[0], dims[1], dims[2], std::move(data));
}

inline void write_tensor(const std::filesystem::path& path, const NoiseTensor& t,
                         TensorDtype dtype = TensorDtype::kFloat64) {
  write_file_atomic(path, encode_tensor(t, dtype));
}

inline NoiseTensor read_tensor(const std::filesystem::path& path, TensorDtype* dtype_out = nullptr) {
  return decode_tensor(detail::read_file(path), dtype_out);
}

// ---------------------------------------------------------------------------
// Checksums

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw IOError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

// ---------------------------------------------------------------------------
// Bundle: manifest.json, dss.json, noise/frame_{i:03}.fzt

inline constexpr const char* kBundleVersion = "1";

struct BundleManifest {
  std::string version = kBundleVersion;
  std::string dss_path = "dss.json";
  std::vector<std::string> noise_paths;
  std::array<std::size_t, 3> latent_shape = {0, 0, 0};  // H, W, C
  TensorDtype dtype = TensorDtype::kFloat64;
  NoiseParams params;
  std::vector<FrameNoisePlan> frames;
  std::vector<std::pair<std::string, std::string>> checksums;  // path -> sha256, in write order

  friend bool operator==(const BundleManifest& a, const BundleManifest& b) {
    return a.version == b.version && a.dss_path == b.dss_path && a.noise_paths == b.noise_paths &&
           a.latent_shape == b.latent_shape && a.dtype == b.dtype &&
           a.params.pixel_scale == b.params.pixel_scale && a.params.sigma_phi == b.params.sigma_phi &&
           a.params.rng_seed == b.params.rng_seed && a.frames == b.frames && a.checksums == b.checksums;
  }
};

inline std::string noise_file_name(std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "noise/frame_%03zu.fzt", frame);
  return buf;
}

inline ordered_json to_json(const BundleManifest& m) {
  ordered_json frames = ordered_json::array();
  for (const auto& f : m.frames) {
    ordered_json jf{{"index", f.frame},
                    {"direction", std::string(to_string(f.direction))},
                    {"speed", f.speed}};
    if (f.random) {
      jf["phase_magnitude"] = f.phase_magnitude;
      jf["phase_seed"] = f.phase_seed;
    } else {
      jf["offset_x"] = f.shift.offset_x;
      jf["offset_y"] = f.shift.offset_y;
    }
    frames.push_back(std::move(jf));
  }
  ordered_json sums = ordered_json::object();
  for (const auto& [path, hex] : m.checksums) sums[path] = hex;
  return ordered_json{{"version", m.version},
                      {"dss_path", m.dss_path},
                      {"noise_paths", m.noise_paths},
                      {"latent_shape", m.latent_shape},
                      {"dtype", std::string(to_string(m.dtype))},
                      {"pixel_scale", m.params.pixel_scale},
                      {"sigma_phi", m.params.sigma_phi},
                      {"rng_seed", m.params.rng_seed},
                      {"frames", std::move(frames)},
                      {"checksums", std::move(sums)}};
}

inline BundleManifest manifest_from_json(const ordered_json& j) {
  const std::string where = "manifest";
  try {
    BundleManifest m;
    m.version = detail::require_string(j, "version", where);
    if (m.version != kBundleVersion) throw FormatError("unsupported bundle version " + m.version);
    m.dss_path = detail::require_string(j, "dss_path", where);
    m.noise_paths = detail::require(j, "noise_paths", where).get<std::vector<std::string>>();
    m.latent_shape = detail::require(j, "latent_shape", where).get<std::array<std::size_t, 3>>();
    const std::string dtype = detail::require_string(j, "dtype", where);
    if (dtype != "f32" && dtype != "f64") throw FormatError("unknown dtype " + dtype);
    m.dtype = dtype == "f32" ? TensorDtype::kFloat32 : TensorDtype::kFloat64;
    m.params.pixel_scale = detail::require_number(j, "pixel_scale", where);
    m.params.sigma_phi = detail::require_number(j, "sigma_phi", where);
    m.params.rng_seed = detail::require(j, "rng_seed", where).get<std::uint64_t>();
    for (const auto& f : detail::require(j, "frames", where)) {
      FrameNoisePlan p;
      p.frame = f.at("index").get<int>();
      auto dir = parse_direction(f.at("direction").get<std::string>());
      if (!dir) throw FormatError("manifest frame has unknown direction");
      p.direction = *dir;
      p.speed = f.at("speed").get<double>();
      p.random = p.direction == Direction::kRandom;
      if (f.contains("offset_x")) {
        p.shift.offset_x = f.at("offset_x").get<double>();
        p.shift.offset_y = f.at("offset_y").get<double>();
      }
      if (f.contains("phase_magnitude")) {
        p.phase_magnitude = f.at("phase_magnitude").get<double>();
        p.phase_seed = f.at("phase_seed").get<std::uint64_t>();
      }
      m.frames.push_back(p);
    }
    for (const auto& [path, hex] : detail::require(j, "checksums", where).items()) {
      m.checksums.emplace_back(path, hex.get<std::string>());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  } catch (const SchemaError& e) {
    throw FormatError(e.what());
  }
}

struct Bundle {
  DynamicSceneSyntax dss;
  std::vector<NoiseTensor> noises;
  BundleManifest manifest;
};

/// Writes dss.json, one tensor file per frame and manifest.json (last).
/// The manifest carries no timestamps, so identical inputs give identical
/// bytes.
inline BundleManifest emit_bundle(const DynamicSceneSyntax& dss, const std::vector<NoiseTensor>& noises,
                                  const std::filesystem::path& out_dir, const NoiseParams& params,
                                  TensorDtype dtype = TensorDtype::kFloat64) {
  validate(dss);
  if (noises.size() != static_cast<std::size_t>(dss.num_frames())) {
    throw ArityError("scene has " + std::to_string(dss.num_frames()) + " frames but " +
                     std::to_string(noises.size()) + " noise tensors were given");
  }
  for (const auto& n : noises) {
    validate(n);
    if (n.height() != noises[0].height() || n.width() != noises[0].width() ||
        n.channels() != noises[0].channels()) {
      throw ShapeError("noise tensors differ in shape");
    }
  }
  ensure_directory(out_dir);

  BundleManifest m;
  m.dtype = dtype;
  m.params = params;
  m.latent_shape = {noises[0].height(), noises[0].width(), noises[0].channels()};
  const auto motions = background_motions(dss);
  m.frames = plan_noise_sequence(motions, m.latent_shape[0], m.latent_shape[1], params);

  const std::string dss_text = serialize_dss(dss) + "\n";
  write_file_atomic(out_dir / m.dss_path, dss_text);
  m.checksums.emplace_back(m.dss_path, sha256_hex(dss_text));
  for (std::size_t i = 0; i < noises.size(); ++i) {
    const std::string rel = noise_file_name(i);
    const std::string bytes = encode_tensor(noises[i], dtype);
    write_file_atomic(out_dir / rel, bytes);
    m.noise_paths.push_back(rel);
    m.checksums.emplace_back(rel, sha256_hex(bytes));
  }
  write_file_atomic(out_dir / "manifest.json", to_json(m).dump(2) + "\n");
  return m;
}

/// Reads and integrity-checks a bundle. Any checksum mismatch or missing
/// checksum is an IntegrityError.
inline Bundle load_bundle(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IOError("no manifest.json in " + dir.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(detail::read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest.json is not valid JSON: ") + e.what());
  }
  Bundle b;
  b.manifest = manifest_from_json(doc);

  auto checked_read = [&](const std::string& rel) {
    const std::string bytes = detail::read_file(dir / rel);
    auto it = std::find_if(b.manifest.checksums.begin(), b.manifest.checksums.end(),
                           [&](const auto& kv) { return kv.first == rel; });
    if (it == b.manifest.checksums.end()) throw IntegrityError("no checksum recorded for " + rel);
    if (sha256_hex(bytes) != it->second) throw IntegrityError("checksum mismatch for " + rel);
    return bytes;
  };

  b.dss = parse_dss(checked_read(b.manifest.dss_path));
  if (b.manifest.noise_paths.size() != static_cast<std::size_t>(b.dss.num_frames())) {
    throw ArityError("manifest lists " + std::to_string(b.manifest.noise_paths.size()) +
                     " noise files for a " + std::to_string(b.dss.num_frames()) + "-frame scene");
  }
  for (const auto& rel : b.manifest.noise_paths) {
    NoiseTensor t = decode_tensor(checked_read(rel));
    if (t.height() != b.manifest.latent_shape[0] || t.width() != b.manifest.latent_shape[1] ||
        t.channels() != b.manifest.latent_shape[2]) {
      throw ShapeError(rel + " does not match the manifest latent shape");
    }
    b.noises.push_back(std::move(t));
  }
  return b;
}

}  // namespace flowzero
