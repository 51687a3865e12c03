// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flowzero/dss.hpp"
#include "flowzero/error.hpp"
#include "flowzero/fft.hpp"

namespace flowzero {

/// H x W x C real tensor, row-major with channels innermost:
/// element (y, x, c) lives at (y * W + x) * C + c.
class NoiseTensor {
 public:
  NoiseTensor() = default;
  NoiseTensor(std::size_t height, std::size_t width, std::size_t channels)
      : h_(height), w_(width), c_(channels), data_(height * width * channels, 0.0) {}
  NoiseTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
      : h_(height), w_(width), c_(channels), data_(std::move(data)) {
    if (data_.size() != h_ * w_ * c_) throw ShapeError("tensor data size does not match its shape");
  }

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t channels() const { return c_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * w_ + x) * c_ + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * w_ + x) * c_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::optional<std::uint64_t> seed;
  std::optional<int> diffusion_step_label;  // metadata only

  /// Equal shape and bit-identical values; metadata is not compared.
  friend bool operator==(const NoiseTensor& a, const NoiseTensor& b) {
    return a.h_ == b.h_ && a.w_ == b.w_ && a.c_ == b.c_ && a.data_ == b.data_;
  }

 private:
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::size_t c_ = 0;
  std::vector<double> data_;
};

inline void validate(const NoiseTensor& t) {
  if (t.height() < 2 || t.width() < 2 || t.channels() < 1) {
    throw ShapeError("noise tensor needs H, W >= 2 and C >= 1");
  }
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NonFinite("noise tensor contains a non-finite value");
  }
}

// ---------------------------------------------------------------------------
// Random numbers. mt19937_64 is fully specified by the standard; the
// conversions below are written out so results do not depend on the
// standard library's distribution implementations.

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard-normal samples by the Box-Muller transform.
inline NoiseTensor gaussian_noise(std::size_t height, std::size_t width, std::size_t channels,
                                  std::uint64_t seed) {
  NoiseTensor t(height, width, channels);
  std::mt19937_64 rng(seed);
  auto d = t.data();
  for (std::size_t i = 0; i < d.size(); i += 2) {
    const double u1 = 1.0 - uniform01(rng);  // (0, 1]
    const double u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    d[i] = r * std::cos(a);
    if (i + 1 < d.size()) d[i + 1] = r * std::sin(a);
  }
  t.seed = seed;
  return t;
}

// ---------------------------------------------------------------------------
// Directions and shift plans

struct DirectionVector {
  double dx = 0.0;
  double dy = 0.0;
};

/// Unit screen-space direction (x right, y down). Diagonals are normalized
/// so that speed means pixels per frame regardless of direction.
inline DirectionVector direction_multipliers(Direction d) {
  constexpr double h = std::numbers::sqrt2 / 2.0;
  switch (d) {
    case Direction::kRight: return {1.0, 0.0};
    case Direction::kLeft: return {-1.0, 0.0};
    case Direction::kDown: return {0.0, 1.0};
    case Direction::kUp: return {0.0, -1.0};
    case Direction::kRightDown: return {h, h};
    case Direction::kRightUp: return {h, -h};
    case Direction::kLeftDown: return {-h, h};
    case Direction::kLeftUp: return {-h, -h};
    case Direction::kRandom: break;
  }
  throw RandomDirection("the random direction has no multipliers; use perturb_random");
}

/// Circular translation in pixels, wrapped into [-W/2, W/2] x [-H/2, H/2].
struct ShiftPlan {
  double offset_x = 0.0;
  double offset_y = 0.0;
};

inline double wrap_offset(double offset, std::size_t n) {
  const double period = static_cast<double>(n);
  return offset - period * std::round(offset / period);
}

inline ShiftPlan make_shift_plan(double offset_x, double offset_y, std::size_t height, std::size_t width) {
  return {wrap_offset(offset_x, width), wrap_offset(offset_y, height)};
}

/// Signed DFT index: 0, 1, ..., ceil(n/2)-1, then -floor(n/2), ..., -1.
inline long signed_frequency_index(std::size_t k, std::size_t n) {
  return k < (n + 1) / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

namespace detail {

/// exp(-j 2 pi offset k / n) for every bin of one axis. On even n the
/// Nyquist bin is its own conjugate partner and receives the real factor
/// (-1)^round(offset), which keeps the output real and amplitudes intact.
inline std::vector<std::complex<double>> axis_ramp(double offset, std::size_t n) {
  std::vector<std::complex<double>> ramp(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (n % 2 == 0 && k == n / 2) {
      const auto parity = static_cast<long long>(std::llround(offset)) & 1LL;
      ramp[k] = parity ? -1.0 : 1.0;
      continue;
    }
    const double cycles = std::fmod(offset * static_cast<double>(signed_frequency_index(k, n)),
                                    static_cast<double>(n));
    ramp[k] = std::polar(1.0, -2.0 * std::numbers::pi * cycles / static_cast<double>(n));
  }
  ramp[0] = 1.0;
  return ramp;
}

}  // namespace detail

/// Output of a spectral modulation plus the largest imaginary part dropped
/// when converting the inverse transform back to real values.
struct ModulatedNoise {
  NoiseTensor tensor;
  double max_imag_residue = 0.0;
  // DC coefficient of each channel before and after modulation.
  std::vector<std::complex<double>> dc_before;
  std::vector<std::complex<double>> dc_after;
};

/// Applies `multiplier(ky, kx)` to every DFT bin of every channel.
template <typename Multiplier>
ModulatedNoise modulate_spectrum(const NoiseTensor& base, Multiplier&& multiplier) {
  validate(base);
  const std::size_t h = base.height();
  const std::size_t w = base.width();
  const std::size_t ch = base.channels();
  ModulatedNoise out{NoiseTensor(h, w, ch), 0.0, {}, {}};
  out.tensor.seed = base.seed;
  out.tensor.diffusion_step_label = base.diffusion_step_label;

  Fft2d fft(h, w);
  auto buf = fft.data();
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) buf[y * w + x] = base.at(y, x, c);
    }
    fft.forward();
    out.dc_before.push_back(buf[0]);
    for (std::size_t ky = 0; ky < h; ++ky) {
      for (std::size_t kx = 0; kx < w; ++kx) buf[ky * w + kx] *= multiplier(ky, kx);
    }
    out.dc_after.push_back(buf[0]);
    fft.inverse();
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const auto v = buf[y * w + x];
        out.tensor.at(y, x, c) = v.real();
        out.max_imag_residue = std::max(out.max_imag_residue, std::abs(v.imag()));
      }
    }
  }
  return out;
}

/// Phase-ramp translation by a (possibly fractional) pixel offset. Content
/// moves toward +x for positive offset_x and toward +y (down) for positive
/// offset_y. Integer offsets reproduce a circular roll.
inline ModulatedNoise phase_shift(const NoiseTensor& base, const ShiftPlan& plan) {
  validate(base);
  const auto rx = detail::axis_ramp(plan.offset_x, base.width());
  const auto ry = detail::axis_ramp(plan.offset_y, base.height());
  return modulate_spectrum(base, [&](std::size_t ky, std::size_t kx) { return ry[ky] * rx[kx]; });
}

inline ShiftPlan frame_shift_plan(const NoiseTensor& base, long frame_index, DirectionVector direction,
                                  double speed, double pixel_scale) {
  if (frame_index < 0) throw RangeError("frame index must be >= 0");
  if (!(speed >= 0.0 && speed <= 1.0)) throw RangeError("speed must be in [0, 1]");
  if (!(pixel_scale > 0.0) || !std::isfinite(pixel_scale)) throw RangeError("pixel scale must be > 0");
  const double travel = static_cast<double>(frame_index) * speed * pixel_scale;
  return make_shift_plan(travel * direction.dx, travel * direction.dy, base.height(), base.width());
}

/// Frame `frame_index` of a constant motion: the base translated by
/// frame_index * speed * pixel_scale pixels along `direction`.
inline NoiseTensor shift_noise(const NoiseTensor& base, long frame_index, DirectionVector direction,
                               double speed, double pixel_scale) {
  return phase_shift(base, frame_shift_plan(base, frame_index, direction, speed, pixel_scale)).tensor;
}

/// Multiplies each bin by exp(j theta), theta ~ U[-magnitude, magnitude]
/// drawn once per conjugate pair with theta(-k) = -theta(k). Self-conjugate
/// bins (DC and Nyquist) keep theta = 0.
inline ModulatedNoise perturb_random_detailed(const NoiseTensor& base, double magnitude, std::uint64_t rng_seed) {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) throw RangeError("phase magnitude must be >= 0");
  validate(base);
  const std::size_t h = base.height();
  const std::size_t w = base.width();
  std::vector<std::complex<double>> mult(h * w, 1.0);
  std::vector<double> theta(h * w, 0.0);
  std::mt19937_64 rng(rng_seed);
  for (std::size_t ky = 0; ky < h; ++ky) {
    for (std::size_t kx = 0; kx < w; ++kx) {
      const std::size_t self = ky * w + kx;
      const std::size_t partner = ((h - ky) % h) * w + (w - kx) % w;
      if (partner == self) continue;
      if (partner < self) {
        theta[self] = -theta[partner];
      } else {
        theta[self] = magnitude * (2.0 * uniform01(rng) - 1.0);
      }
      mult[self] = std::polar(1.0, theta[self]);
    }
  }
  return modulate_spectrum(base, [&](std::size_t ky, std::size_t kx) { return mult[ky * w + kx]; });
}

inline NoiseTensor perturb_random(const NoiseTensor& base, double magnitude, std::uint64_t rng_seed) {
  return perturb_random_detailed(base, magnitude, rng_seed).tensor;
}

/// How one frame's noise is derived from the base.
struct FrameNoisePlan {
  int frame = 0;
  Direction direction = Direction::kRandom;
  double speed = 0.0;
  bool random = false;
  ShiftPlan shift;            // used when !random
  double phase_magnitude = 0.0;  // used when random
  std::uint64_t phase_seed = 0;

  friend bool operator==(const FrameNoisePlan& a, const FrameNoisePlan& b) {
    return a.frame == b.frame && a.direction == b.direction && a.speed == b.speed && a.random == b.random &&
           a.shift.offset_x == b.shift.offset_x && a.shift.offset_y == b.shift.offset_y &&
           a.phase_magnitude == b.phase_magnitude && a.phase_seed == b.phase_seed;
  }
};

struct NoiseParams {
  double pixel_scale = 4.0;
  double sigma_phi = 0.3;
  std::uint64_t rng_seed = 0;
};

/// Frame 0 is the base. Frame k >= 1 is shifted by k * speed_k * pixel_scale
/// pixels along its direction, or for "random" gets phase noise of
/// magnitude sigma_phi * k with seed rng_seed ^ k.
inline std::vector<FrameNoisePlan> plan_noise_sequence(std::span<const BackgroundMotion> motions,
                                                       std::size_t height, std::size_t width,
                                                       const NoiseParams& params) {
  if (motions.empty()) throw RangeError("noise sequence needs at least one frame");
  if (!(params.pixel_scale > 0.0)) throw RangeError("pixel scale must be > 0");
  if (!(params.sigma_phi >= 0.0)) throw RangeError("sigma_phi must be >= 0");
  std::vector<FrameNoisePlan> plans;
  plans.reserve(motions.size());
  for (std::size_t k = 0; k < motions.size(); ++k) {
    FrameNoisePlan p;
    p.frame = static_cast<int>(k);
    p.direction = motions[k].direction;
    p.speed = motions[k].speed;
    if (!(p.speed >= 0.0 && p.speed <= 1.0)) throw RangeError("speed must be in [0, 1]");
    p.random = p.direction == Direction::kRandom;
    if (k > 0) {
      if (p.random) {
        p.phase_magnitude = params.sigma_phi * static_cast<double>(k);
        p.phase_seed = params.rng_seed ^ static_cast<std::uint64_t>(k);
      } else {
        const DirectionVector d = direction_multipliers(p.direction);
        const double travel = static_cast<double>(k) * p.speed * params.pixel_scale;
        p.shift = make_shift_plan(travel * d.dx, travel * d.dy, height, width);
      }
    }
    plans.push_back(p);
  }
  return plans;
}

inline NoiseTensor realize_frame_noise(const NoiseTensor& base, const FrameNoisePlan& plan) {
  if (plan.frame == 0) return base;
  if (plan.random) return perturb_random(base, plan.phase_magnitude, plan.phase_seed);
  return phase_shift(base, plan.shift).tensor;
}

inline std::vector<NoiseTensor> generate_noise_sequence(const NoiseTensor& base,
                                                        std::span<const BackgroundMotion> motions,
                                                        const NoiseParams& params) {
  validate(base);
  const auto plans = plan_noise_sequence(motions, base.height(), base.width(), params);
  std::vector<NoiseTensor> out;
  out.reserve(plans.size());
  for (const auto& p : plans) out.push_back(realize_frame_noise(base, p));
  return out;
}

inline std::vector<BackgroundMotion> background_motions(const DynamicSceneSyntax& dss) {
  std::vector<BackgroundMotion> m;
  m.reserve(dss.frames.size());
  for (const auto& f : dss.frames) m.push_back(f.background);
  return m;
}

/// Base noise from `params.rng_seed`, then one tensor per frame following
/// the scene's background motion.
inline std::vector<NoiseTensor> synthesize_noises(const DynamicSceneSyntax& dss, std::size_t height,
                                                  std::size_t width, std::size_t channels,
                                                  const NoiseParams& params) {
  const NoiseTensor base = gaussian_noise(height, width, channels, params.rng_seed);
  const auto motions = background_motions(dss);
  return generate_noise_sequence(base, motions, params);
}

/// Unnormalized 2-D DFT of one channel, row-major.
inline std::vector<std::complex<double>> channel_spectrum(const NoiseTensor& t, std::size_t channel) {
  Fft2d fft(t.height(), t.width());
  auto buf = fft.data();
  for (std::size_t y = 0; y < t.height(); ++y) {
    for (std::size_t x = 0; x < t.width(); ++x) buf[y * t.width() + x] = t.at(y, x, channel);
  }
  fft.forward();
  return {buf.begin(), buf.end()};
}

}  // namespace flowzero
