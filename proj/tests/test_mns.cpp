// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "flowzero/mns.hpp"
#include "oracles.hpp"

namespace fz = flowzero;

namespace {

std::vector<double> plane(const fz::NoiseTensor& t, std::size_t c = 0) {
  std::vector<double> out;
  for (std::size_t y = 0; y < t.height(); ++y)
    for (std::size_t x = 0; x < t.width(); ++x) out.push_back(t.at(y, x, c));
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const fz::NoiseTensor& a, const fz::NoiseTensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double channel_norm(const fz::NoiseTensor& t, std::size_t c) {
  long double s = 0.0L;
  for (std::size_t y = 0; y < t.height(); ++y)
    for (std::size_t x = 0; x < t.width(); ++x) s += static_cast<long double>(t.at(y, x, c)) * t.at(y, x, c);
  return static_cast<double>(std::sqrt(s));
}

double channel_mean(const fz::NoiseTensor& t, std::size_t c) {
  long double s = 0.0L;
  for (std::size_t y = 0; y < t.height(); ++y)
    for (std::size_t x = 0; x < t.width(); ++x) s += t.at(y, x, c);
  return static_cast<double>(s / static_cast<long double>(t.height() * t.width()));
}

/// Largest relative change of any bin amplitude.
double amplitude_drift(const fz::NoiseTensor& a, const fz::NoiseTensor& b) {
  double worst = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    const auto fa = fz::channel_spectrum(a, c);
    const auto fb = fz::channel_spectrum(b, c);
    for (std::size_t i = 0; i < fa.size(); ++i) {
      const double ref = std::abs(fa[i]);
      worst = std::max(worst, std::abs(std::abs(fb[i]) - ref) / ref);
    }
  }
  return worst;
}

fz::NoiseTensor integer_pattern(std::size_t h, std::size_t w) {
  fz::NoiseTensor t(h, w, 1);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) t.at(y, x, 0) = static_cast<double>((7 * y + 3 * x * x + y * x) % 11);
  return t;
}

}  // namespace

TEST(DirectionMultipliers, Table) {
  auto left = fz::direction_multipliers(fz::Direction::kLeft);
  EXPECT_EQ(left.dx, -1.0);
  EXPECT_EQ(left.dy, 0.0);
  auto down = fz::direction_multipliers(fz::Direction::kDown);
  EXPECT_EQ(down.dx, 0.0);
  EXPECT_EQ(down.dy, 1.0);
  auto ru = fz::direction_multipliers(fz::Direction::kRightUp);
  EXPECT_DOUBLE_EQ(ru.dx, std::sqrt(2.0) / 2.0);
  EXPECT_DOUBLE_EQ(ru.dy, -std::sqrt(2.0) / 2.0);
  for (auto d : fz::kAllDirections) {
    if (d == fz::Direction::kRandom) continue;
    const auto v = fz::direction_multipliers(d);
    EXPECT_NEAR(v.dx * v.dx + v.dy * v.dy, 1.0, 1e-15);
  }
  EXPECT_THROW(fz::direction_multipliers(fz::Direction::kRandom), fz::RandomDirection);
}

TEST(ShiftNoise, EightByEightRollRight) {
  const auto base = integer_pattern(8, 8);
  const auto out = fz::shift_noise(base, 1, fz::direction_multipliers(fz::Direction::kRight), 1.0, 2.0);
  EXPECT_LT(max_abs_diff(plane(out), oracle::roll(plane(base), 8, 8, 0, 2)), 1e-6);
}

TEST(ShiftNoise, ZeroSpeedIsIdentity) {
  const auto base = fz::gaussian_noise(32, 32, 4, 3);
  for (auto d : {fz::Direction::kLeft, fz::Direction::kRightDown}) {
    const auto out = fz::shift_noise(base, 5, fz::direction_multipliers(d), 0.0, 4.0);
    EXPECT_LT(max_abs_diff(out, base), 1e-9);
  }
}

TEST(ShiftNoise, IntegerLatticeMatchesCircularRoll) {
  const std::vector<long> offsets = {0, 1, -1, 2, -2, 4, -4};
  for (std::size_t n : {16u, 64u}) {
    const auto base = fz::gaussian_noise(n, n, 1, 17);
    const auto ref = plane(base);
    for (long oy : offsets) {
      for (long ox : offsets) {
        const auto out = fz::phase_shift(base, fz::make_shift_plan(ox, oy, n, n)).tensor;
        ASSERT_LT(max_abs_diff(plane(out), oracle::roll(ref, n, n, oy, ox)), 1e-6) << n << " " << ox << "," << oy;
      }
    }
  }
}

TEST(ShiftNoise, OddAndRectangularGrids) {
  const auto base = fz::gaussian_noise(15, 22, 2, 8);
  for (long ox : {-7L, 3L, 11L}) {
    for (long oy : {-2L, 5L}) {
      const auto out = fz::phase_shift(base, fz::make_shift_plan(ox, oy, 15, 22)).tensor;
      for (std::size_t c = 0; c < 2; ++c) {
        ASSERT_LT(max_abs_diff(plane(out, c), oracle::roll(plane(base, c), 15, 22, oy, ox)), 1e-6);
      }
    }
  }
}

TEST(ShiftNoise, WrapsAroundThePeriod) {
  const auto base = fz::gaussian_noise(16, 16, 1, 2);
  const auto a = fz::phase_shift(base, fz::make_shift_plan(3, 0, 16, 16)).tensor;
  const auto b = fz::phase_shift(base, fz::make_shift_plan(3 + 32, -16, 16, 16)).tensor;
  EXPECT_LT(max_abs_diff(a, b), 1e-9);
  EXPECT_DOUBLE_EQ(fz::wrap_offset(35.0, 16), 3.0);
  EXPECT_DOUBLE_EQ(fz::wrap_offset(-9.0, 16), 7.0);
}

TEST(ShiftNoise, LeftMovesCorrelationPeakLeft) {
  const auto base = fz::gaussian_noise(32, 32, 1, 21);
  const auto out = fz::shift_noise(base, 3, fz::direction_multipliers(fz::Direction::kLeft), 1.0, 1.0);
  const auto a = plane(base);
  const auto b = plane(out);
  long best_dx = 0, best_dy = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (long dy = -8; dy <= 8; ++dy) {
    for (long dx = -8; dx <= 8; ++dx) {
      const auto rolled = oracle::roll(a, 32, 32, dy, dx);
      double s = 0.0;
      for (std::size_t i = 0; i < b.size(); ++i) s += rolled[i] * b[i];
      if (s > best) {
        best = s;
        best_dx = dx;
        best_dy = dy;
      }
    }
  }
  EXPECT_EQ(best_dx, -3);
  EXPECT_EQ(best_dy, 0);
}

TEST(ShiftNoise, ConservesNormAmplitudeAndMean) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto base = fz::gaussian_noise(64, 64, 4, rng());
    const auto dir = fz::direction_multipliers(fz::kAllDirections[static_cast<std::size_t>(trial) % 8]);
    const auto plan = fz::frame_shift_plan(base, 1 + trial % 7, dir, 0.1 * (trial + 1) - 0.05, 4.0);
    const auto m = fz::phase_shift(base, plan);
    EXPECT_LT(m.max_imag_residue, 1e-9);
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(channel_norm(m.tensor, c) / channel_norm(base, c), 1.0, 1e-9);
      EXPECT_EQ(m.dc_after[c].real(), m.dc_before[c].real());
      EXPECT_EQ(m.dc_after[c].imag(), m.dc_before[c].imag());
      EXPECT_NEAR(channel_mean(m.tensor, c), channel_mean(base, c), 1e-12);
    }
    EXPECT_LT(amplitude_drift(base, m.tensor), 1e-9);
  }
}

TEST(ShiftNoise, CompositionIntegerOffsets) {
  const auto base = fz::gaussian_noise(64, 64, 1, 5);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = static_cast<double>(static_cast<int>(rng() % 41) - 20);
    const double b = static_cast<double>(static_cast<int>(rng() % 41) - 20);
    const double c = static_cast<double>(static_cast<int>(rng() % 41) - 20);
    const double d = static_cast<double>(static_cast<int>(rng() % 41) - 20);
    const auto two = fz::phase_shift(fz::phase_shift(base, fz::make_shift_plan(a, b, 64, 64)).tensor,
                                     fz::make_shift_plan(c, d, 64, 64))
                         .tensor;
    const auto one = fz::phase_shift(base, fz::make_shift_plan(a + c, b + d, 64, 64)).tensor;
    ASSERT_LT(max_abs_diff(two, one), 1e-6);
  }
}

TEST(ShiftNoise, CompositionFractionalOffsetsOddGrid) {
  const auto base = fz::gaussian_noise(63, 65, 2, 5);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = 10.0 * (fz::uniform01(rng) - 0.5), b = 10.0 * (fz::uniform01(rng) - 0.5);
    const double c = 10.0 * (fz::uniform01(rng) - 0.5), d = 10.0 * (fz::uniform01(rng) - 0.5);
    const auto two = fz::phase_shift(fz::phase_shift(base, fz::make_shift_plan(a, b, 63, 65)).tensor,
                                     fz::make_shift_plan(c, d, 63, 65))
                         .tensor;
    const auto one = fz::phase_shift(base, fz::make_shift_plan(a + c, b + d, 63, 65)).tensor;
    ASSERT_LT(max_abs_diff(two, one), 1e-6);
  }
}

TEST(ShiftNoise, CompositionFractionalOffsetsEvenGrid) {
  // Pairs whose rounded parts add up, the case where the Nyquist sign is exact.
  const auto base = fz::gaussian_noise(64, 64, 1, 5);
  const std::vector<std::pair<double, double>> pairs = {{0.3, 0.1}, {1.2, 2.25}, {-0.4, 3.3}, {2.5, 0.25}};
  for (const auto& [a, c] : pairs) {
    const auto two = fz::phase_shift(fz::phase_shift(base, fz::make_shift_plan(a, -c, 64, 64)).tensor,
                                     fz::make_shift_plan(c, -a, 64, 64))
                         .tensor;
    const auto one = fz::phase_shift(base, fz::make_shift_plan(a + c, -(a + c), 64, 64)).tensor;
    ASSERT_LT(max_abs_diff(two, one), 1e-6) << a << " + " << c;
  }
}

TEST(ShiftNoise, FractionalShiftStaysReal) {
  const auto base = fz::gaussian_noise(64, 64, 4, 12);
  const auto m = fz::phase_shift(base, fz::make_shift_plan(2.37, -5.81, 64, 64));
  EXPECT_LT(m.max_imag_residue, 1e-9);
  EXPECT_LT(amplitude_drift(base, m.tensor), 1e-9);
}

TEST(ShiftNoise, RejectsNonFinite) {
  auto base = fz::gaussian_noise(8, 8, 1, 1);
  base.at(3, 3, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fz::shift_noise(base, 1, {1.0, 0.0}, 0.5, 4.0), fz::NonFinite);
  EXPECT_THROW(fz::perturb_random(base, 0.3, 1), fz::NonFinite);
}

TEST(PerturbRandom, ZeroMagnitudeIsIdentity) {
  const auto base = fz::gaussian_noise(32, 32, 2, 4);
  EXPECT_LT(max_abs_diff(fz::perturb_random(base, 0.0, 77), base), 1e-9);
}

TEST(PerturbRandom, RealAmplitudePreservingDeterministic) {
  const auto base = fz::gaussian_noise(64, 64, 4, 4);
  for (std::uint64_t seed : {0ULL, 1ULL, 123456789ULL}) {
    const auto m = fz::perturb_random_detailed(base, 0.3, seed);
    EXPECT_LT(m.max_imag_residue, 1e-9);
    EXPECT_LT(amplitude_drift(base, m.tensor), 1e-9);
    EXPECT_GT(max_abs_diff(m.tensor, base), 1e-3);
    EXPECT_EQ(fz::perturb_random(base, 0.3, seed), m.tensor);
  }
  EXPECT_FALSE(fz::perturb_random(base, 0.3, 1) == fz::perturb_random(base, 0.3, 2));
}

TEST(PerturbRandom, OddGridStaysReal) {
  const auto base = fz::gaussian_noise(9, 13, 1, 4);
  EXPECT_LT(fz::perturb_random_detailed(base, 1.0, 3).max_imag_residue, 1e-9);
}

TEST(NoiseSequence, ConstantRightMotion) {
  const auto base = fz::gaussian_noise(16, 16, 1, 31);
  const std::vector<fz::BackgroundMotion> motions(8, {fz::Direction::kRight, 0.5});
  const auto seq = fz::generate_noise_sequence(base, motions, {4.0, 0.3, 0});
  ASSERT_EQ(seq.size(), 8u);
  EXPECT_EQ(seq[0], base);
  for (std::size_t i = 0; i < 8; ++i) {
    const long offset = 2 * static_cast<long>(i);
    EXPECT_LT(max_abs_diff(plane(seq[i]), oracle::roll(plane(base), 16, 16, 0, offset)), 1e-6) << i;
  }
}

TEST(NoiseSequence, SingleFrameAndZeroSpeed) {
  const auto base = fz::gaussian_noise(16, 16, 2, 1);
  const std::vector<fz::BackgroundMotion> one = {{fz::Direction::kUp, 1.0}};
  const auto seq1 = fz::generate_noise_sequence(base, one, {});
  ASSERT_EQ(seq1.size(), 1u);
  EXPECT_EQ(seq1[0], base);

  const std::vector<fz::BackgroundMotion> still(6, {fz::Direction::kLeftDown, 0.0});
  for (const auto& t : fz::generate_noise_sequence(base, still, {})) EXPECT_LT(max_abs_diff(t, base), 1e-9);
}

TEST(NoiseSequence, RandomScheduleAndDeterminism) {
  const std::vector<fz::BackgroundMotion> motions(4, {fz::Direction::kRandom, 0.2});
  const fz::NoiseParams params{4.0, 0.3, 42};
  const auto plans = fz::plan_noise_sequence(motions, 16, 16, params);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_TRUE(plans[k].random);
    EXPECT_DOUBLE_EQ(plans[k].phase_magnitude, k == 0 ? 0.0 : 0.3 * static_cast<double>(k));
    if (k > 0) {
      EXPECT_EQ(plans[k].phase_seed, 42ULL ^ k);
    }
  }
  const auto base = fz::gaussian_noise(16, 16, 2, 42);
  EXPECT_EQ(fz::generate_noise_sequence(base, motions, params), fz::generate_noise_sequence(base, motions, params));
}

TEST(GaussianNoise, DeterministicWithUnitMoments) {
  const auto a = fz::gaussian_noise(64, 64, 4, 9);
  EXPECT_EQ(a, fz::gaussian_noise(64, 64, 4, 9));
  EXPECT_FALSE(a == fz::gaussian_noise(64, 64, 4, 10));
  double s = 0.0, s2 = 0.0;
  for (double v : a.data()) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(a.size());
  EXPECT_NEAR(s / n, 0.0, 0.05);
  EXPECT_NEAR(s2 / n, 1.0, 0.05);
}
