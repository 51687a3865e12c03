// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>

#include <fftw3.h>

namespace flowzero {

namespace detail {
// FFTW's planner is not thread-safe; plan execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}
}  // namespace detail

/// 2-D complex DFT of a fixed H x W shape with its own buffers.
/// Forward is unnormalized; inverse divides by H*W.
class Fft2d {
 public:
  Fft2d(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    const std::size_t n = rows * cols;
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!buf_) throw std::bad_alloc();
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf_, buf_, FFTW_FORWARD,
                            FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf_, buf_, FFTW_BACKWARD,
                            FFTW_ESTIMATE);
  }

  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  ~Fft2d() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(buf_);
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return rows_ * cols_; }

  /// Working buffer, row-major. Transforms run in place on it.
  std::span<std::complex<double>> data() {
    return {reinterpret_cast<std::complex<double>*>(buf_), size()};
  }

  void forward() { fftw_execute(fwd_); }

  void inverse() {
    fftw_execute(inv_);
    const double scale = 1.0 / static_cast<double>(size());
    for (auto& v : data()) v *= scale;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

}  // namespace flowzero
