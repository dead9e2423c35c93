#pragma once

// Thin RAII layer over FFTW for the two transforms the library needs:
// real-input DFTs (periodograms) and long linear convolutions (MA filters).

#include <algorithm>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "mlw/errors.hpp"

namespace mlw::fft {

namespace detail {

// FFTW's planner is not thread-safe; execution of distinct plans is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using Buffer = std::unique_ptr<T[], FftwFree>;

template <class T>
Buffer<T> alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * (n ? n : 1)));
  if (!p) throw std::bad_alloc();
  return Buffer<T>(p);
}

class Plan {
 public:
  explicit Plan(fftw_plan p) : p_(p) {
    if (!p_) throw NumericalFailure("FFTW failed to create a plan");
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p_);
  }
  void execute() const { fftw_execute(p_); }

 private:
  fftw_plan p_;
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace detail

/// X[k] = sum_{s=0}^{n-1} x[s] e^{-2 pi i k s / n}, k = 0..n/2.
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  auto in = detail::alloc<double>(n);
  auto out = detail::alloc<fftw_complex>(n / 2 + 1);
  std::unique_ptr<detail::Plan> plan;
  {
    std::lock_guard lock(detail::planner_mutex());
    plan = std::make_unique<detail::Plan>(fftw_plan_dft_r2c_1d(
        static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  }
  std::copy(x.begin(), x.end(), in.get());
  plan->execute();
  std::vector<std::complex<double>> r(n / 2 + 1);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = {out[k][0], out[k][1]};
  return r;
}

/// Valid part of the linear convolution of x with a filter c of length L:
///   y[k] = sum_{j=0}^{L-1} c[j] x[k + L - 1 - j],  k = 0..x.size() - L.
/// Computed by circular convolution of length >= x.size(), which leaves the
/// valid outputs free of wrap-around.
class ValidConvolver {
 public:
  ValidConvolver(std::span<const double> c, std::size_t input_len)
      : len_(c.size()), input_len_(input_len) {
    if (len_ == 0 || input_len_ < len_) {
      throw InvalidInput("ValidConvolver: input shorter than the filter");
    }
    nfft_ = detail::next_pow2(input_len_);
    const std::size_t nc = nfft_ / 2 + 1;
    real_ = detail::alloc<double>(nfft_);
    spec_ = detail::alloc<fftw_complex>(nc);
    {
      std::lock_guard lock(detail::planner_mutex());
      fwd_ = std::make_unique<detail::Plan>(fftw_plan_dft_r2c_1d(
          static_cast<int>(nfft_), real_.get(), spec_.get(), FFTW_ESTIMATE));
      bwd_ = std::make_unique<detail::Plan>(fftw_plan_dft_c2r_1d(
          static_cast<int>(nfft_), spec_.get(), real_.get(), FFTW_ESTIMATE));
    }
    std::fill(real_.get(), real_.get() + nfft_, 0.0);
    std::copy(c.begin(), c.end(), real_.get());
    fwd_->execute();
    filter_.resize(nc);
    for (std::size_t k = 0; k < nc; ++k) filter_[k] = {spec_[k][0], spec_[k][1]};
  }

  std::size_t output_len() const { return input_len_ - len_ + 1; }

  /// Not reentrant: one convolver per thread.
  std::vector<double> apply(std::span<const double> x) {
    if (x.size() != input_len_) throw InvalidInput("ValidConvolver: wrong input length");
    std::fill(real_.get(), real_.get() + nfft_, 0.0);
    std::copy(x.begin(), x.end(), real_.get());
    fwd_->execute();
    const double scale = 1.0 / static_cast<double>(nfft_);
    for (std::size_t k = 0; k < filter_.size(); ++k) {
      const std::complex<double> v = std::complex<double>(spec_[k][0], spec_[k][1]) * filter_[k];
      spec_[k][0] = v.real() * scale;
      spec_[k][1] = v.imag() * scale;
    }
    bwd_->execute();
    return std::vector<double>(real_.get() + (len_ - 1), real_.get() + input_len_);
  }

 private:
  std::size_t len_, input_len_, nfft_ = 0;
  detail::Buffer<double> real_;
  detail::Buffer<fftw_complex> spec_;
  std::unique_ptr<detail::Plan> fwd_, bwd_;
  std::vector<std::complex<double>> filter_;
};

/// Direct O(L * N) evaluation of the same valid convolution.
inline std::vector<double> convolve_valid_direct(std::span<const double> c,
                                                 std::span<const double> x) {
  const std::size_t len = c.size();
  if (len == 0 || x.size() < len) throw InvalidInput("convolve_valid_direct: bad lengths");
  std::vector<double> y(x.size() - len + 1, 0.0);
  for (std::size_t k = 0; k < y.size(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < len; ++j) s += c[j] * x[k + len - 1 - j];
    y[k] = s;
  }
  return y;
}

}  // namespace mlw::fft
