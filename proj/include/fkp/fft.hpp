#pragma once

// Thin RAII layer over FFTW3. Forward transforms are unnormalized,
// backward transforms carry the 1/n factor.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace fkp {

using cplx = std::complex<double>;

namespace detail {

// The FFTW planner keeps global state.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using fftw_buffer = std::unique_ptr<T[], FftwFree>;

template <class T>
fftw_buffer<T> fftw_alloc(std::size_t count) {
  return fftw_buffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * count)));
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using plan_ptr = std::unique_ptr<fftw_plan_s, PlanDeleter>;

}  // namespace detail

/// Complex 1D transform of fixed length. Instances own scratch buffers and
/// are therefore not shareable across threads; use fft1d() for a
/// thread-local cache.
class Fft1D {
 public:
  explicit Fft1D(std::size_t n)
      : n_(n),
        in_(detail::fftw_alloc<fftw_complex>(n)),
        out_(detail::fftw_alloc<fftw_complex>(n)) {
    std::lock_guard lock(detail::planner_mutex());
    // FFTW_ESTIMATE keeps the chosen kernels identical from run to run.
    fwd_.reset(fftw_plan_dft_1d(static_cast<int>(n), in_.get(), out_.get(),
                                FFTW_FORWARD, FFTW_ESTIMATE));
    bwd_.reset(fftw_plan_dft_1d(static_cast<int>(n), in_.get(), out_.get(),
                                FFTW_BACKWARD, FFTW_ESTIMATE));
  }

  std::size_t size() const { return n_; }

  void forward(std::span<const cplx> in, std::span<cplx> out) {
    run(fwd_.get(), in, out, 1.0);
  }
  void backward(std::span<const cplx> in, std::span<cplx> out) {
    run(bwd_.get(), in, out, 1.0 / static_cast<double>(n_));
  }

 private:
  void run(fftw_plan p, std::span<const cplx> in, std::span<cplx> out,
           double scale) {
    auto* buf = reinterpret_cast<cplx*>(in_.get());
    std::copy(in.begin(), in.end(), buf);
    fftw_execute(p);
    const auto* res = reinterpret_cast<const cplx*>(out_.get());
    for (std::size_t j = 0; j < n_; ++j) out[j] = res[j] * scale;
  }

  std::size_t n_;
  detail::fftw_buffer<fftw_complex> in_;
  detail::fftw_buffer<fftw_complex> out_;
  detail::plan_ptr fwd_;
  detail::plan_ptr bwd_;
};

/// Real 2D transform on an ny-by-nx array stored row-major with x fastest.
/// The spectrum holds ny rows of nx/2+1 non-negative k_x modes.
class Fft2D {
 public:
  Fft2D(std::size_t ny, std::size_t nx)
      : ny_(ny),
        nx_(nx),
        nxh_(nx / 2 + 1),
        real_(detail::fftw_alloc<double>(ny * nx)),
        spec_(detail::fftw_alloc<fftw_complex>(ny * (nx / 2 + 1))) {
    std::lock_guard lock(detail::planner_mutex());
    fwd_.reset(fftw_plan_dft_r2c_2d(static_cast<int>(ny), static_cast<int>(nx),
                                    real_.get(), spec_.get(), FFTW_ESTIMATE));
    bwd_.reset(fftw_plan_dft_c2r_2d(static_cast<int>(ny), static_cast<int>(nx),
                                    spec_.get(), real_.get(), FFTW_ESTIMATE));
  }

  std::size_t ny() const { return ny_; }
  std::size_t nx() const { return nx_; }
  std::size_t spectral_width() const { return nxh_; }
  std::size_t spectral_size() const { return ny_ * nxh_; }

  void forward(std::span<const double> in, std::span<cplx> out) {
    std::copy(in.begin(), in.end(), real_.get());
    fftw_execute(fwd_.get());
    const auto* res = reinterpret_cast<const cplx*>(spec_.get());
    std::copy(res, res + spectral_size(), out.begin());
  }

  // c2r overwrites its input, so the spectrum is staged in the owned buffer.
  void backward(std::span<const cplx> in, std::span<double> out) {
    auto* buf = reinterpret_cast<cplx*>(spec_.get());
    std::copy(in.begin(), in.end(), buf);
    fftw_execute(bwd_.get());
    const double scale = 1.0 / static_cast<double>(nx_ * ny_);
    for (std::size_t j = 0; j < nx_ * ny_; ++j) out[j] = real_[j] * scale;
  }

 private:
  std::size_t ny_, nx_, nxh_;
  detail::fftw_buffer<double> real_;
  detail::fftw_buffer<fftw_complex> spec_;
  detail::plan_ptr fwd_;
  detail::plan_ptr bwd_;
};

inline Fft1D& fft1d(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<Fft1D>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Fft1D>(n);
  return *slot;
}

inline Fft2D& fft2d(std::size_t ny, std::size_t nx) {
  thread_local std::map<std::pair<std::size_t, std::size_t>,
                        std::unique_ptr<Fft2D>>
      cache;
  auto& slot = cache[{ny, nx}];
  if (!slot) slot = std::make_unique<Fft2D>(ny, nx);
  return *slot;
}

}  // namespace fkp
