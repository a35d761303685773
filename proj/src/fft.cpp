#include "fcdm/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "fcdm/error.hpp"

namespace fcdm::fft {
namespace {

enum class Kind { r2c, c2r, forward, backward };

// FFTW planning is not thread-safe; execution with the new-array interface
// is. Plans are created unaligned so any std::vector buffer can be used and
// the codelet choice does not depend on buffer alignment.
fftw_plan plan_for(Kind kind, std::size_t n) {
  static std::mutex mutex;
  static std::map<std::pair<Kind, std::size_t>, fftw_plan> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(kind, n);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  const int len = static_cast<int>(n);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::vector<double> real(n);
  std::vector<fftw_complex> cplx(n);
  fftw_plan plan = nullptr;
  switch (kind) {
    case Kind::r2c:
      plan = fftw_plan_dft_r2c_1d(len, real.data(), cplx.data(), flags);
      break;
    case Kind::c2r:
      plan = fftw_plan_dft_c2r_1d(len, cplx.data(), real.data(), flags);
      break;
    case Kind::forward:
    case Kind::backward: {
      std::vector<fftw_complex> out(n);
      plan = fftw_plan_dft_1d(len, cplx.data(), out.data(),
                              kind == Kind::forward ? FFTW_FORWARD : FFTW_BACKWARD, flags);
      break;
    }
  }
  if (plan == nullptr) throw NumericalError("FFTW failed to create a plan of length " + std::to_string(n));
  cache.emplace(key, plan);
  return plan;
}

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

void rfft(std::span<const double> in, std::span<Complex> out) {
  const std::size_t n = in.size();
  if (n == 0 || out.size() != half_bins(n)) {
    throw ContractViolation("rfft: output needs n/2+1 bins");
  }
  std::vector<double> buf(in.begin(), in.end());
  fftw_execute_dft_r2c(plan_for(Kind::r2c, n), buf.data(), as_fftw(out.data()));
}

void irfft(std::span<const Complex> in, std::span<double> out) {
  const std::size_t n = out.size();
  if (n == 0 || in.size() != half_bins(n)) {
    throw ContractViolation("irfft: input needs n/2+1 bins");
  }
  // c2r destroys its input.
  std::vector<Complex> buf(in.begin(), in.end());
  buf[0].imag(0.0);
  if (n % 2 == 0) buf[n / 2].imag(0.0);
  fftw_execute_dft_c2r(plan_for(Kind::c2r, n), as_fftw(buf.data()), out.data());
  const double inv = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= inv;
}

void fft(std::span<Complex> data, bool inverse) {
  const std::size_t n = data.size();
  if (n == 0) throw ContractViolation("fft: empty input");
  std::vector<Complex> out(n);
  fftw_execute_dft(plan_for(inverse ? Kind::backward : Kind::forward, n), as_fftw(data.data()),
                   as_fftw(out.data()));
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = out[i] * inv;
  } else {
    std::copy(out.begin(), out.end(), data.begin());
  }
}

}  // namespace fcdm::fft
