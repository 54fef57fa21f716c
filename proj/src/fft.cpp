#include "coldmri/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <unordered_map>
#include <vector>

namespace coldmri {
namespace {

struct PlanKey {
  int h;
  int w;
  int sign;
  bool operator==(const PlanKey&) const = default;
};

struct PlanKeyHash {
  std::size_t operator()(const PlanKey& k) const {
    std::size_t h = std::hash<int>{}(k.h);
    h = h * 1000003u ^ std::hash<int>{}(k.w);
    h = h * 1000003u ^ std::hash<int>{}(k.sign);
    return h;
  }
};

// fftw_execute_dft is thread-safe; plan creation is not, so creation is
// serialised and plans are reused for repeated shapes.
class PlanCache {
 public:
  fftw_plan get(int h, int w, int sign) {
    const PlanKey key{h, w, sign};
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<fftw_complex> in(static_cast<std::size_t>(h) * w);
    std::vector<fftw_complex> out(in.size());
    fftw_plan plan = fftw_plan_dft_2d(h, w, in.data(), out.data(), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::unordered_map<PlanKey, fftw_plan, PlanKeyHash> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

// ifftshift: moves the centered origin (H/2, W/2) to index (0, 0).
std::vector<Complex> ifftshift2(std::span<const Complex> in, int h, int w) {
  std::vector<Complex> out(in.size());
  const int rh = h / 2;
  const int rw = w / 2;
  for (int r = 0; r < h; ++r) {
    const int sr = (r + rh) % h;
    for (int c = 0; c < w; ++c) {
      out[static_cast<std::size_t>(r) * w + c] =
          in[static_cast<std::size_t>(sr) * w + (c + rw) % w];
    }
  }
  return out;
}

// fftshift with scaling: moves index (0, 0) back to the center (H/2, W/2).
void fftshift2_scaled(std::span<const Complex> in, int h, int w, double scale,
                      std::span<Complex> out) {
  const int rh = h - h / 2;
  const int rw = w - w / 2;
  for (int r = 0; r < h; ++r) {
    const int sr = (r + rh) % h;
    for (int c = 0; c < w; ++c) {
      out[static_cast<std::size_t>(r) * w + c] =
          scale * in[static_cast<std::size_t>(sr) * w + (c + rw) % w];
    }
  }
}

std::vector<Complex> run_plan(std::vector<Complex> in, int h, int w, int sign) {
  fftw_plan plan = plan_cache().get(h, w, sign);
  std::vector<Complex> out(in.size());
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

}  // namespace

KSpace fft2_centered(const ComplexImage& img) {
  require_finite(img, "fft2_centered");
  const int h = img.height();
  const int w = img.width();
  std::vector<Complex> shifted = ifftshift2(img.data(), h, w);
  std::vector<Complex> freq = run_plan(std::move(shifted), h, w, FFTW_FORWARD);
  KSpace out(h, w);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h) * w);
  fftshift2_scaled(freq, h, w, scale, out.data());
  return out;
}

ComplexImage ifft2_centered(const KSpace& k) {
  require_finite(k, "ifft2_centered");
  const int h = k.height();
  const int w = k.width();
  std::vector<Complex> shifted = ifftshift2(k.data(), h, w);
  std::vector<Complex> spatial = run_plan(std::move(shifted), h, w, FFTW_BACKWARD);
  ComplexImage out(h, w);
  // FFTW's backward transform is unnormalised; 1/sqrt(HW) makes the pair unitary.
  const double scale = 1.0 / std::sqrt(static_cast<double>(h) * w);
  fftshift2_scaled(spatial, h, w, scale, out.data());
  return out;
}

}  // namespace coldmri
