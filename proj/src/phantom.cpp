#include "coldmri/phantom.hpp"

#include <cmath>

#include "coldmri/rng.hpp"

namespace coldmri {
namespace {

struct Ellipse {
  double cx, cy;      // centre in [-1, 1] coordinates
  double a, b;        // semi-axes
  double cos_t, sin_t;
  double intensity;
};

bool inside(const Ellipse& e, double x, double y) {
  const double dx = x - e.cx;
  const double dy = y - e.cy;
  const double u = dx * e.cos_t + dy * e.sin_t;
  const double v = -dx * e.sin_t + dy * e.cos_t;
  return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0;
}

}  // namespace

ComplexImage make_phantom(int height, int width, std::uint64_t seed) {
  if (height <= 0 || width <= 0) {
    throw ShapeError("phantom dimensions must be positive");
  }
  Rng rng(seed);

  std::vector<Ellipse> ellipses;
  // Outer shell, slightly randomised, bright.
  {
    const double angle = rng.uniform(-0.2, 0.2);
    ellipses.push_back({rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                        rng.uniform(0.75, 0.9), rng.uniform(0.8, 0.95),
                        std::cos(angle), std::sin(angle), rng.uniform(0.6, 0.9)});
  }
  const int extra = 5 + static_cast<int>(rng.next_below(6));
  for (int i = 0; i < extra; ++i) {
    const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double mag = rng.uniform(0.15, 0.7);
    ellipses.push_back({rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55),
                        rng.uniform(0.08, 0.45), rng.uniform(0.08, 0.45),
                        std::cos(angle), std::sin(angle),
                        rng.uniform01() < 0.35 ? -mag : mag});
  }

  // Smooth linear phase ramp so the slice is genuinely complex.
  const double p0 = rng.uniform(-0.6, 0.6);
  const double px = rng.uniform(-0.8, 0.8);
  const double py = rng.uniform(-0.8, 0.8);

  ComplexImage img(height, width);
  for (int r = 0; r < height; ++r) {
    const double y = height > 1 ? 2.0 * r / (height - 1) - 1.0 : 0.0;
    for (int c = 0; c < width; ++c) {
      const double x = width > 1 ? 2.0 * c / (width - 1) - 1.0 : 0.0;
      double v = 0.0;
      for (const Ellipse& e : ellipses) {
        if (inside(e, x, y)) v += e.intensity;
      }
      v = std::min(1.0, std::max(0.0, v));
      const double phase = p0 + px * x + py * y;
      img(r, c) = Complex{v * std::cos(phase), v * std::sin(phase)};
    }
  }
  return img;
}

std::vector<ComplexImage> make_phantom_set(int height, int width, int count,
                                           std::uint64_t seed) {
  if (count < 0) throw ConfigError("phantom count must be >= 0");
  std::vector<ComplexImage> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(make_phantom(height, width, seed + static_cast<std::uint64_t>(i)));
  }
  return out;
}

}  // namespace coldmri
