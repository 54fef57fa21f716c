#pragma once

#include <span>

#include "coldmri/image.hpp"

namespace coldmri {

/// PSNR between magnitude images with peak = max |truth|, capped at 99.0
/// (also the value returned for an exact match).  Throws InvalidInputError
/// when the truth is identically zero.
double psnr(const ComplexImage& recon, const ComplexImage& truth);

/// Mean SSIM between magnitude images: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, population covariances, averaged over the region
/// where the window fits entirely.  Requires both dimensions >= 11.
double ssim(const ComplexImage& recon, const ComplexImage& truth);

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
  int n = 0;
};

Aggregate aggregate(std::span<const double> values);

}  // namespace coldmri
