#pragma once

#include "coldmri/image.hpp"

namespace coldmri {

/// Centered unitary 2-D DFT: fftshift(FFT(ifftshift(x))) / sqrt(H*W).
/// The DC coefficient lands at (H/2, W/2) (integer division).
KSpace fft2_centered(const ComplexImage& img);

/// Inverse of fft2_centered: ifftshift o scaled inverse FFT o fftshift.
ComplexImage ifft2_centered(const KSpace& k);

}  // namespace coldmri
