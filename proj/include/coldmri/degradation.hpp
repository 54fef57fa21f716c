#pragma once

#include "coldmri/fft.hpp"
#include "coldmri/image.hpp"
#include "coldmri/masks.hpp"

namespace coldmri {

/// Zeroes every k-space column the mask does not select.
KSpace apply_mask(const KSpace& k, const ColumnMask& mask);

/// Simulated acquisition: mask(fft(x)).  The result keeps full H x W extent
/// with zeros in unmeasured columns.
KSpace measure(const ComplexImage& x, const ColumnMask& mask);

/// ifft(mask(fft(x))): the image seen through an undersampled acquisition.
ComplexImage degrade_with_mask(const ComplexImage& x, const ColumnMask& mask);

/// Degradation operator D(x, t) driven by a nested mask family: the identity
/// at t = 0 and progressively heavier column removal toward t = T.
class DegradationOp {
 public:
  explicit DegradationOp(const MaskFamily& family) : family_(&family) {}

  const MaskFamily& family() const { return *family_; }
  int total_steps() const { return family_->total_steps(); }

  ComplexImage degrade(const ComplexImage& x, int t) const;

 private:
  const MaskFamily* family_;
};

}  // namespace coldmri
