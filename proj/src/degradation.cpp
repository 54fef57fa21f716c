#include "coldmri/degradation.hpp"

#include <string>

namespace coldmri {

KSpace apply_mask(const KSpace& k, const ColumnMask& mask) {
  if (k.width() != mask.width()) {
    throw ShapeError("k-space width " + std::to_string(k.width()) +
                     " does not match mask width " + std::to_string(mask.width()));
  }
  KSpace out(k.height(), k.width());
  for (int r = 0; r < k.height(); ++r) {
    for (int c = 0; c < k.width(); ++c) {
      if (mask.is_selected(c)) out(r, c) = k(r, c);
    }
  }
  return out;
}

KSpace measure(const ComplexImage& x, const ColumnMask& mask) {
  return apply_mask(fft2_centered(x), mask);
}

ComplexImage degrade_with_mask(const ComplexImage& x, const ColumnMask& mask) {
  return ifft2_centered(measure(x, mask));
}

ComplexImage DegradationOp::degrade(const ComplexImage& x, int t) const {
  return degrade_with_mask(x, family_->mask(t));
}

}  // namespace coldmri
