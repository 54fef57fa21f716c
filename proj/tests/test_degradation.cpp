#include <doctest.h>

#include <complex>

#include "coldmri/degradation.hpp"
#include "coldmri/phantom.hpp"

using coldmri::Complex;
using coldmri::ComplexImage;
using coldmri::DegradationOp;
using coldmri::KSpace;
using coldmri::MaskFamily;
using coldmri::ScheduleKind;
using coldmri::ScheduleSpec;

namespace {

MaskFamily test_family() {
  return coldmri::build_mask_family(ScheduleSpec(ScheduleKind::kLog, 12, 0.2), 24,
                                    2.0 / 24, 5);
}

Complex inner(const ComplexImage& a, const ComplexImage& b) {
  Complex acc{0.0, 0.0};
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) acc += da[i] * std::conj(db[i]);
  return acc;
}

}  // namespace

TEST_CASE("apply_mask zeroes exactly the unselected columns") {
  const MaskFamily family = test_family();
  const ComplexImage x = coldmri::make_phantom(16, 24, 1);
  const KSpace k = coldmri::fft2_centered(x);
  const KSpace masked = coldmri::apply_mask(k, family.mask(6));
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 24; ++c) {
      if (family.mask(6).is_selected(c)) {
        CHECK(masked(r, c) == k(r, c));
      } else {
        CHECK(masked(r, c) == Complex{0.0, 0.0});
      }
    }
  }
  CHECK_THROWS_AS(coldmri::apply_mask(KSpace(4, 8), family.mask(0)),
                  coldmri::ShapeError);
}

TEST_CASE("measure composes mask after transform") {
  const MaskFamily family = test_family();
  const ComplexImage x = coldmri::make_phantom(16, 24, 2);
  const KSpace a = coldmri::measure(x, family.mask(4));
  const KSpace b = coldmri::apply_mask(coldmri::fft2_centered(x), family.mask(4));
  CHECK(coldmri::rel_l2_error(a, b) == 0.0);
}

TEST_CASE("degradation at step zero is the identity") {
  const MaskFamily family = test_family();
  const DegradationOp op(family);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ComplexImage x = coldmri::make_phantom(16, 24, seed);
    CHECK(coldmri::rel_l2_error(op.degrade(x, 0), x) < 1e-12);
  }
}

TEST_CASE("degradation is idempotent per step") {
  const MaskFamily family = test_family();
  const DegradationOp op(family);
  const ComplexImage x = coldmri::make_phantom(16, 24, 3);
  for (int t : {1, 5, 12}) {
    const ComplexImage once = op.degrade(x, t);
    CHECK(coldmri::rel_l2_error(op.degrade(once, t), once) < 1e-12);
  }
}

TEST_CASE("composition collapses to the heavier step") {
  const MaskFamily family = test_family();
  const DegradationOp op(family);
  const ComplexImage x = coldmri::make_phantom(16, 24, 4);
  for (auto [s, t] : {std::pair{2, 9}, {9, 2}, {7, 7}}) {
    const ComplexImage lhs = op.degrade(op.degrade(x, s), t);
    const ComplexImage rhs = op.degrade(x, std::max(s, t));
    CHECK(coldmri::rel_l2_error(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("degradation is self-adjoint and never increases energy") {
  const MaskFamily family = test_family();
  const DegradationOp op(family);
  const ComplexImage x = coldmri::make_phantom(16, 24, 5);
  const ComplexImage y = coldmri::make_phantom(16, 24, 6);
  for (int t : {1, 6, 12}) {
    const Complex lhs = inner(op.degrade(x, t), y);
    const Complex rhs = inner(x, op.degrade(y, t));
    CHECK(std::abs(lhs - rhs) < 1e-12 * x.norm() * y.norm());
    CHECK(op.degrade(x, t).norm() <= x.norm() * (1.0 + 1e-12));
  }
}

TEST_CASE("degradation validates the step index") {
  const MaskFamily family = test_family();
  const DegradationOp op(family);
  const ComplexImage x = coldmri::make_phantom(16, 24, 7);
  CHECK_THROWS_AS(op.degrade(x, -1), coldmri::IndexError);
  CHECK_THROWS_AS(op.degrade(x, 13), coldmri::IndexError);
}
