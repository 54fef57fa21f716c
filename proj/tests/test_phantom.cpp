#include <doctest.h>

#include <cmath>

#include "coldmri/fft.hpp"
#include "coldmri/phantom.hpp"

using coldmri::ComplexImage;

TEST_CASE("phantoms are deterministic in the seed") {
  const ComplexImage a = coldmri::make_phantom(48, 48, 7);
  const ComplexImage b = coldmri::make_phantom(48, 48, 7);
  REQUIRE(a.same_shape_as(b));
  for (int r = 0; r < 48; ++r)
    for (int c = 0; c < 48; ++c) REQUIRE(a(r, c) == b(r, c));

  const ComplexImage c = coldmri::make_phantom(48, 48, 8);
  CHECK(coldmri::rel_l2_error(c, a) > 1e-3);
}

TEST_CASE("phantom magnitudes are finite and within the unit range") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const ComplexImage x = coldmri::make_phantom(32, 40, seed);
    CHECK(x.all_finite());
    double peak = 0.0;
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 40; ++c) {
        peak = std::max(peak, std::abs(x(r, c)));
      }
    }
    CHECK(peak <= 1.0 + 1e-12);
    CHECK(peak > 0.1);  // the object is not degenerate
  }
}

TEST_CASE("phantoms carry a non-trivial phase map") {
  const ComplexImage x = coldmri::make_phantom(64, 64, 3);
  double max_abs_imag = 0.0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c)
      max_abs_imag = std::max(max_abs_imag, std::abs(x(r, c).imag()));
  CHECK(max_abs_imag > 1e-3);
}

TEST_CASE("phantom energy is spread across k-space columns") {
  // Column-undersampling experiments are only meaningful when the object has
  // energy beyond the DC column.
  const ComplexImage x = coldmri::make_phantom(64, 64, 11);
  const coldmri::KSpace k = coldmri::fft2_centered(x);
  double dc_col = 0.0, rest = 0.0;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      const double e = std::norm(k(r, c));
      if (c == 32) dc_col += e; else rest += e;
    }
  }
  CHECK(rest > 0.05 * dc_col);
}

TEST_CASE("phantom sets use distinct per-slice seeds") {
  const auto set = coldmri::make_phantom_set(32, 32, 4, 100);
  REQUIRE(set.size() == 4);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const ComplexImage direct = coldmri::make_phantom(32, 32, 100 + i);
    CHECK(coldmri::rel_l2_error(set[i], direct) == 0.0);
    for (std::size_t j = i + 1; j < set.size(); ++j) {
      CHECK(coldmri::rel_l2_error(set[i], set[j]) > 1e-3);
    }
  }
}

TEST_CASE("phantom rejects invalid shapes") {
  CHECK_THROWS_AS(coldmri::make_phantom(0, 32, 1), coldmri::ShapeError);
  CHECK_THROWS_AS(coldmri::make_phantom(32, -1, 1), coldmri::ShapeError);
}
