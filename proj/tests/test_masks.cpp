#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "coldmri/masks.hpp"

using coldmri::ColumnMask;
using coldmri::MaskFamily;
using coldmri::ScheduleKind;
using coldmri::ScheduleSpec;

namespace {

const ScheduleSpec kLin100(ScheduleKind::kLinear, 100, 0.01);
const ScheduleSpec kLog100(ScheduleKind::kLog, 100, 0.01);

int expected_columns(const ScheduleSpec& spec, int t, int width) {
  return static_cast<int>(
      std::max(1L, std::lround(coldmri::sampling_rate(spec, t) * width)));
}

}  // namespace

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(ScheduleSpec(ScheduleKind::kLinear, 0, 0.5), coldmri::ConfigError);
  CHECK_THROWS_AS(ScheduleSpec(ScheduleKind::kLog, 10, 0.0), coldmri::ConfigError);
  CHECK_THROWS_AS(ScheduleSpec(ScheduleKind::kLog, 10, 1.5), coldmri::ConfigError);
  CHECK_THROWS_AS(coldmri::sampling_rate(kLin100, -1), coldmri::IndexError);
  CHECK_THROWS_AS(coldmri::sampling_rate(kLin100, 101), coldmri::IndexError);
}

TEST_CASE("schedule endpoints are bit-exact") {
  for (double sr_min : {0.01, 0.013, 1.0 / 3.0, 0.999}) {
    for (auto kind : {ScheduleKind::kLinear, ScheduleKind::kLog}) {
      for (int T : {1, 7, 100, 1000}) {
        const ScheduleSpec spec(kind, T, sr_min);
        CHECK(coldmri::sampling_rate(spec, 0) == 1.0);
        CHECK(coldmri::sampling_rate(spec, T) == sr_min);
      }
    }
  }
}

TEST_CASE("schedules decrease monotonically and match their closed forms") {
  for (int t = 0; t <= 100; ++t) {
    if (t > 0) {
      CHECK(coldmri::sampling_rate(kLin100, t) < coldmri::sampling_rate(kLin100, t - 1));
      CHECK(coldmri::sampling_rate(kLog100, t) < coldmri::sampling_rate(kLog100, t - 1));
    }
    if (t > 0 && t < 100) {
      CHECK(coldmri::sampling_rate(kLin100, t) ==
            doctest::Approx(1.0 - 0.99 * t / 100.0).epsilon(1e-15));
      CHECK(coldmri::sampling_rate(kLog100, t) ==
            doctest::Approx(std::pow(0.01, t / 100.0)).epsilon(1e-15));
    }
  }
}

TEST_CASE("start-step location matches the pinned reference counts") {
  CHECK(coldmri::locate_start_step(1.0 / 8.0, kLin100) == 89);
  CHECK(coldmri::locate_start_step(1.0 / 8.0, kLog100) == 46);
  CHECK(coldmri::locate_start_step(1.0 / 16.0, kLin100) == 95);
  CHECK(coldmri::locate_start_step(1.0 / 16.0, kLog100) == 61);
}

TEST_CASE("start-step location edge cases") {
  CHECK(coldmri::locate_start_step(1.0, kLin100) == 0);
  CHECK(coldmri::locate_start_step(1.0, kLog100) == 0);
  CHECK(coldmri::locate_start_step(0.01, kLin100) == 100);
  CHECK(coldmri::locate_start_step(0.01, kLog100) == 100);
  CHECK_THROWS_AS(coldmri::locate_start_step(0.009, kLog100),
                  coldmri::UnsupportedRateError);
  CHECK_THROWS_AS(coldmri::locate_start_step(1.5, kLog100), coldmri::ConfigError);
  CHECK_THROWS_AS(coldmri::locate_start_step(0.0, kLog100), coldmri::ConfigError);
}

TEST_CASE("returned start step is the smallest admissible one") {
  for (auto& spec : {kLin100, kLog100}) {
    for (double sr : {0.9, 0.5, 0.25, 0.125, 0.0625, 0.02}) {
      const int t = coldmri::locate_start_step(sr, spec);
      CHECK(coldmri::sampling_rate(spec, t) <= sr);
      if (t > 0) CHECK(coldmri::sampling_rate(spec, t - 1) > sr);
    }
  }
}

TEST_CASE("centre-out order walks away from DC, low side first") {
  CHECK(coldmri::center_out_order(1) == std::vector<int>{0});
  CHECK(coldmri::center_out_order(4) == std::vector<int>{2, 1, 3, 0});
  CHECK(coldmri::center_out_order(5) == std::vector<int>{2, 1, 3, 0, 4});

  const std::vector<int> order = coldmri::center_out_order(320);
  CHECK(order[0] == 160);
  std::set<int> first12(order.begin(), order.begin() + 12);
  std::set<int> first13(order.begin(), order.begin() + 13);
  std::set<int> want12, want13;
  for (int c = 154; c <= 165; ++c) want12.insert(c);
  for (int c = 154; c <= 166; ++c) want13.insert(c);
  CHECK(first12 == want12);
  CHECK(first13 == want13);
}

TEST_CASE("column mask validation") {
  // Missing centre block.
  std::vector<std::uint8_t> sel(8, 0);
  sel[0] = 1;
  CHECK_THROWS_AS(ColumnMask(8, sel, 0.25, 4.0), coldmri::ConfigError);
  // 0.25 * 8 = 2 centre columns -> 4 and 3 must be selected.
  sel.assign(8, 0);
  sel[4] = sel[3] = 1;
  const ColumnMask ok(8, sel, 0.25, 4.0);
  CHECK(ok.num_selected() == 2);
  CHECK(ok.dc_column() == 4);
  CHECK(ok.is_selected(4));
  CHECK_FALSE(ok.is_selected(0));
  CHECK_THROWS_AS(ok.is_selected(8), coldmri::IndexError);

  CHECK_THROWS_AS(ColumnMask(8, std::vector<std::uint8_t>(8, 2), 0.1, 2.0),
                  coldmri::ConfigError);
  CHECK_THROWS_AS(ColumnMask(8, std::vector<std::uint8_t>(8, 0), 0.1, 2.0),
                  coldmri::ConfigError);
  CHECK_THROWS_AS(ColumnMask(8, std::vector<std::uint8_t>(4, 1), 0.1, 2.0),
                  coldmri::ConfigError);
  CHECK_THROWS_AS(ColumnMask(8, std::vector<std::uint8_t>(8, 1), 0.0, 1.0),
                  coldmri::ConfigError);
  CHECK_THROWS_AS(ColumnMask(8, std::vector<std::uint8_t>(8, 1), 0.5, 0.5),
                  coldmri::ConfigError);
}

TEST_CASE("families nest, keep exact counts, and select everything at t=0") {
  for (auto kind : {ScheduleKind::kLinear, ScheduleKind::kLog}) {
    for (int width : {16, 33, 64}) {
      const ScheduleSpec spec(kind, 25, 0.05);
      const MaskFamily family =
          coldmri::build_mask_family(spec, width, 1.0 / width, 99);
      CHECK(family.mask(0).num_selected() == width);
      for (int t = 0; t <= 25; ++t) {
        CHECK(family.mask(t).num_selected() == expected_columns(spec, t, width));
        if (t > 0) CHECK(family.mask(t - 1).is_superset_of(family.mask(t)));
        CHECK(family.mask(t).is_selected(width / 2));
      }
    }
  }
}

TEST_CASE("family construction is deterministic in the seed") {
  // sr_min 0.01 leaves a one-column budget at t = T, so the centre block can
  // only be the DC column.
  const MaskFamily a = coldmri::build_mask_family(kLog100, 64, 1.0 / 64, 7);
  const MaskFamily b = coldmri::build_mask_family(kLog100, 64, 1.0 / 64, 7);
  const MaskFamily c = coldmri::build_mask_family(kLog100, 64, 1.0 / 64, 8);
  bool any_diff = false;
  for (int t = 0; t <= 100; ++t) {
    CHECK(a.mask(t).same_selection(b.mask(t)));
    if (!a.mask(t).same_selection(c.mask(t))) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("family rejects a centre block larger than the final-step budget") {
  // width 32, sr_min 0.05 -> round(1.6) = 2 columns at t = T; cf 0.2 wants 7.
  const ScheduleSpec spec(ScheduleKind::kLog, 10, 0.05);
  CHECK_THROWS_AS(coldmri::build_mask_family(spec, 32, 0.2, 1), coldmri::ConfigError);
  CHECK_NOTHROW(coldmri::build_mask_family(spec, 32, 2.0 / 32, 1));
}

TEST_CASE("family step access is range-checked") {
  const MaskFamily family = coldmri::build_mask_family(kLog100, 32, 1.0 / 32, 1);
  CHECK_THROWS_AS(family.mask(-1), coldmri::IndexError);
  CHECK_THROWS_AS(family.mask(101), coldmri::IndexError);
}

TEST_CASE("task masks hit the budget, keep the centre block, and are seeded") {
  for (double af : {1.0, 2.0, 4.0, 8.0}) {
    const ColumnMask m = coldmri::gen_task_mask(64, af, 0.1, 5);
    CHECK(m.num_selected() == std::max(1L, std::lround(64 / af)));
    CHECK(m.accel_factor() == af);
    // ceil(0.1 * 64) = 7 centre columns.
    const std::vector<int> order = coldmri::center_out_order(64);
    for (int i = 0; i < 7; ++i) CHECK(m.is_selected(order[i]));
  }
  const ColumnMask a = coldmri::gen_task_mask(64, 4.0, 0.1, 5);
  const ColumnMask b = coldmri::gen_task_mask(64, 4.0, 0.1, 5);
  const ColumnMask c = coldmri::gen_task_mask(64, 4.0, 0.1, 6);
  CHECK(a.same_selection(b));
  CHECK_FALSE(a.same_selection(c));
  // Budget 2 cannot hold a 7-column centre block.
  CHECK_THROWS_AS(coldmri::gen_task_mask(64, 32.0, 0.1, 5), coldmri::ConfigError);
}

TEST_CASE("aligned task masks cover the located family mask") {
  for (auto kind : {ScheduleKind::kLinear, ScheduleKind::kLog}) {
    const ScheduleSpec spec(kind, 100, 0.01);
    for (int width : {32, 64, 320}) {
      const MaskFamily family =
          coldmri::build_mask_family(spec, width, 1.0 / width, 3);
      for (double af : {2.0, 3.7, 4.0, 8.0, 16.0}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
          const ColumnMask m = coldmri::gen_aligned_task_mask(family, af, seed);
          const int start = coldmri::locate_start_step(1.0 / af, spec);
          CAPTURE(width);
          CAPTURE(af);
          CHECK(m.num_selected() == std::max(1L, std::lround(width / af)));
          CHECK(m.is_superset_of(family.mask(start)));
        }
      }
    }
  }
}

TEST_CASE("snapping finds the smallest matching step and rejects strangers") {
  const ScheduleSpec spec(ScheduleKind::kLog, 20, 0.1);
  const MaskFamily family = coldmri::build_mask_family(spec, 32, 2.0 / 32, 17);
  for (int t = 0; t <= 20; ++t) {
    const auto snapped = coldmri::snap_to_family(family.mask(t), family);
    REQUIRE(snapped.has_value());
    CHECK(*snapped <= t);
    CHECK(family.mask(*snapped).same_selection(family.mask(t)));
    // Smallest: the preceding step must differ.
    if (*snapped > 0) {
      CHECK_FALSE(family.mask(*snapped - 1).same_selection(family.mask(t)));
    }
  }

  // Swap one selected non-centre column for an unselected one.
  const ColumnMask& base = family.mask(10);
  std::vector<std::uint8_t> sel(base.selected().begin(), base.selected().end());
  int on = -1, off = -1;
  for (int c = 0; c < 32 && (on < 0 || off < 0); ++c) {
    if (c == 16 || c == 15) continue;  // centre block
    if (sel[static_cast<std::size_t>(c)] && on < 0) on = c;
    if (!sel[static_cast<std::size_t>(c)] && off < 0) off = c;
  }
  REQUIRE(on >= 0);
  REQUIRE(off >= 0);
  sel[static_cast<std::size_t>(on)] = 0;
  sel[static_cast<std::size_t>(off)] = 1;
  const ColumnMask stranger(32, sel, base.center_fraction(), base.accel_factor());
  CHECK_FALSE(coldmri::snap_to_family(stranger, family).has_value());
}
