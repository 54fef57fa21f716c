#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "coldmri/errors.hpp"

namespace coldmri {

enum class ScheduleKind { kLinear, kLog };

/// Sampling-rate schedule over steps t = 0..T.  SR_0 = 1 (no degradation)
/// and SR_T = sr_min (strongest degradation).
class ScheduleSpec {
 public:
  ScheduleSpec(ScheduleKind kind, int total_steps, double sr_min);

  ScheduleKind kind() const { return kind_; }
  int total_steps() const { return total_steps_; }
  double sr_min() const { return sr_min_; }

 private:
  ScheduleKind kind_;
  int total_steps_;
  double sr_min_;
};

/// SR_t for t in [0, T].  Linear: 1 - (1 - sr_min) * t / T.
/// Log: sr_min^(t / T).  Endpoints are returned exactly.
double sampling_rate(const ScheduleSpec& spec, int t);

/// Smallest t with SR_t <= task_sr; the reverse process can start there
/// because the schedule mask at that step fits inside the task budget.
/// Throws UnsupportedRateError when task_sr < SR_T.
int locate_start_step(double task_sr, const ScheduleSpec& spec);

/// Cartesian column-sampling mask for one k-space width.  Selected columns
/// always include a contiguous centre block of ceil(center_fraction * width)
/// columns around the DC column (width / 2).
class ColumnMask {
 public:
  ColumnMask(int width, std::vector<std::uint8_t> selected,
             double center_fraction, double accel_factor);

  int width() const { return width_; }
  int dc_column() const { return width_ / 2; }
  bool is_selected(int col) const;
  int num_selected() const { return num_selected_; }
  double sampling_rate() const {
    return static_cast<double>(num_selected_) / width_;
  }
  double center_fraction() const { return center_fraction_; }
  double accel_factor() const { return accel_factor_; }

  std::span<const std::uint8_t> selected() const { return selected_; }

  bool same_selection(const ColumnMask& other) const;
  bool is_superset_of(const ColumnMask& other) const;

 private:
  int width_;
  std::vector<std::uint8_t> selected_;
  int num_selected_;
  double center_fraction_;
  double accel_factor_;
};

/// Columns ordered by distance from the DC column, nearest first; ties go to
/// the lower column index.  The first k entries form the contiguous centre
/// block of size k used for fully sampled low frequencies.
std::vector<int> center_out_order(int width);

/// Nested family of masks M_0 superset M_1 ... superset M_T driven by a
/// schedule.  M_t selects the first max(1, round(SR_t * width)) columns of a
/// fixed priority list, so smaller masks are always prefixes of larger ones.
class MaskFamily {
 public:
  /// Builds the family from a priority permutation.  The permutation must
  /// start with the centre block of ceil(center_fraction * width) columns;
  /// every schedule-derived invariant is validated here.
  MaskFamily(const ScheduleSpec& spec, int width, double center_fraction,
             std::uint64_t seed, std::vector<int> priority);

  const ScheduleSpec& schedule() const { return spec_; }
  int width() const { return width_; }
  int total_steps() const { return spec_.total_steps(); }
  double center_fraction() const { return center_fraction_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const int> priority() const { return priority_; }

  /// Mask for step t; throws IndexError outside [0, T].
  const ColumnMask& mask(int t) const;

 private:
  ScheduleSpec spec_;
  int width_;
  double center_fraction_;
  std::uint64_t seed_;
  std::vector<int> priority_;
  std::vector<ColumnMask> masks_;
};

/// Deterministic family construction: centre block first, then the remaining
/// columns in seeded-shuffle order.
MaskFamily build_mask_family(const ScheduleSpec& spec, int width,
                             double center_fraction, std::uint64_t seed);

/// Acquisition mask for an accel_factor-times undersampled scan:
/// max(1, round(width / accel_factor)) columns, centre block plus random others.
ColumnMask gen_task_mask(int width, double accel_factor, double center_fraction,
                         std::uint64_t seed);

/// Task mask guaranteed to contain the family mask at the located start step,
/// padded with random extra columns up to the x-fold budget.
ColumnMask gen_aligned_task_mask(const MaskFamily& family, double accel_factor,
                                 std::uint64_t seed);

/// Smallest t whose family mask selects exactly the same columns, if any.
std::optional<int> snap_to_family(const ColumnMask& mask, const MaskFamily& family);

}  // namespace coldmri
