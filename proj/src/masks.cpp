#include "coldmri/masks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coldmri/rng.hpp"

namespace coldmri {
namespace {

/// Centre block size for a mask of the given width: ceil(cf * width), but at
/// least one column so the DC column is always selected.  The small epsilon
/// absorbs float error when cf was itself derived as k / width.
int center_block_size(double center_fraction, int width) {
  const int k = static_cast<int>(std::ceil(center_fraction * width - 1e-9));
  return std::max(1, std::min(k, width));
}

/// Columns selected at step t: max(1, round(SR_t * width)), rounding half
/// away from zero.
int columns_at(const ScheduleSpec& spec, int t, int width) {
  return std::max(1L, std::lround(sampling_rate(spec, t) * width));
}

std::vector<std::uint8_t> bytes_from_prefix(std::span<const int> priority,
                                            int width, int count) {
  std::vector<std::uint8_t> sel(static_cast<std::size_t>(width), 0);
  for (int i = 0; i < count; ++i) sel[static_cast<std::size_t>(priority[i])] = 1;
  return sel;
}

/// Non-centre columns in ascending order, shuffled in place by the rng.
std::vector<int> shuffled_tail(int width, int block, std::uint64_t seed) {
  const std::vector<int> order = center_out_order(width);
  std::vector<std::uint8_t> in_block(static_cast<std::size_t>(width), 0);
  for (int i = 0; i < block; ++i) in_block[static_cast<std::size_t>(order[i])] = 1;
  std::vector<int> tail;
  tail.reserve(static_cast<std::size_t>(width - block));
  for (int c = 0; c < width; ++c) {
    if (!in_block[static_cast<std::size_t>(c)]) tail.push_back(c);
  }
  Rng rng(seed);
  rng.shuffle(std::span<int>(tail));
  return tail;
}

}  // namespace

ScheduleSpec::ScheduleSpec(ScheduleKind kind, int total_steps, double sr_min)
    : kind_(kind), total_steps_(total_steps), sr_min_(sr_min) {
  if (total_steps < 1) {
    throw ConfigError("schedule needs at least one step, got " +
                      std::to_string(total_steps));
  }
  if (!(sr_min > 0.0) || sr_min > 1.0) {
    throw ConfigError("sr_min must lie in (0, 1], got " + std::to_string(sr_min));
  }
}

double sampling_rate(const ScheduleSpec& spec, int t) {
  const int T = spec.total_steps();
  if (t < 0 || t > T) {
    throw IndexError("step " + std::to_string(t) + " outside [0, " +
                     std::to_string(T) + "]");
  }
  // Exact endpoints: the formulas below reproduce them only up to float
  // rounding.
  if (t == 0) return 1.0;
  if (t == T) return spec.sr_min();
  const double frac = static_cast<double>(t) / T;
  if (spec.kind() == ScheduleKind::kLinear) {
    return 1.0 - (1.0 - spec.sr_min()) * frac;
  }
  return std::pow(spec.sr_min(), frac);
}

int locate_start_step(double task_sr, const ScheduleSpec& spec) {
  if (!(task_sr > 0.0) || task_sr > 1.0) {
    throw ConfigError("task sampling rate must lie in (0, 1], got " +
                      std::to_string(task_sr));
  }
  if (task_sr < spec.sr_min()) {
    throw UnsupportedRateError(
        "task sampling rate " + std::to_string(task_sr) +
        " is below the schedule minimum " + std::to_string(spec.sr_min()));
  }
  for (int t = 0; t <= spec.total_steps(); ++t) {
    if (sampling_rate(spec, t) <= task_sr) return t;
  }
  // Unreachable: SR_T == sr_min <= task_sr.
  return spec.total_steps();
}

std::vector<int> center_out_order(int width) {
  if (width <= 0) throw ConfigError("mask width must be positive");
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(width));
  const int dc = width / 2;
  order.push_back(dc);
  for (int k = 1; static_cast<int>(order.size()) < width; ++k) {
    if (dc - k >= 0) order.push_back(dc - k);
    if (dc + k < width) order.push_back(dc + k);
  }
  return order;
}

ColumnMask::ColumnMask(int width, std::vector<std::uint8_t> selected,
                       double center_fraction, double accel_factor)
    : width_(width),
      selected_(std::move(selected)),
      num_selected_(0),
      center_fraction_(center_fraction),
      accel_factor_(accel_factor) {
  if (width <= 0) throw ConfigError("mask width must be positive");
  if (selected_.size() != static_cast<std::size_t>(width)) {
    throw ConfigError("mask byte count " + std::to_string(selected_.size()) +
                      " does not match width " + std::to_string(width));
  }
  for (std::uint8_t b : selected_) {
    if (b > 1) throw ConfigError("mask bytes must be 0 or 1");
    num_selected_ += b;
  }
  if (num_selected_ == 0) throw ConfigError("mask selects no columns");
  if (!(center_fraction > 0.0) || center_fraction > 1.0) {
    throw ConfigError("center_fraction must lie in (0, 1], got " +
                      std::to_string(center_fraction));
  }
  if (!(accel_factor >= 1.0)) {
    throw ConfigError("accel_factor must be >= 1, got " +
                      std::to_string(accel_factor));
  }
  const int block = center_block_size(center_fraction_, width_);
  const std::vector<int> order = center_out_order(width_);
  for (int i = 0; i < block; ++i) {
    if (!selected_[static_cast<std::size_t>(order[i])]) {
      throw ConfigError("centre block column " + std::to_string(order[i]) +
                        " is not selected");
    }
  }
}

bool ColumnMask::is_selected(int col) const {
  if (col < 0 || col >= width_) {
    throw IndexError("column " + std::to_string(col) + " outside [0, " +
                     std::to_string(width_) + ")");
  }
  return selected_[static_cast<std::size_t>(col)] != 0;
}

bool ColumnMask::same_selection(const ColumnMask& other) const {
  return width_ == other.width_ && selected_ == other.selected_;
}

bool ColumnMask::is_superset_of(const ColumnMask& other) const {
  if (width_ != other.width_) return false;
  for (int c = 0; c < width_; ++c) {
    if (other.selected_[static_cast<std::size_t>(c)] &&
        !selected_[static_cast<std::size_t>(c)]) {
      return false;
    }
  }
  return true;
}

MaskFamily::MaskFamily(const ScheduleSpec& spec, int width, double center_fraction,
                       std::uint64_t seed, std::vector<int> priority)
    : spec_(spec),
      width_(width),
      center_fraction_(center_fraction),
      seed_(seed),
      priority_(std::move(priority)) {
  if (width <= 0) throw ConfigError("mask width must be positive");
  if (priority_.size() != static_cast<std::size_t>(width)) {
    throw ConfigError("priority list length " + std::to_string(priority_.size()) +
                      " does not match width " + std::to_string(width));
  }
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(width), 0);
  for (int c : priority_) {
    if (c < 0 || c >= width || seen[static_cast<std::size_t>(c)]) {
      throw ConfigError("priority list is not a permutation of the columns");
    }
    seen[static_cast<std::size_t>(c)] = 1;
  }
  const int block = center_block_size(center_fraction, width);
  const std::vector<int> order = center_out_order(width);
  for (int i = 0; i < block; ++i) {
    if (priority_[static_cast<std::size_t>(i)] != order[static_cast<std::size_t>(i)]) {
      throw ConfigError("priority list must start with the centre block");
    }
  }
  const int final_count = columns_at(spec_, spec_.total_steps(), width_);
  if (block > final_count) {
    throw ConfigError("centre block of " + std::to_string(block) +
                      " columns exceeds the " + std::to_string(final_count) +
                      "-column budget at the final step");
  }
  masks_.reserve(static_cast<std::size_t>(spec_.total_steps()) + 1);
  for (int t = 0; t <= spec_.total_steps(); ++t) {
    const int count = columns_at(spec_, t, width_);
    masks_.emplace_back(width_, bytes_from_prefix(priority_, width_, count),
                        center_fraction_, 1.0 / sampling_rate(spec_, t));
  }
}

const ColumnMask& MaskFamily::mask(int t) const {
  if (t < 0 || t > spec_.total_steps()) {
    throw IndexError("step " + std::to_string(t) + " outside [0, " +
                     std::to_string(spec_.total_steps()) + "]");
  }
  return masks_[static_cast<std::size_t>(t)];
}

MaskFamily build_mask_family(const ScheduleSpec& spec, int width,
                             double center_fraction, std::uint64_t seed) {
  const int block = center_block_size(center_fraction, width);
  const std::vector<int> order = center_out_order(width);
  std::vector<int> priority(order.begin(), order.begin() + block);
  const std::vector<int> tail = shuffled_tail(width, block, seed);
  priority.insert(priority.end(), tail.begin(), tail.end());
  return MaskFamily(spec, width, center_fraction, seed, std::move(priority));
}

ColumnMask gen_task_mask(int width, double accel_factor, double center_fraction,
                         std::uint64_t seed) {
  if (width <= 0) throw ConfigError("mask width must be positive");
  if (!(accel_factor >= 1.0)) {
    throw ConfigError("accel_factor must be >= 1, got " +
                      std::to_string(accel_factor));
  }
  const int budget =
      static_cast<int>(std::max(1L, std::lround(width / accel_factor)));
  const int block = center_block_size(center_fraction, width);
  if (block > budget) {
    throw ConfigError("centre block of " + std::to_string(block) +
                      " columns exceeds the sampling budget of " +
                      std::to_string(budget));
  }
  const std::vector<int> order = center_out_order(width);
  std::vector<std::uint8_t> sel(static_cast<std::size_t>(width), 0);
  for (int i = 0; i < block; ++i) sel[static_cast<std::size_t>(order[i])] = 1;
  const std::vector<int> tail = shuffled_tail(width, block, seed);
  for (int i = 0; i < budget - block; ++i) {
    sel[static_cast<std::size_t>(tail[static_cast<std::size_t>(i)])] = 1;
  }
  return ColumnMask(width, std::move(sel), center_fraction, accel_factor);
}

ColumnMask gen_aligned_task_mask(const MaskFamily& family, double accel_factor,
                                 std::uint64_t seed) {
  if (!(accel_factor >= 1.0)) {
    throw ConfigError("accel_factor must be >= 1, got " +
                      std::to_string(accel_factor));
  }
  const int width = family.width();
  const int budget =
      static_cast<int>(std::max(1L, std::lround(width / accel_factor)));
  const int start = locate_start_step(1.0 / accel_factor, family.schedule());
  const ColumnMask& base = family.mask(start);
  // The located mask never exceeds the budget: SR_start <= 1 / accel_factor,
  // and the per-step rounding is monotone.
  std::vector<std::uint8_t> sel(base.selected().begin(), base.selected().end());
  std::vector<int> open;
  open.reserve(static_cast<std::size_t>(width));
  for (int c = 0; c < width; ++c) {
    if (!sel[static_cast<std::size_t>(c)]) open.push_back(c);
  }
  Rng rng(seed);
  rng.shuffle(std::span<int>(open));
  for (int i = 0; i < budget - base.num_selected(); ++i) {
    sel[static_cast<std::size_t>(open[static_cast<std::size_t>(i)])] = 1;
  }
  return ColumnMask(width, std::move(sel), family.center_fraction(), accel_factor);
}

std::optional<int> snap_to_family(const ColumnMask& mask, const MaskFamily& family) {
  if (mask.width() != family.width()) return std::nullopt;
  for (int t = 0; t <= family.total_steps(); ++t) {
    if (family.mask(t).same_selection(mask)) return t;
  }
  return std::nullopt;
}

}  // namespace coldmri
