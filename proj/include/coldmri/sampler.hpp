#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "coldmri/degradation.hpp"
#include "coldmri/image.hpp"
#include "coldmri/masks.hpp"
#include "coldmri/restorer.hpp"

namespace coldmri {

/// ifft of the masked measurement: the standard zero-filled reconstruction.
ComplexImage zero_fill(const KSpace& measured, const ColumnMask& mask);

/// Replaces the measured columns of fft(x) with the measured data and maps
/// back: the data-consistency projection.
ComplexImage data_consistency(const ComplexImage& x, const KSpace& measured,
                              const ColumnMask& mask);

/// One reverse update: x - D(x_hat, t) + D(x_hat, t - 1).  Valid for t in
/// [1, T].  The loop in reconstruct() uses an algebraically identical fused
/// form with fewer transforms.
ComplexImage reverse_step(const ComplexImage& x, const ComplexImage& x_hat,
                          const DegradationOp& op, int t);

struct ReverseRunConfig {
  const MaskFamily* family = nullptr;
  const ColumnMask* task_mask = nullptr;
  bool use_dcc = true;        // per-step data-consistency correction
  bool use_spc = true;        // start from the located step instead of T
  bool terminal_dc = true;    // final data-consistency projection
  std::optional<int> start_override;  // explicit start step (wins over SPC)
  bool record_trace = true;
  int snapshot_every = 0;     // record x_t every k produced steps; 0 = off
};

struct TraceRow {
  int t;
  double dcc_correction_l2;  // L2 magnitude of the applied correction (0 when off)
};

struct ReverseResult {
  ComplexImage recon;
  int start_step = 0;
  /// True when the family mask at the start step fits inside the task mask;
  /// exact telescoping is only available in that case.
  bool start_mask_covered = false;
  std::vector<TraceRow> trace;
  std::vector<std::pair<int, ComplexImage>> snapshots;  // (t, x_t)
};

/// Runs the conditioned reverse process on a masked measurement.
///
/// Start step: start_override if set; otherwise, with use_spc, the family
/// step whose mask matches the task mask exactly (snap) or the located step
/// for the task rate 1/accel_factor; otherwise T.  The iterate starts from
/// the zero-filled image (degraded to step T when starting at T without SPC)
/// and walks t = start..1 applying restore, optional per-step DCC, and the
/// reverse update.
ReverseResult reconstruct(const KSpace& measured, const Restorer& restorer,
                          const ReverseRunConfig& cfg);

struct StartAblationRow {
  int start;
  double psnr;
  double ssim;
};

/// Reconstructs with every start override in [start_lo, start_hi] and scores
/// against the ground truth.
std::vector<StartAblationRow> ablate_start_point(const ComplexImage& truth,
                                                 const Restorer& restorer,
                                                 const ReverseRunConfig& base_cfg,
                                                 int start_lo, int start_hi);

}  // namespace coldmri
