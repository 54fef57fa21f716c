#include "coldmri/sampler.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "coldmri/fft.hpp"
#include "coldmri/metrics.hpp"

namespace coldmri {

ComplexImage zero_fill(const KSpace& measured, const ColumnMask& mask) {
  return ifft2_centered(apply_mask(measured, mask));
}

ComplexImage data_consistency(const ComplexImage& x, const KSpace& measured,
                              const ColumnMask& mask) {
  if (x.height() != measured.height() || x.width() != measured.width() ||
      mask.width() != x.width()) {
    throw ShapeError("data_consistency: image " + std::to_string(x.height()) +
                     "x" + std::to_string(x.width()) + ", measurement " +
                     std::to_string(measured.height()) + "x" +
                     std::to_string(measured.width()) + " and mask width " +
                     std::to_string(mask.width()) + " must agree");
  }
  KSpace k = fft2_centered(x);
  for (int c = 0; c < mask.width(); ++c) {
    if (!mask.is_selected(c)) continue;
    for (int r = 0; r < k.height(); ++r) k(r, c) = measured(r, c);
  }
  return ifft2_centered(k);
}

ComplexImage reverse_step(const ComplexImage& x, const ComplexImage& x_hat,
                          const DegradationOp& op, int t) {
  if (t < 1 || t > op.total_steps()) {
    throw IndexError("reverse step " + std::to_string(t) + " outside [1, " +
                     std::to_string(op.total_steps()) + "]");
  }
  return x - op.degrade(x_hat, t) + op.degrade(x_hat, t - 1);
}

ReverseResult reconstruct(const KSpace& measured, const Restorer& restorer,
                          const ReverseRunConfig& cfg) {
  if (cfg.family == nullptr || cfg.task_mask == nullptr) {
    throw ConfigError("reconstruct needs both a mask family and a task mask");
  }
  const MaskFamily& family = *cfg.family;
  const ColumnMask& mask = *cfg.task_mask;
  require_finite(measured, "reconstruct");
  if (measured.width() != mask.width() || family.width() != mask.width()) {
    throw ShapeError("measurement width " + std::to_string(measured.width()) +
                     ", task mask width " + std::to_string(mask.width()) +
                     " and family width " + std::to_string(family.width()) +
                     " must agree");
  }
  const int T = family.total_steps();

  const std::optional<int> snapped = snap_to_family(mask, family);
  int start = T;
  if (cfg.start_override.has_value()) {
    start = *cfg.start_override;
    if (start < 0 || start > T) {
      throw IndexError("start override " + std::to_string(start) +
                       " outside [0, " + std::to_string(T) + "]");
    }
  } else if (cfg.use_spc) {
    start = snapped.has_value()
                ? *snapped
                : locate_start_step(1.0 / mask.accel_factor(), family.schedule());
  }

  const KSpace y = apply_mask(measured, mask);
  ComplexImage x = cfg.start_override.has_value() || cfg.use_spc
                       ? ifft2_centered(y)
                       : ifft2_centered(apply_mask(y, family.mask(T)));

  ReverseResult res;
  res.start_step = start;
  res.start_mask_covered = mask.is_superset_of(family.mask(start));
  if (cfg.record_trace) res.trace.reserve(static_cast<std::size_t>(start));

  const int h = measured.height();
  const int w = measured.width();
  for (int t = start; t >= 1; --t) {
    const ComplexImage x_hat = restorer.restore(x, t);
    KSpace k = fft2_centered(x_hat);
    double correction = 0.0;
    if (cfg.use_dcc) {
      for (int c = 0; c < w; ++c) {
        if (!mask.is_selected(c)) continue;
        for (int r = 0; r < h; ++r) {
          correction += std::norm(y(r, c) - k(r, c));
          k(r, c) = y(r, c);
        }
      }
      // Parseval: the image-domain L2 of the applied correction equals the
      // k-space L2 of the replaced coefficients under a unitary transform.
      correction = std::sqrt(correction);
    }
    if (cfg.record_trace) res.trace.push_back({t, correction});

    // x_{t-1} = x_t - D(x_hat, t) + D(x_hat, t - 1) collapses to adding the
    // k-space columns the smaller mask lacks, so one inverse transform does it.
    const ColumnMask& m_t = family.mask(t);
    const ColumnMask& m_prev = family.mask(t - 1);
    KSpace diff(h, w);
    bool any = false;
    for (int c = 0; c < w; ++c) {
      if (!m_prev.is_selected(c) || m_t.is_selected(c)) continue;
      any = true;
      for (int r = 0; r < h; ++r) diff(r, c) = k(r, c);
    }
    if (any) x = x + ifft2_centered(diff);

    if (cfg.snapshot_every > 0) {
      const int produced = start - (t - 1);
      if (t - 1 == 0 || produced % cfg.snapshot_every == 0) {
        res.snapshots.emplace_back(t - 1, x);
      }
    }
  }

  if (cfg.terminal_dc) x = data_consistency(x, y, mask);
  res.recon = std::move(x);
  return res;
}

std::vector<StartAblationRow> ablate_start_point(const ComplexImage& truth,
                                                 const Restorer& restorer,
                                                 const ReverseRunConfig& base_cfg,
                                                 int start_lo, int start_hi) {
  if (base_cfg.family == nullptr || base_cfg.task_mask == nullptr) {
    throw ConfigError("ablate_start_point needs both a mask family and a task mask");
  }
  const int T = base_cfg.family->total_steps();
  if (start_lo < 0 || start_hi > T || start_lo > start_hi) {
    throw IndexError("start range [" + std::to_string(start_lo) + ", " +
                     std::to_string(start_hi) + "] outside [0, " +
                     std::to_string(T) + "]");
  }
  const KSpace y = measure(truth, *base_cfg.task_mask);
  std::vector<StartAblationRow> rows;
  rows.reserve(static_cast<std::size_t>(start_hi - start_lo + 1));
  for (int s = start_lo; s <= start_hi; ++s) {
    ReverseRunConfig cfg = base_cfg;
    cfg.start_override = s;
    cfg.record_trace = false;
    cfg.snapshot_every = 0;
    const ReverseResult res = reconstruct(y, restorer, cfg);
    rows.push_back({s, psnr(res.recon, truth), ssim(res.recon, truth)});
  }
  return rows;
}

}  // namespace coldmri
