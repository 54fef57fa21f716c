#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "coldmri/io.hpp"
#include "coldmri/metrics.hpp"
#include "coldmri/sampler.hpp"

namespace coldmri {

struct EvalRow {
  std::string slice;
  double accel_factor;
  std::string schedule;  // "lin" or "log"
  double ssim;
  double psnr;
  int steps;
  double seconds;
};

struct EvalSummary {
  double accel_factor;
  std::string schedule;
  Aggregate psnr;
  Aggregate ssim;
};

struct EvalReport {
  std::vector<EvalRow> rows;        // one per (case, slice), case-major
  std::vector<EvalSummary> summaries;  // one per case
};

/// Measures every slice through each case's task mask, reconstructs, and
/// scores against the clean slice.  `jobs` parallelises over slices; rows are
/// written by index so results do not depend on the job count (only the
/// seconds column reflects actual wall time).
EvalReport evaluate(const Dataset& dataset, const Restorer& restorer,
                    std::span<const ReverseRunConfig> cases, int jobs = 1);

/// As above, but the restorer may differ per slice (needed when scoring the
/// exact-recovery reference, whose restorer embeds the slice itself).  The
/// provider must be safe to call concurrently and the returned restorers must
/// outlive the call.
using RestorerProvider = std::function<const Restorer*(std::size_t slice_index)>;
EvalReport evaluate(const Dataset& dataset, const RestorerProvider& restorer_for_slice,
                    std::span<const ReverseRunConfig> cases, int jobs = 1);

}  // namespace coldmri
