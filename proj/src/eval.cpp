#include "coldmri/eval.hpp"

#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "coldmri/degradation.hpp"

namespace coldmri {
namespace {

std::string schedule_name(const MaskFamily& family) {
  return family.schedule().kind() == ScheduleKind::kLinear ? "lin" : "log";
}

}  // namespace

EvalReport evaluate(const Dataset& dataset, const RestorerProvider& restorer_for_slice,
                    std::span<const ReverseRunConfig> cases, int jobs) {
  if (dataset.images.empty()) throw ConfigError("evaluation dataset is empty");
  if (dataset.ids.size() != dataset.images.size()) {
    throw ConfigError("dataset ids and images are out of sync");
  }
  if (cases.empty()) throw ConfigError("no evaluation cases given");
  if (!restorer_for_slice) throw ConfigError("no restorer provided");
  for (const ReverseRunConfig& cfg : cases) {
    if (cfg.family == nullptr || cfg.task_mask == nullptr) {
      throw ConfigError("evaluation case lacks a mask family or task mask");
    }
  }

  const std::size_t n_slices = dataset.images.size();
  for (std::size_t si = 0; si < n_slices; ++si) {
    if (restorer_for_slice(si) == nullptr) {
      throw ConfigError("restorer provider returned null for slice " +
                        dataset.ids[si]);
    }
  }

  const std::size_t n_total = n_slices * cases.size();
  EvalReport report;
  report.rows.resize(n_total);

  auto run_one = [&](std::size_t flat) {
    const std::size_t ci = flat / n_slices;
    const std::size_t si = flat % n_slices;
    ReverseRunConfig cfg = cases[ci];
    cfg.record_trace = false;
    cfg.snapshot_every = 0;
    const ComplexImage& truth = dataset.images[si];
    const KSpace y = measure(truth, *cfg.task_mask);
    const auto t0 = std::chrono::steady_clock::now();
    const ReverseResult res = reconstruct(y, *restorer_for_slice(si), cfg);
    const auto t1 = std::chrono::steady_clock::now();
    EvalRow& row = report.rows[flat];
    row.slice = dataset.ids[si];
    row.accel_factor = cfg.task_mask->accel_factor();
    row.schedule = schedule_name(*cfg.family);
    row.ssim = ssim(res.recon, truth);
    row.psnr = psnr(res.recon, truth);
    row.steps = res.start_step;
    row.seconds = std::chrono::duration<double>(t1 - t0).count();
  };

  const int workers = std::max(1, jobs);
  if (workers == 1) {
    for (std::size_t i = 0; i < n_total; ++i) run_one(i);
  } else {
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int j = 0; j < workers; ++j) {
      threads.emplace_back([&, j] {
        try {
          for (std::size_t i = static_cast<std::size_t>(j); i < n_total;
               i += static_cast<std::size_t>(workers)) {
            run_one(i);
          }
        } catch (...) {
          const std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (std::thread& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    std::vector<double> psnrs(n_slices), ssims(n_slices);
    for (std::size_t si = 0; si < n_slices; ++si) {
      psnrs[si] = report.rows[ci * n_slices + si].psnr;
      ssims[si] = report.rows[ci * n_slices + si].ssim;
    }
    report.summaries.push_back({cases[ci].task_mask->accel_factor(),
                                schedule_name(*cases[ci].family),
                                aggregate(psnrs), aggregate(ssims)});
  }
  return report;
}

EvalReport evaluate(const Dataset& dataset, const Restorer& restorer,
                    std::span<const ReverseRunConfig> cases, int jobs) {
  return evaluate(
      dataset, [&restorer](std::size_t) { return &restorer; }, cases, jobs);
}

}  // namespace coldmri
