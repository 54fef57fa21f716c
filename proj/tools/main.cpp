// Command-line front end: phantom generation, schedule inspection, mask
// generation, training, reconstruction, and grid evaluation.
//
// Exit codes: 0 success, 64 usage, 65 configuration/data mismatch, 2 IO,
// 3 training divergence, 70 unexpected failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coldmri/degradation.hpp"
#include "coldmri/eval.hpp"
#include "coldmri/io.hpp"
#include "coldmri/masks.hpp"
#include "coldmri/metrics.hpp"
#include "coldmri/phantom.hpp"
#include "coldmri/restorer.hpp"
#include "coldmri/sampler.hpp"
#include "coldmri/version.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitIo = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitUsage = 64;
constexpr int kExitConfig = 65;
constexpr int kExitInternal = 70;

/// Thrown after a handled failure whose artifacts are already on disk.
struct ExitWithCode {
  int code;
};

std::uint64_t default_seed() {
  if (const char* s = std::getenv("CDIFF_SEED"); s != nullptr && *s != '\0') {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (errno != 0 || end == s || *end != '\0') {
      throw coldmri::ConfigError("CDIFF_SEED is not an unsigned integer: " +
                                 std::string(s));
    }
    return v;
  }
  return 7;
}

coldmri::ScheduleKind parse_kind(const std::string& kind) {
  if (kind == "lin") return coldmri::ScheduleKind::kLinear;
  if (kind == "log") return coldmri::ScheduleKind::kLog;
  throw coldmri::ConfigError("unknown schedule kind: " + kind);
}

bool onoff(const std::string& v) { return v == "on"; }

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Shared schedule / mask-family flags.
struct ScheduleFlags {
  int total_steps = 100;
  double sr_min = 0.01;
  std::string kind = "log";
  double family_cf = 0.0;  // 0 = auto: a single centre column
  std::uint64_t family_seed = 1;
};

void add_schedule_flags(CLI::App* sub, ScheduleFlags& f) {
  sub->add_option("--T", f.total_steps, "number of degradation steps")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--sr-min", f.sr_min, "sampling rate at step T")
      ->check(CLI::Range(1e-9, 1.0))
      ->capture_default_str();
  sub->add_option("--kind", f.kind, "sampling-rate schedule")
      ->check(CLI::IsMember({"lin", "log"}))
      ->capture_default_str();
  sub->add_option("--family-cf", f.family_cf,
                  "centre fraction of the mask family (0 = one centre column)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--family-seed", f.family_seed,
                  "seed for the family column ordering")
      ->capture_default_str();
}

coldmri::MaskFamily build_family(const ScheduleFlags& f, int width) {
  const double cf = f.family_cf > 0.0 ? f.family_cf : 1.0 / width;
  return coldmri::build_mask_family(
      coldmri::ScheduleSpec(parse_kind(f.kind), f.total_steps, f.sr_min), width,
      cf, f.family_seed);
}

std::vector<std::pair<std::string, std::string>> schedule_manifest_entries(
    const ScheduleFlags& f, int width) {
  const double cf = f.family_cf > 0.0 ? f.family_cf : 1.0 / width;
  return {{"T", std::to_string(f.total_steps)},
          {"sr_min", coldmri::format_double(f.sr_min)},
          {"kind", f.kind},
          {"family_cf", coldmri::format_double(cf)},
          {"family_seed", std::to_string(f.family_seed)}};
}

// Exactly one restorer per run.
struct RestorerFlags {
  std::string ckpt_path;
  bool oracle = false;
  bool zerofill = false;
};

void add_restorer_flags(CLI::App* sub, RestorerFlags& r) {
  auto* grp = sub->add_option_group("restorer", "which restorer drives the run");
  grp->add_option("--ckpt", r.ckpt_path, "trained restorer checkpoint");
  grp->add_flag("--oracle", r.oracle,
                "restore with the clean input itself (upper bound)");
  grp->add_flag("--zerofill", r.zerofill, "identity restorer (baseline)");
  grp->require_option(1);
}

std::string restorer_name(const RestorerFlags& r) {
  if (r.oracle) return "oracle";
  if (r.zerofill) return "zerofill";
  return r.ckpt_path;
}

coldmri::ConvRestorer load_conv_restorer(const std::string& path,
                                         const coldmri::MaskFamily& family) {
  const coldmri::ModelCheckpoint ckpt = coldmri::load_checkpoint(path);
  if (ckpt.total_steps != family.total_steps()) {
    throw coldmri::ConfigError(
        "checkpoint was trained for T=" + std::to_string(ckpt.total_steps) +
        " but the schedule has T=" + std::to_string(family.total_steps()));
  }
  return coldmri::make_restorer(ckpt);
}

void write_run_manifest(
    const fs::path& out_dir, const std::string& command,
    std::vector<std::pair<std::string, std::string>> entries) {
  entries.insert(entries.begin(),
                 {{"command", command}, {"version", coldmri::kVersion}});
  entries.emplace_back("timestamp", utc_timestamp());
  coldmri::write_manifest(out_dir / "run_manifest.txt", entries,
                          {"run manifest: resolved parameters and outputs",
                           "timestamp and *seconds entries vary between runs"});
}

// ---------------------------------------------------------------------------
// phantom

struct PhantomFlags {
  int count = 8;
  int size = 64;
  std::uint64_t seed = 7;
  std::string out_dir;
};

void run_phantom(const PhantomFlags& f) {
  const auto images =
      coldmri::make_phantom_set(f.size, f.size, f.count, f.seed);
  fs::create_directories(f.out_dir);
  coldmri::save_dataset(f.out_dir, images);
  write_run_manifest(f.out_dir, "phantom",
                     {{"count", std::to_string(f.count)},
                      {"size", std::to_string(f.size)},
                      {"seed", std::to_string(f.seed)},
                      {"out_dir", f.out_dir}});
  std::cout << "wrote " << f.count << " phantoms (" << f.size << "x" << f.size
            << ") to " << f.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// schedule

struct ScheduleCmdFlags {
  ScheduleFlags sched;
  int width = 320;
  std::vector<double> afs{8.0, 16.0};
};

void run_schedule(const ScheduleCmdFlags& f) {
  const coldmri::ScheduleSpec spec(parse_kind(f.sched.kind),
                                   f.sched.total_steps, f.sched.sr_min);
  std::cout << "t,sr,cols\n";
  for (int t = 0; t <= spec.total_steps(); ++t) {
    const double sr = coldmri::sampling_rate(spec, t);
    const long cols = std::max(1L, std::lround(sr * f.width));
    std::cout << t << "," << coldmri::format_double(sr) << "," << cols << "\n";
  }
  for (const double af : f.afs) {
    const int start = coldmri::locate_start_step(1.0 / af, spec);
    std::cout << "start_step af=" << coldmri::format_double(af) << ": " << start
              << "\n";
  }
}

// ---------------------------------------------------------------------------
// mask

struct MaskCmdFlags {
  ScheduleFlags sched;
  int width = 320;
  double af = 8.0;
  double center_fraction = 0.04;
  std::uint64_t seed = 7;
  bool family = false;
  bool aligned = false;
  std::string out;
};

void run_mask(const MaskCmdFlags& f) {
  const fs::path parent = fs::path(f.out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  if (f.family) {
    const coldmri::MaskFamily fam = build_family(f.sched, f.width);
    coldmri::write_family(f.out, fam);
    std::cout << "wrote family kind=" << f.sched.kind
              << " T=" << fam.total_steps() << " width=" << fam.width()
              << " to " << f.out << "\n";
    return;
  }
  const coldmri::ColumnMask mask =
      f.aligned
          ? coldmri::gen_aligned_task_mask(build_family(f.sched, f.width),
                                           f.af, f.seed)
          : coldmri::gen_task_mask(f.width, f.af, f.center_fraction, f.seed);
  coldmri::write_mask(f.out, mask);
  std::cout << "wrote mask width=" << mask.width() << " cols="
            << mask.num_selected()
            << " af=" << coldmri::format_double(mask.accel_factor()) << " to "
            << f.out << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainCmdFlags {
  ScheduleFlags sched;
  std::string data_dir;
  std::string out_dir;
  int channels = 16;
  int depth = 4;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int grad_steps = 2000;
  std::string loss = "l1";
  int log_every = 1;
  int jobs = 1;
  std::uint64_t seed = 7;
};

void run_train(const TrainCmdFlags& f) {
  const coldmri::Dataset ds = coldmri::load_dataset(f.data_dir);
  const int width = ds.images.front().width();
  const coldmri::MaskFamily family = build_family(f.sched, width);

  coldmri::TrainConfig cfg;
  cfg.learning_rate = f.learning_rate;
  cfg.batch_size = f.batch_size;
  cfg.grad_steps = f.grad_steps;
  cfg.loss_norm =
      f.loss == "l1" ? coldmri::LossNorm::kL1 : coldmri::LossNorm::kL2;
  cfg.seed = f.seed;
  cfg.log_every = f.log_every;
  cfg.jobs = f.jobs;
  const coldmri::ConvArch arch{f.channels, f.depth};

  fs::create_directories(f.out_dir);
  auto entries = schedule_manifest_entries(f.sched, width);
  entries.insert(entries.end(),
                 {{"data_dir", f.data_dir},
                  {"out_dir", f.out_dir},
                  {"slices", std::to_string(ds.images.size())},
                  {"width", std::to_string(width)},
                  {"channels", std::to_string(f.channels)},
                  {"depth", std::to_string(f.depth)},
                  {"params", std::to_string(coldmri::param_count(arch))},
                  {"lr", coldmri::format_double(f.learning_rate)},
                  {"batch", std::to_string(f.batch_size)},
                  {"grad_steps", std::to_string(f.grad_steps)},
                  {"loss", f.loss},
                  {"log_every", std::to_string(f.log_every)},
                  {"jobs", std::to_string(f.jobs)},
                  {"seed", std::to_string(f.seed)}});

  const auto t0 = std::chrono::steady_clock::now();
  coldmri::TrainResult result;
  try {
    result = coldmri::train(ds.images, family, arch, cfg);
  } catch (const coldmri::TrainingDivergedError& e) {
    const fs::path ckpt_path = fs::path(f.out_dir) / "model.ckpt.diverged";
    coldmri::save_checkpoint(ckpt_path, e.partial_checkpoint());
    entries.emplace_back("diverged_at_step", std::to_string(e.step()));
    entries.emplace_back("checkpoint", ckpt_path.string());
    write_run_manifest(f.out_dir, "train", std::move(entries));
    std::cerr << "error: " << e.what() << "; partial checkpoint written to "
              << ckpt_path << "\n";
    throw ExitWithCode{kExitDiverged};
  }
  const auto t1 = std::chrono::steady_clock::now();
  const double seconds = std::chrono::duration<double>(t1 - t0).count();

  const fs::path ckpt_path = fs::path(f.out_dir) / "model.ckpt";
  coldmri::save_checkpoint(ckpt_path, result.checkpoint);
  std::vector<std::string> rows;
  rows.reserve(result.loss_log.size());
  for (const auto& [step, loss] : result.loss_log) {
    rows.push_back(std::to_string(step) + "," + coldmri::format_double(loss));
  }
  coldmri::write_csv(fs::path(f.out_dir) / "loss.csv", "step,loss", rows);

  entries.emplace_back("checkpoint", ckpt_path.string());
  if (!result.loss_log.empty()) {
    entries.emplace_back("first_loss",
                         coldmri::format_double(result.loss_log.front().second));
    entries.emplace_back("final_loss",
                         coldmri::format_double(result.loss_log.back().second));
  }
  entries.emplace_back("train_seconds", coldmri::format_double(seconds));
  write_run_manifest(f.out_dir, "train", std::move(entries));

  std::cout << "steps: " << f.grad_steps << "\n";
  if (!result.loss_log.empty()) {
    std::cout << "first_loss: "
              << coldmri::format_double(result.loss_log.front().second) << "\n"
              << "final_loss: "
              << coldmri::format_double(result.loss_log.back().second) << "\n";
  }
  std::cout << "seconds: " << coldmri::format_double(seconds) << "\n"
            << "checkpoint: " << ckpt_path.string() << "\n";
}

// ---------------------------------------------------------------------------
// recon

struct ReconCmdFlags {
  ScheduleFlags sched;
  RestorerFlags restorer;
  std::string input;
  std::string out_dir;
  std::string mask_path;
  double af = 8.0;
  double center_fraction = 0.04;
  bool aligned = false;
  std::uint64_t seed = 7;
  std::string dcc = "on";
  std::string spc = "on";
  std::string terminal_dc = "on";
  int start = -1;  // <0: resolve via SPC
  int snapshot_every = 0;
  bool pgm = false;
  bool verify = false;
};

void run_recon(const ReconCmdFlags& f) {
  const coldmri::ComplexImage truth = coldmri::read_cim(f.input);
  const coldmri::MaskFamily family = build_family(f.sched, truth.width());

  std::string mask_source;
  std::optional<coldmri::ColumnMask> mask;
  if (!f.mask_path.empty()) {
    mask = coldmri::read_mask(f.mask_path);
    mask_source = f.mask_path;
  } else if (f.aligned) {
    mask = coldmri::gen_aligned_task_mask(family, f.af, f.seed);
    mask_source = "aligned";
  } else {
    mask = coldmri::gen_task_mask(truth.width(), f.af, f.center_fraction,
                                  f.seed);
    mask_source = "generated";
  }

  const coldmri::KSpace y = coldmri::measure(truth, *mask);

  const coldmri::OracleRestorer oracle(truth);
  const coldmri::ZeroFillRestorer zerofill;
  std::optional<coldmri::ConvRestorer> trained;
  const coldmri::Restorer* restorer = nullptr;
  if (f.restorer.oracle) {
    restorer = &oracle;
  } else if (f.restorer.zerofill) {
    restorer = &zerofill;
  } else {
    trained.emplace(load_conv_restorer(f.restorer.ckpt_path, family));
    restorer = &*trained;
  }

  coldmri::ReverseRunConfig cfg;
  cfg.family = &family;
  cfg.task_mask = &*mask;
  cfg.use_dcc = onoff(f.dcc);
  cfg.use_spc = onoff(f.spc);
  cfg.terminal_dc = onoff(f.terminal_dc);
  if (f.start >= 0) cfg.start_override = f.start;
  cfg.record_trace = true;
  cfg.snapshot_every = f.snapshot_every;

  const auto t0 = std::chrono::steady_clock::now();
  const coldmri::ReverseResult res = coldmri::reconstruct(y, *restorer, cfg);
  const auto t1 = std::chrono::steady_clock::now();
  const double seconds = std::chrono::duration<double>(t1 - t0).count();

  if (!res.start_mask_covered) {
    std::cerr << "warning: the task mask does not cover the family mask at the"
                 " start step; unmeasured start columns stay zero\n";
  }

  fs::create_directories(f.out_dir);
  const fs::path out_dir(f.out_dir);
  coldmri::write_cim(out_dir / "recon.cim", res.recon);
  const coldmri::ComplexImage zf = coldmri::zero_fill(y, *mask);
  coldmri::write_cim(out_dir / "zerofill.cim", zf);
  std::vector<std::string> trace_rows;
  trace_rows.reserve(res.trace.size());
  for (const auto& row : res.trace) {
    trace_rows.push_back(std::to_string(row.t) + "," +
                         coldmri::format_double(row.dcc_correction_l2));
  }
  coldmri::write_csv(out_dir / "trace.csv", "t,dcc_correction_l2", trace_rows);
  for (const auto& [t, snap] : res.snapshots) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%03d.cim", t);
    coldmri::write_cim(out_dir / name, snap);
    if (f.pgm) {
      std::snprintf(name, sizeof name, "snapshot_%03d.pgm", t);
      coldmri::write_pgm(out_dir / name, snap);
    }
  }
  if (f.pgm) {
    coldmri::write_pgm(out_dir / "truth.pgm", truth);
    coldmri::write_pgm(out_dir / "zerofill.pgm", zf);
    coldmri::write_pgm(out_dir / "recon.pgm", res.recon);
  }

  const double rel = coldmri::rel_l2_error(res.recon, truth);
  const double p = coldmri::psnr(res.recon, truth);
  const double s = coldmri::ssim(res.recon, truth);

  std::vector<std::string> verify_checks;
  bool verify_failed = false;
  if (f.verify) {
    // Measured k-space columns must survive whenever the run guarantees it:
    // always under the terminal projection, and for family-member masks even
    // without it (their columns are never rewritten by the reverse updates).
    const bool snapped =
        family.mask(res.start_step).same_selection(*mask);
    if (cfg.terminal_dc || snapped) {
      const coldmri::KSpace k = coldmri::fft2_centered(res.recon);
      double num = 0.0, den = 0.0;
      for (int r = 0; r < k.height(); ++r) {
        for (int c = 0; c < k.width(); ++c) {
          if (!mask->is_selected(c)) continue;
          num += std::norm(k(r, c) - y(r, c));
          den += std::norm(y(r, c));
        }
      }
      const bool ok = den > 0.0 && std::sqrt(num / den) <= 1e-9;
      verify_checks.push_back(std::string("measured_columns_preserved=") +
                              (ok ? "pass" : "fail"));
      verify_failed = verify_failed || !ok;
    }
    if (f.restorer.oracle && res.start_mask_covered &&
        (cfg.terminal_dc || snapped)) {
      const bool ok = rel <= 1e-8;
      verify_checks.push_back(std::string("oracle_recovery=") +
                              (ok ? "pass" : "fail"));
      verify_failed = verify_failed || !ok;
    }
  }

  auto entries = schedule_manifest_entries(f.sched, truth.width());
  entries.insert(
      entries.end(),
      {{"input", f.input},
       {"out_dir", f.out_dir},
       {"restorer", restorer_name(f.restorer)},
       {"mask_source", mask_source},
       {"mask_cols", std::to_string(mask->num_selected())},
       {"af", coldmri::format_double(mask->accel_factor())},
       {"center_fraction", coldmri::format_double(f.center_fraction)},
       {"seed", std::to_string(f.seed)},
       {"dcc", f.dcc},
       {"spc", f.spc},
       {"terminal_dc", f.terminal_dc},
       {"start_step", std::to_string(res.start_step)},
       {"start_mask_covered", res.start_mask_covered ? "true" : "false"},
       {"snapshot_every", std::to_string(f.snapshot_every)},
       {"psnr", coldmri::format_double(p)},
       {"ssim", coldmri::format_double(s)},
       {"rel_l2", coldmri::format_double(rel)},
       {"recon_seconds", coldmri::format_double(seconds)}});
  for (const std::string& check : verify_checks) {
    const auto eq = check.find('=');
    entries.emplace_back("verify_" + check.substr(0, eq), check.substr(eq + 1));
  }
  write_run_manifest(f.out_dir, "recon", std::move(entries));

  std::cout << "steps: " << res.start_step << "\n"
            << "psnr: " << coldmri::format_double(p) << "\n"
            << "ssim: " << coldmri::format_double(s) << "\n"
            << "rel_l2: " << coldmri::format_double(rel) << "\n"
            << "seconds: " << coldmri::format_double(seconds) << "\n";
  for (const std::string& check : verify_checks) {
    std::cout << "verify " << check << "\n";
  }
  if (verify_failed) {
    std::cerr << "error: verification failed\n";
    throw ExitWithCode{kExitConfig};
  }
}

// ---------------------------------------------------------------------------
// eval

struct EvalCmdFlags {
  ScheduleFlags sched;
  RestorerFlags restorer;
  std::string data_dir;
  std::string out_dir;
  std::vector<double> afs{8.0, 16.0};
  std::vector<std::string> kinds{"lin", "log"};
  double center_fraction = 0.04;
  bool aligned = false;
  std::uint64_t seed = 7;
  std::string dcc = "on";
  std::string spc = "on";
  std::string terminal_dc = "on";
  int jobs = 1;
  std::vector<int> sweep_start;  // two values: first and last start step
  int sweep_step = 5;
  double sweep_af = 8.0;
};

void run_eval(const EvalCmdFlags& f) {
  const coldmri::Dataset ds = coldmri::load_dataset(f.data_dir);
  const int width = ds.images.front().width();
  for (const coldmri::ComplexImage& img : ds.images) {
    coldmri::require_same_shape(img, ds.images.front(), "eval dataset");
  }

  // Families per schedule kind (kept alive for the whole run).
  std::deque<coldmri::MaskFamily> families;
  std::vector<const coldmri::MaskFamily*> family_of_kind;
  for (const std::string& kind : f.kinds) {
    ScheduleFlags sf = f.sched;
    sf.kind = kind;
    families.push_back(build_family(sf, width));
    family_of_kind.push_back(&families.back());
  }

  // Task masks: one per acceleration (shared across kinds), or one per
  // (acceleration, kind) when aligned to the family.
  std::deque<coldmri::ColumnMask> masks;
  std::vector<coldmri::ReverseRunConfig> cases;
  for (const double af : f.afs) {
    if (f.aligned) {
      for (std::size_t ki = 0; ki < f.kinds.size(); ++ki) {
        masks.push_back(coldmri::gen_aligned_task_mask(*family_of_kind[ki], af,
                                                       f.seed));
        coldmri::ReverseRunConfig cfg;
        cfg.family = family_of_kind[ki];
        cfg.task_mask = &masks.back();
        cfg.use_dcc = onoff(f.dcc);
        cfg.use_spc = onoff(f.spc);
        cfg.terminal_dc = onoff(f.terminal_dc);
        cases.push_back(cfg);
      }
    } else {
      masks.push_back(
          coldmri::gen_task_mask(width, af, f.center_fraction, f.seed));
      for (std::size_t ki = 0; ki < f.kinds.size(); ++ki) {
        coldmri::ReverseRunConfig cfg;
        cfg.family = family_of_kind[ki];
        cfg.task_mask = &masks.back();
        cfg.use_dcc = onoff(f.dcc);
        cfg.use_spc = onoff(f.spc);
        cfg.terminal_dc = onoff(f.terminal_dc);
        cases.push_back(cfg);
      }
    }
  }

  // Restorer: single model/baseline, or the per-slice exact-recovery bound.
  std::optional<coldmri::ConvRestorer> trained;
  const coldmri::ZeroFillRestorer zerofill;
  std::vector<coldmri::OracleRestorer> oracles;
  coldmri::RestorerProvider provider;
  if (f.restorer.oracle) {
    oracles.reserve(ds.images.size());
    for (const coldmri::ComplexImage& img : ds.images) oracles.emplace_back(img);
    provider = [&oracles](std::size_t si) { return &oracles[si]; };
  } else if (f.restorer.zerofill) {
    provider = [&zerofill](std::size_t) {
      return static_cast<const coldmri::Restorer*>(&zerofill);
    };
  } else {
    trained.emplace(load_conv_restorer(f.restorer.ckpt_path, families.front()));
    provider = [&trained](std::size_t) {
      return static_cast<const coldmri::Restorer*>(&*trained);
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  const coldmri::EvalReport report = coldmri::evaluate(ds, provider, cases, f.jobs);
  const auto t1 = std::chrono::steady_clock::now();

  fs::create_directories(f.out_dir);
  const fs::path out_dir(f.out_dir);
  std::vector<std::string> rows;
  rows.reserve(report.rows.size());
  for (const coldmri::EvalRow& r : report.rows) {
    rows.push_back(r.slice + "," + coldmri::format_double(r.accel_factor) +
                   "," + r.schedule + "," + coldmri::format_double(r.ssim) +
                   "," + coldmri::format_double(r.psnr) + "," +
                   std::to_string(r.steps) + "," +
                   coldmri::format_double(r.seconds));
  }
  coldmri::write_csv(out_dir / "report.csv",
                     "slice,af,schedule,ssim,psnr,steps,seconds", rows);

  std::vector<std::string> summary_rows;
  summary_rows.reserve(report.summaries.size());
  for (const coldmri::EvalSummary& s : report.summaries) {
    summary_rows.push_back(
        coldmri::format_double(s.accel_factor) + "," + s.schedule + "," +
        coldmri::format_double(s.psnr.mean) + "," +
        coldmri::format_double(s.psnr.stddev) + "," +
        coldmri::format_double(s.ssim.mean) + "," +
        coldmri::format_double(s.ssim.stddev) + "," + std::to_string(s.psnr.n));
  }
  coldmri::write_csv(out_dir / "summary.csv",
                     "af,schedule,psnr_mean,psnr_std,ssim_mean,ssim_std,n",
                     summary_rows);

  // Optional start-step sweep at a fixed acceleration.
  if (!f.sweep_start.empty()) {
    const int lo = f.sweep_start[0];
    const int hi = f.sweep_start[1];
    if (lo < 0 || hi < lo) {
      throw coldmri::ConfigError("--sweep-start wants FIRST LAST with 0 <= FIRST <= LAST");
    }
    if (f.sweep_step < 1) throw coldmri::ConfigError("--sweep-step must be >= 1");
    std::deque<coldmri::ColumnMask> sweep_masks;
    std::vector<coldmri::ReverseRunConfig> sweep_cases;
    std::vector<std::pair<std::string, int>> sweep_labels;
    for (std::size_t ki = 0; ki < f.kinds.size(); ++ki) {
      if (f.aligned) {
        sweep_masks.push_back(coldmri::gen_aligned_task_mask(
            *family_of_kind[ki], f.sweep_af, f.seed));
      } else {
        sweep_masks.push_back(coldmri::gen_task_mask(width, f.sweep_af,
                                                     f.center_fraction, f.seed));
      }
      for (int start = lo; start <= hi; start += f.sweep_step) {
        coldmri::ReverseRunConfig cfg;
        cfg.family = family_of_kind[ki];
        cfg.task_mask = &sweep_masks.back();
        cfg.use_dcc = onoff(f.dcc);
        cfg.use_spc = onoff(f.spc);
        cfg.terminal_dc = onoff(f.terminal_dc);
        cfg.start_override = start;
        sweep_cases.push_back(cfg);
        sweep_labels.emplace_back(f.kinds[ki], start);
      }
    }
    const coldmri::EvalReport sweep =
        coldmri::evaluate(ds, provider, sweep_cases, f.jobs);
    std::vector<std::string> sweep_rows;
    sweep_rows.reserve(sweep.summaries.size());
    for (std::size_t i = 0; i < sweep.summaries.size(); ++i) {
      const coldmri::EvalSummary& s = sweep.summaries[i];
      sweep_rows.push_back(sweep_labels[i].first + "," +
                           std::to_string(sweep_labels[i].second) + "," +
                           coldmri::format_double(s.psnr.mean) + "," +
                           coldmri::format_double(s.psnr.stddev) + "," +
                           coldmri::format_double(s.ssim.mean) + "," +
                           coldmri::format_double(s.ssim.stddev));
    }
    coldmri::write_csv(out_dir / "sweep.csv",
                       "kind,start,psnr_mean,psnr_std,ssim_mean,ssim_std",
                       sweep_rows);
  }

  auto entries = schedule_manifest_entries(f.sched, width);
  std::string af_list, kind_list;
  for (const double af : f.afs) {
    if (!af_list.empty()) af_list += ";";
    af_list += coldmri::format_double(af);
  }
  for (const std::string& kind : f.kinds) {
    if (!kind_list.empty()) kind_list += ";";
    kind_list += kind;
  }
  entries.insert(entries.end(),
                 {{"data_dir", f.data_dir},
                  {"out_dir", f.out_dir},
                  {"slices", std::to_string(ds.images.size())},
                  {"restorer", restorer_name(f.restorer)},
                  {"af_list", af_list},
                  {"kind_list", kind_list},
                  {"aligned", f.aligned ? "true" : "false"},
                  {"center_fraction", coldmri::format_double(f.center_fraction)},
                  {"seed", std::to_string(f.seed)},
                  {"dcc", f.dcc},
                  {"spc", f.spc},
                  {"terminal_dc", f.terminal_dc},
                  {"jobs", std::to_string(f.jobs)},
                  {"eval_seconds",
                   coldmri::format_double(
                       std::chrono::duration<double>(t1 - t0).count())}});
  if (!f.sweep_start.empty()) {
    entries.emplace_back("sweep_start", std::to_string(f.sweep_start[0]) + ";" +
                                            std::to_string(f.sweep_start[1]));
    entries.emplace_back("sweep_step", std::to_string(f.sweep_step));
    entries.emplace_back("sweep_af", coldmri::format_double(f.sweep_af));
  }
  write_run_manifest(f.out_dir, "eval", std::move(entries));

  for (const coldmri::EvalSummary& s : report.summaries) {
    std::cout << "af=" << coldmri::format_double(s.accel_factor)
              << " kind=" << s.schedule
              << " psnr=" << coldmri::format_double(s.psnr.mean) << "+/-"
              << coldmri::format_double(s.psnr.stddev)
              << " ssim=" << coldmri::format_double(s.ssim.mean) << "+/-"
              << coldmri::format_double(s.ssim.stddev) << "\n";
  }
}

/// Expands `--config FILE` into explicit long options for the chosen
/// subcommand.  Precedence is defaults < config file < command-line flags:
/// a key is injected only when the matching flag is absent from the command
/// line, and a key repeated in the file keeps its last value.  Config files
/// are plain `key=value` lines with `#` comments; keys mirror the long
/// option names without the leading dashes.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::size_t sub = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!args[i].empty() && args[i][0] != '-') {
      sub = i;
      break;
    }
  }
  if (sub == args.size()) return args;

  std::string file;
  for (std::size_t i = sub + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[i + 1];
      break;
    }
    constexpr std::string_view kPrefix = "--config=";
    if (args[i].rfind(kPrefix, 0) == 0) {
      file = args[i].substr(kPrefix.size());
      break;
    }
  }
  if (file.empty()) return args;

  std::map<std::string, std::string> kv;
  for (const auto& [key, value] : coldmri::read_kv_file(file)) kv[key] = value;
  kv.erase("config");

  const std::size_t given_end = args.size();
  for (const auto& [key, value] : kv) {
    const std::string flag = "--" + key;
    bool given = false;
    for (std::size_t i = sub + 1; i < given_end && !given; ++i) {
      given = args[i] == flag || args[i].rfind(flag + "=", 0) == 0;
    }
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cold-diffusion reconstruction of undersampled MRI scans"};
  app.set_version_flag("--version", coldmri::kVersion);
  app.require_subcommand(1);

  try {
    const std::uint64_t seed0 = default_seed();
    std::string config_file;  // shared by every subcommand; echoed in manifests

    PhantomFlags phantom;
    phantom.seed = seed0;
    CLI::App* p = app.add_subcommand("phantom", "generate a synthetic dataset");
    p->add_option("--config", config_file,
                  "key=value config file (defaults < config < flags)");
    p->add_option("--count", phantom.count, "number of slices")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    p->add_option("--size", phantom.size, "square slice size in pixels")
        ->check(CLI::Range(16, 4096))
        ->capture_default_str();
    p->add_option("--seed", phantom.seed, "dataset seed")->capture_default_str();
    p->add_option("--out-dir", phantom.out_dir, "output directory")->required();
    p->callback([&phantom] { run_phantom(phantom); });

    ScheduleCmdFlags schedule;
    CLI::App* s = app.add_subcommand("schedule", "print the sampling-rate schedule");
    s->add_option("--config", config_file,
                  "key=value config file (defaults < config < flags)");
    add_schedule_flags(s, schedule.sched);
    s->add_option("--width", schedule.width, "k-space width in columns")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    s->add_option("--af", schedule.afs, "acceleration factors to locate")
        ->capture_default_str();
    s->callback([&schedule] { run_schedule(schedule); });

    MaskCmdFlags mask;
    mask.seed = seed0;
    CLI::App* m = app.add_subcommand("mask", "generate a task mask or mask family");
    m->add_option("--config", config_file,
                  "key=value config file (defaults < config < flags)");
    add_schedule_flags(m, mask.sched);
    m->add_option("--width", mask.width, "k-space width in columns")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    m->add_option("--af", mask.af, "acceleration factor")
        ->check(CLI::Range(1.0, 1e9))
        ->capture_default_str();
    m->add_option("--center-fraction", mask.center_fraction,
                  "fully sampled centre fraction")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    m->add_option("--seed", mask.seed, "mask seed")->capture_default_str();
    auto* fam_flag =
        m->add_flag("--family", mask.family, "write the whole mask family");
    m->add_flag("--aligned", mask.aligned,
                "draw the mask from the family column order")
        ->excludes(fam_flag);
    m->add_option("--out", mask.out, "output file")->required();
    m->callback([&mask] { run_mask(mask); });

    TrainCmdFlags train;
    train.seed = seed0;
    CLI::App* t = app.add_subcommand("train", "train the convolutional restorer");
    t->add_option("--config", config_file,
                  "key=value config file (defaults < config < flags)");
    add_schedule_flags(t, train.sched);
    t->add_option("--data", train.data_dir, "dataset directory")->required();
    t->add_option("--out-dir", train.out_dir, "output directory")->required();
    t->add_option("--channels", train.channels, "hidden channels")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    t->add_option("--depth", train.depth, "number of conv layers")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    t->add_option("--lr", train.learning_rate, "Adam learning rate")
        ->capture_default_str();
    t->add_option("--batch", train.batch_size, "samples per gradient step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    t->add_option("--grad-steps", train.grad_steps, "gradient steps")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    t->add_option("--loss", train.loss, "training loss")
        ->check(CLI::IsMember({"l1", "l2"}))
        ->capture_default_str();
    t->add_option("--log-every", train.log_every, "loss log cadence")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    t->add_option("--jobs", train.jobs, "worker threads within a batch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    t->add_option("--seed", train.seed, "training seed")->capture_default_str();
    t->callback([&train] { run_train(train); });

    ReconCmdFlags recon;
    recon.seed = seed0;
    CLI::App* r = app.add_subcommand("recon", "reconstruct one undersampled slice");
    r->add_option("--config", config_file,
                  "key=value config file (defaults < config < flags)");
    add_schedule_flags(r, recon.sched);
    add_restorer_flags(r, recon.restorer);
    r->add_option("--input", recon.input, "clean complex image (the measurement is synthesised)")
        ->required();
    r->add_option("--out-dir", recon.out_dir, "output directory")->required();
    auto* mask_opt =
        r->add_option("--mask", recon.mask_path, "task mask file (overrides --af)");
    r->add_option("--af", recon.af, "acceleration factor")
        ->check(CLI::Range(1.0, 1e9))
        ->capture_default_str()
        ->excludes(mask_opt);
    r->add_option("--center-fraction", recon.center_fraction,
                  "fully sampled centre fraction of the generated mask")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    r->add_flag("--aligned", recon.aligned,
                "draw the generated mask from the family column order");
    r->add_option("--seed", recon.seed, "mask seed")->capture_default_str();
    r->add_option("--dcc", recon.dcc, "per-step data consistency")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    r->add_option("--spc", recon.spc, "start from the located step instead of T")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    r->add_option("--terminal-dc", recon.terminal_dc,
                  "replace measured columns once more at the end")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    r->add_option("--start", recon.start, "explicit start step (overrides --spc)")
        ->check(CLI::NonNegativeNumber);
    r->add_option("--snapshot-every", recon.snapshot_every,
                  "write every k-th intermediate image (0 = none)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    r->add_flag("--pgm", recon.pgm, "also write grayscale magnitude previews");
    r->add_flag("--verify", recon.verify,
                "re-check run invariants and fail on violation");
    r->callback([&recon] { run_recon(recon); });

    EvalCmdFlags eval;
    eval.seed = seed0;
    CLI::App* e = app.add_subcommand("eval", "evaluate a restorer over a dataset grid");
    e->add_option("--config", config_file,
                  "key=value config file (defaults < config < flags)");
    add_schedule_flags(e, eval.sched);
    add_restorer_flags(e, eval.restorer);
    e->add_option("--data", eval.data_dir, "dataset directory")->required();
    e->add_option("--out-dir", eval.out_dir, "output directory")->required();
    e->add_option("--af", eval.afs, "acceleration factors")
        ->capture_default_str();
    e->add_option("--kinds", eval.kinds, "schedule kinds to evaluate")
        ->check(CLI::IsMember({"lin", "log"}))
        ->capture_default_str();
    e->add_option("--center-fraction", eval.center_fraction,
                  "fully sampled centre fraction of generated masks")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    e->add_flag("--aligned", eval.aligned,
                "draw task masks from the family column order");
    e->add_option("--seed", eval.seed, "mask seed")->capture_default_str();
    e->add_option("--dcc", eval.dcc, "per-step data consistency")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    e->add_option("--spc", eval.spc, "start from the located step instead of T")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    e->add_option("--terminal-dc", eval.terminal_dc,
                  "replace measured columns once more at the end")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    e->add_option("--jobs", eval.jobs, "parallel reconstruction workers")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    auto* sweep_opt = e->add_option("--sweep-start", eval.sweep_start,
                                    "sweep explicit start steps FIRST LAST")
                          ->expected(2);
    e->add_option("--sweep-step", eval.sweep_step, "sweep stride")
        ->check(CLI::PositiveNumber)
        ->capture_default_str()
        ->needs(sweep_opt);
    e->add_option("--sweep-af", eval.sweep_af, "acceleration for the sweep")
        ->check(CLI::Range(1.0, 1e9))
        ->capture_default_str()
        ->needs(sweep_opt);
    e->callback([&eval] { run_eval(eval); });

    try {
      std::vector<std::string> args = expand_config_args(argc, argv);
      std::reverse(args.begin(), args.end());  // vector parse wants newest last
      app.parse(std::move(args));
    } catch (const CLI::CallForHelp& err) {
      return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
      return app.exit(err);
    } catch (const CLI::CallForVersion& err) {
      return app.exit(err);
    } catch (const CLI::ParseError& err) {
      app.exit(err);
      return kExitUsage;
    }
    return 0;
  } catch (const ExitWithCode& e) {
    return e.code;
  } catch (const coldmri::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const coldmri::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kExitInternal;
  }
}
