// Python module exposing the core operations: phantoms, centered FFTs,
// schedules, mask families, degradation, reconstruction, metrics, training,
// and checkpoint IO.  Images cross the boundary as 2-D complex128 arrays.

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coldmri/degradation.hpp"
#include "coldmri/errors.hpp"
#include "coldmri/fft.hpp"
#include "coldmri/image.hpp"
#include "coldmri/io.hpp"
#include "coldmri/masks.hpp"
#include "coldmri/metrics.hpp"
#include "coldmri/phantom.hpp"
#include "coldmri/restorer.hpp"
#include "coldmri/sampler.hpp"
#include "coldmri/version.hpp"

namespace py = pybind11;
using namespace coldmri;

namespace {

using ComplexArray =
    py::array_t<Complex, py::array::c_style | py::array::forcecast>;

template <class Tag>
Field2D<Tag> to_field(const ComplexArray& a) {
  if (a.ndim() != 2) {
    throw ShapeError("expected a 2-D complex array, got " +
                     std::to_string(a.ndim()) + " dimensions");
  }
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  std::vector<Complex> data(a.data(), a.data() + a.size());
  return Field2D<Tag>(h, w, std::move(data));
}

template <class Tag>
py::array_t<Complex> from_field(const Field2D<Tag>& f) {
  py::array_t<Complex> out({f.height(), f.width()});
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

ScheduleKind parse_kind(const std::string& kind) {
  if (kind == "lin") return ScheduleKind::kLinear;
  if (kind == "log") return ScheduleKind::kLog;
  throw ConfigError("schedule kind must be 'lin' or 'log', got '" + kind + "'");
}

std::string kind_name(ScheduleKind kind) {
  return kind == ScheduleKind::kLinear ? "lin" : "log";
}

ColumnMask mask_from_array(
    const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>&
        selected,
    double center_fraction, double accel_factor) {
  if (selected.ndim() != 1) {
    throw ShapeError("mask selection must be a 1-D array");
  }
  std::vector<std::uint8_t> bytes(selected.data(),
                                  selected.data() + selected.size());
  for (std::uint8_t& b : bytes) b = b ? 1 : 0;
  return ColumnMask(static_cast<int>(selected.size()), std::move(bytes),
                    center_fraction, accel_factor);
}

py::dict run_reconstruct(const ComplexArray& y, const MaskFamily& family,
                         const ColumnMask& mask,
                         const std::optional<ComplexArray>& oracle,
                         const std::optional<ModelCheckpoint>& checkpoint,
                         bool use_dcc, bool use_spc, bool terminal_dc,
                         std::optional<int> start, int snapshot_every) {
  if (oracle.has_value() && checkpoint.has_value()) {
    throw ConfigError("pass either an oracle truth or a checkpoint, not both");
  }
  const KSpace measured = to_field<SpectrumTag>(y);

  std::optional<OracleRestorer> oracle_restorer;
  std::optional<ConvRestorer> conv_restorer;
  const Restorer* restorer = nullptr;
  ZeroFillRestorer zf;
  if (oracle.has_value()) {
    oracle_restorer.emplace(to_field<ImageTag>(*oracle));
    restorer = &*oracle_restorer;
  } else if (checkpoint.has_value()) {
    conv_restorer.emplace(make_restorer(*checkpoint));
    restorer = &*conv_restorer;
  } else {
    restorer = &zf;
  }

  ReverseRunConfig cfg;
  cfg.family = &family;
  cfg.task_mask = &mask;
  cfg.use_dcc = use_dcc;
  cfg.use_spc = use_spc;
  cfg.terminal_dc = terminal_dc;
  cfg.start_override = start;
  cfg.snapshot_every = snapshot_every;
  const ReverseResult res = reconstruct(measured, *restorer, cfg);

  py::list trace;
  for (const TraceRow& row : res.trace) {
    trace.append(py::make_tuple(row.t, row.dcc_correction_l2));
  }
  py::list snapshots;
  for (const auto& [t, img] : res.snapshots) {
    snapshots.append(py::make_tuple(t, from_field(img)));
  }
  py::dict out;
  out["recon"] = from_field(res.recon);
  out["start_step"] = res.start_step;
  out["start_mask_covered"] = res.start_mask_covered;
  out["trace"] = trace;
  out["snapshots"] = snapshots;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "cold-diffusion reconstruction of undersampled MRI scans";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "Error");

  py::class_<ScheduleSpec>(m, "Schedule")
      .def(py::init([](const std::string& kind, int total_steps, double sr_min) {
             return ScheduleSpec(parse_kind(kind), total_steps, sr_min);
           }),
           py::arg("kind"), py::arg("total_steps"), py::arg("sr_min"),
           "Sampling-rate schedule; kind is 'lin' or 'log'.")
      .def_property_readonly(
          "kind", [](const ScheduleSpec& s) { return kind_name(s.kind()); })
      .def_property_readonly("total_steps", &ScheduleSpec::total_steps)
      .def_property_readonly("sr_min", &ScheduleSpec::sr_min)
      .def(
          "rate", [](const ScheduleSpec& s, int t) { return sampling_rate(s, t); },
          py::arg("t"), "SR_t for t in [0, total_steps].")
      .def(
          "locate",
          [](const ScheduleSpec& s, double task_sr) {
            return locate_start_step(task_sr, s);
          },
          py::arg("task_sr"), "Smallest t with SR_t <= task_sr.");

  py::class_<ColumnMask>(m, "ColumnMask")
      .def(py::init(&mask_from_array), py::arg("selected"),
           py::arg("center_fraction"), py::arg("accel_factor"),
           "Cartesian column mask from a 1-D 0/1 array.")
      .def_property_readonly("width", &ColumnMask::width)
      .def_property_readonly("num_selected", &ColumnMask::num_selected)
      .def_property_readonly("sampling_rate", &ColumnMask::sampling_rate)
      .def_property_readonly("center_fraction", &ColumnMask::center_fraction)
      .def_property_readonly("accel_factor", &ColumnMask::accel_factor)
      .def("selected",
           [](const ColumnMask& mask) {
             py::array_t<std::uint8_t> out(mask.width());
             std::copy(mask.selected().begin(), mask.selected().end(),
                       out.mutable_data());
             return out;
           })
      .def("same_selection", &ColumnMask::same_selection, py::arg("other"))
      .def("is_superset_of", &ColumnMask::is_superset_of, py::arg("other"));

  py::class_<MaskFamily>(m, "MaskFamily")
      .def_property_readonly(
          "schedule", [](const MaskFamily& f) { return f.schedule(); })
      .def_property_readonly("width", &MaskFamily::width)
      .def_property_readonly("total_steps", &MaskFamily::total_steps)
      .def_property_readonly("center_fraction", &MaskFamily::center_fraction)
      .def_property_readonly("seed", &MaskFamily::seed)
      .def("mask", &MaskFamily::mask, py::arg("t"),
           py::return_value_policy::reference_internal,
           "Nested mask for step t.");

  m.def(
      "build_family",
      [](const ScheduleSpec& spec, int width, double center_fraction,
         std::uint64_t seed) {
        return build_mask_family(spec, width, center_fraction, seed);
      },
      py::arg("schedule"), py::arg("width"), py::arg("center_fraction"),
      py::arg("seed"), "Nested mask family driven by the schedule.");
  m.def("gen_task_mask", &gen_task_mask, py::arg("width"),
        py::arg("accel_factor"), py::arg("center_fraction"), py::arg("seed"));
  m.def("gen_aligned_task_mask", &gen_aligned_task_mask, py::arg("family"),
        py::arg("accel_factor"), py::arg("seed"),
        "Task mask containing the family mask at the located start step.");

  m.def(
      "make_phantom",
      [](int height, int width, std::uint64_t seed) {
        return from_field(make_phantom(height, width, seed));
      },
      py::arg("height"), py::arg("width"), py::arg("seed"),
      "Seeded synthetic complex slice with smooth phase.");

  m.def(
      "fft2_centered",
      [](const ComplexArray& x) {
        return from_field(fft2_centered(to_field<ImageTag>(x)));
      },
      py::arg("image"), "Unitary centered 2-D FFT (DC at H/2, W/2).");
  m.def(
      "ifft2_centered",
      [](const ComplexArray& k) {
        return from_field(ifft2_centered(to_field<SpectrumTag>(k)));
      },
      py::arg("kspace"));

  m.def(
      "degrade",
      [](const ComplexArray& x, const MaskFamily& family, int t) {
        return from_field(DegradationOp(family).degrade(to_field<ImageTag>(x), t));
      },
      py::arg("image"), py::arg("family"), py::arg("t"),
      "Column-masked measurement of the slice at step t, back in image space.");
  m.def(
      "measure",
      [](const ComplexArray& x, const ColumnMask& mask) {
        return from_field(measure(to_field<ImageTag>(x), mask));
      },
      py::arg("image"), py::arg("mask"),
      "Masked k-space measurement of a clean slice.");
  m.def(
      "zero_fill",
      [](const ComplexArray& y, const ColumnMask& mask) {
        return from_field(zero_fill(to_field<SpectrumTag>(y), mask));
      },
      py::arg("kspace"), py::arg("mask"),
      "Direct inverse transform of the masked measurement.");

  m.def("reconstruct", &run_reconstruct, py::arg("kspace"), py::arg("family"),
        py::arg("mask"), py::kw_only(), py::arg("oracle") = std::nullopt,
        py::arg("checkpoint") = std::nullopt, py::arg("use_dcc") = true,
        py::arg("use_spc") = true, py::arg("terminal_dc") = true,
        py::arg("start") = std::nullopt, py::arg("snapshot_every") = 0,
        "Conditioned reverse process on a masked measurement.  The restorer "
        "is the ground-truth oracle when `oracle` is given, a trained model "
        "when `checkpoint` is given, and zero-filling otherwise.");

  m.def(
      "psnr",
      [](const ComplexArray& recon, const ComplexArray& truth) {
        return psnr(to_field<ImageTag>(recon), to_field<ImageTag>(truth));
      },
      py::arg("recon"), py::arg("truth"),
      "Peak signal-to-noise ratio in dB, capped at 99.");
  m.def(
      "ssim",
      [](const ComplexArray& recon, const ComplexArray& truth) {
        return ssim(to_field<ImageTag>(recon), to_field<ImageTag>(truth));
      },
      py::arg("recon"), py::arg("truth"),
      "Mean SSIM between magnitude images (11x11 Gaussian window).");

  py::class_<ModelCheckpoint>(m, "Checkpoint")
      .def_property_readonly(
          "channels", [](const ModelCheckpoint& c) { return c.arch.channels; })
      .def_property_readonly(
          "depth", [](const ModelCheckpoint& c) { return c.arch.depth; })
      .def_property_readonly(
          "total_steps", [](const ModelCheckpoint& c) { return c.total_steps; })
      .def_property_readonly("params",
                             [](const ModelCheckpoint& c) {
                               py::array_t<float> out(c.params.size());
                               std::copy(c.params.begin(), c.params.end(),
                                         out.mutable_data());
                               return out;
                             })
      .def_property_readonly("metadata", [](const ModelCheckpoint& c) {
        py::dict d;
        for (const auto& [k, v] : c.metadata) d[py::str(k)] = v;
        return d;
      });

  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("ckpt"));

  m.def(
      "train",
      [](const std::vector<ComplexArray>& images, const MaskFamily& family,
         int channels, int depth, double learning_rate, int batch_size,
         int grad_steps, const std::string& loss, std::uint64_t seed,
         int jobs) {
        std::vector<ComplexImage> dataset;
        dataset.reserve(images.size());
        for (const ComplexArray& a : images) {
          dataset.push_back(to_field<ImageTag>(a));
        }
        TrainConfig cfg;
        cfg.learning_rate = learning_rate;
        cfg.batch_size = batch_size;
        cfg.grad_steps = grad_steps;
        if (loss == "l1") {
          cfg.loss_norm = LossNorm::kL1;
        } else if (loss == "l2") {
          cfg.loss_norm = LossNorm::kL2;
        } else {
          throw ConfigError("loss must be 'l1' or 'l2', got '" + loss + "'");
        }
        cfg.seed = seed;
        cfg.jobs = jobs;
        TrainResult result = train(dataset, family, ConvArch{channels, depth}, cfg);
        py::list log;
        for (const auto& [step, value] : result.loss_log) {
          log.append(py::make_tuple(step, value));
        }
        return py::make_tuple(std::move(result.checkpoint), log);
      },
      py::arg("images"), py::arg("family"), py::kw_only(),
      py::arg("channels") = 16, py::arg("depth") = 4,
      py::arg("learning_rate") = 1e-3, py::arg("batch_size") = 8,
      py::arg("grad_steps") = 2000, py::arg("loss") = "l1", py::arg("seed") = 0,
      py::arg("jobs") = 1,
      "Trains the residual CNN restorer; returns (checkpoint, loss_log).");

  m.def(
      "load_image",
      [](const std::filesystem::path& path) { return from_field(read_cim(path)); },
      py::arg("path"), "Reads a complex image file (CIM1).");
  m.def(
      "save_image",
      [](const std::filesystem::path& path, const ComplexArray& image) {
        write_cim(path, to_field<ImageTag>(image));
      },
      py::arg("path"), py::arg("image"), "Writes a complex image file (CIM1).");
}
