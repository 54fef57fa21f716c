#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coldmri/degradation.hpp"
#include "coldmri/image.hpp"

namespace coldmri {

/// Maps a degraded image at step t to an estimate of the clean image.
class Restorer {
 public:
  virtual ~Restorer() = default;
  virtual ComplexImage restore(const ComplexImage& degraded, int t) const = 0;
};

/// Returns the held ground truth regardless of input: the idealised restorer
/// used to validate the sampler independently of any trained model.
class OracleRestorer : public Restorer {
 public:
  explicit OracleRestorer(ComplexImage truth) : truth_(std::move(truth)) {}
  ComplexImage restore(const ComplexImage& degraded, int t) const override;

 private:
  ComplexImage truth_;
};

/// Identity restorer: the degraded (zero-filled) image is its own estimate.
class ZeroFillRestorer : public Restorer {
 public:
  ComplexImage restore(const ComplexImage& degraded, int t) const override;
};

/// Plain convolutional architecture: `depth` 3x3 zero-padded conv layers with
/// ReLU between them.  Input has 3 planes (real, imaginary, t/T), output has
/// 2 planes added residually onto the complex input.  depth == 1 collapses to
/// a single 3->2 layer.
struct ConvArch {
  int channels = 16;
  int depth = 4;
};

/// (in, out) plane counts per conv layer.
std::vector<std::pair<int, int>> conv_layer_shapes(const ConvArch& arch);

/// Total learnable parameter count (weights then bias, layer by layer).
std::size_t param_count(const ConvArch& arch);

/// Trainable residual CNN restorer.  Parameters are stored in float32 (the
/// checkpoint precision); every forward/backward computation runs in double.
class ConvRestorer : public Restorer {
 public:
  ConvRestorer(ConvArch arch, int total_steps, std::vector<float> params);

  /// Kaiming-uniform weight init with the final layer zeroed, so a freshly
  /// seeded model starts as the identity map.
  static ConvRestorer seeded(ConvArch arch, int total_steps, std::uint64_t seed);

  ComplexImage restore(const ComplexImage& degraded, int t) const override;

  const ConvArch& arch() const { return arch_; }
  int total_steps() const { return total_steps_; }
  std::span<const float> params() const { return params_; }
  void set_params(std::vector<float> params);

 private:
  ConvArch arch_;
  int total_steps_;
  std::vector<float> params_;
};

enum class LossNorm { kL1, kL2 };

/// Mean over the 2*H*W real components of restore(D(x, t), t) - x:
/// mean absolute value for L1, mean square for L2.
double training_loss(const Restorer& restorer, const ComplexImage& x_true, int t,
                     const DegradationOp& op, LossNorm norm);

/// Records one forward pass of a ConvRestorer and replays it in reverse for
/// analytic parameter gradients.
class TrainingGraph {
 public:
  explicit TrainingGraph(const ConvRestorer& restorer);
  ~TrainingGraph();
  TrainingGraph(TrainingGraph&&) noexcept;
  TrainingGraph& operator=(TrainingGraph&&) noexcept;

  /// Runs restore on D(x_true, t) and returns the training loss.
  double forward(const ComplexImage& x_true, int t, const DegradationOp& op,
                 LossNorm norm);

  /// d loss / d params for the most recent forward.  StateError when no
  /// forward has been run.
  std::vector<double> backward() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// One bias-corrected Adam update.  Moments and the update are computed in
/// double; the result is stored back into the float32 parameters.
void adam_step(std::vector<float>& params, std::span<const double> grads,
               AdamState& state, double learning_rate, const AdamParams& adam);

struct ModelCheckpoint {
  ConvArch arch;
  int total_steps = 0;
  std::vector<float> params;
  std::vector<std::pair<std::string, std::string>> metadata;
};

ConvRestorer make_restorer(const ModelCheckpoint& ckpt);

/// Training produced a non-finite loss or gradient.  Carries the last finite
/// parameter state so callers can save a partial checkpoint.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& msg, int step, ModelCheckpoint partial)
      : Error(msg), step_(step), partial_(std::move(partial)) {}

  int step() const { return step_; }
  const ModelCheckpoint& partial_checkpoint() const { return partial_; }

 private:
  int step_;
  ModelCheckpoint partial_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int grad_steps = 2000;
  LossNorm loss_norm = LossNorm::kL1;
  AdamParams adam;
  std::uint64_t seed = 0;
  int log_every = 1;
  int jobs = 1;  // batch samples evaluated in parallel; results are reduced
                 // in a fixed order, so the outcome is independent of jobs
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  std::vector<std::pair<int, double>> loss_log;  // (step, batch loss)
};

/// Trains a ConvRestorer on clean slices against the family's degradation.
/// Steps t are drawn uniformly from [1, T] and slices uniformly from the
/// dataset; everything is deterministic in cfg.seed.
TrainResult train(std::span<const ComplexImage> dataset, const MaskFamily& family,
                  ConvArch arch, const TrainConfig& cfg);

}  // namespace coldmri
