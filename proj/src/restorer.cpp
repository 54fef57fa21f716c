#include "coldmri/restorer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <utility>

#include "coldmri/rng.hpp"

namespace coldmri {
namespace {

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;

using Plane = std::vector<double>;
using Planes = std::vector<Plane>;

void validate_arch(const ConvArch& arch) {
  if (arch.depth < 1) {
    throw ConfigError("conv depth must be >= 1, got " + std::to_string(arch.depth));
  }
  if (arch.channels < 1) {
    throw ConfigError("conv channels must be >= 1, got " +
                      std::to_string(arch.channels));
  }
}

std::size_t layer_param_count(int in, int out) {
  return static_cast<std::size_t>(in) * out * kTaps + out;
}

// out[o](y, x) += sum_{i, ky, kx} w[o][i][ky][kx] * in[i](y + ky - 1, x + kx - 1)
// with zero padding; `out` must be pre-filled with the bias.
void conv_accumulate(const Planes& in, Planes& out, const float* w, int h, int ww) {
  const std::size_t n_in = in.size();
  const std::size_t n_out = out.size();
  std::size_t wi = 0;
  for (std::size_t o = 0; o < n_out; ++o) {
    Plane& dst = out[o];
    for (std::size_t i = 0; i < n_in; ++i) {
      const Plane& src = in[i];
      for (int ky = 0; ky < kKernel; ++ky) {
        const int dy = ky - 1;
        for (int kx = 0; kx < kKernel; ++kx, ++wi) {
          const int dx = kx - 1;
          const double wv = static_cast<double>(w[wi]);
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(ww, ww - dx);
          for (int y = y0; y < y1; ++y) {
            double* dr = dst.data() + static_cast<std::size_t>(y) * ww;
            const double* sr = src.data() + static_cast<std::size_t>(y + dy) * ww;
            for (int x = x0; x < x1; ++x) dr[x] += wv * sr[x + dx];
          }
        }
      }
    }
  }
}

// Transpose of conv_accumulate: scatter output gradients back to the input.
void conv_backprop_input(const Planes& d_out, Planes& d_in, const float* w, int h,
                         int ww) {
  const std::size_t n_in = d_in.size();
  const std::size_t n_out = d_out.size();
  std::size_t wi = 0;
  for (std::size_t o = 0; o < n_out; ++o) {
    const Plane& src = d_out[o];
    for (std::size_t i = 0; i < n_in; ++i) {
      Plane& dst = d_in[i];
      for (int ky = 0; ky < kKernel; ++ky) {
        const int dy = ky - 1;
        for (int kx = 0; kx < kKernel; ++kx, ++wi) {
          const int dx = kx - 1;
          const double wv = static_cast<double>(w[wi]);
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(ww, ww - dx);
          for (int y = y0; y < y1; ++y) {
            const double* sr = src.data() + static_cast<std::size_t>(y) * ww;
            double* dr = dst.data() + static_cast<std::size_t>(y + dy) * ww;
            for (int x = x0; x < x1; ++x) dr[x + dx] += wv * sr[x];
          }
        }
      }
    }
  }
}

// d_w[o][i][ky][kx] = sum_{y,x} d_out[o](y, x) * in[i](y + ky - 1, x + kx - 1);
// d_b[o] = sum d_out[o].
void conv_param_grads(const Planes& in, const Planes& d_out, double* d_w,
                      double* d_b, int h, int ww) {
  const std::size_t n_in = in.size();
  const std::size_t n_out = d_out.size();
  std::size_t wi = 0;
  for (std::size_t o = 0; o < n_out; ++o) {
    const Plane& g = d_out[o];
    for (std::size_t i = 0; i < n_in; ++i) {
      const Plane& src = in[i];
      for (int ky = 0; ky < kKernel; ++ky) {
        const int dy = ky - 1;
        for (int kx = 0; kx < kKernel; ++kx, ++wi) {
          const int dx = kx - 1;
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(ww, ww - dx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* gr = g.data() + static_cast<std::size_t>(y) * ww;
            const double* sr = src.data() + static_cast<std::size_t>(y + dy) * ww;
            for (int x = x0; x < x1; ++x) acc += gr[x] * sr[x + dx];
          }
          d_w[wi] = acc;
        }
      }
    }
    double acc = 0.0;
    for (double v : g) acc += v;
    d_b[o] = acc;
  }
}

Planes input_planes(const ComplexImage& x, int t, int total_steps) {
  const std::size_t n = x.size();
  Planes in(3, Plane(n));
  auto d = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    in[0][i] = d[i].real();
    in[1][i] = d[i].imag();
  }
  const double step_value = static_cast<double>(t) / total_steps;
  std::fill(in[2].begin(), in[2].end(), step_value);
  return in;
}

// acts[0] = input planes; acts[l] = output of layer l (post-ReLU except the
// last layer, which stays linear).
struct ForwardRecord {
  int h = 0;
  int w = 0;
  std::vector<Planes> acts;
};

void run_forward(const ConvArch& arch, std::span<const float> params,
                 const ComplexImage& x, int t, int total_steps,
                 ForwardRecord& rec) {
  const auto shapes = conv_layer_shapes(arch);
  rec.h = x.height();
  rec.w = x.width();
  rec.acts.clear();
  rec.acts.reserve(shapes.size() + 1);
  rec.acts.push_back(input_planes(x, t, total_steps));
  const std::size_t n = x.size();
  std::size_t off = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto [in_ch, out_ch] = shapes[l];
    const float* w = params.data() + off;
    const float* b = w + static_cast<std::size_t>(in_ch) * out_ch * kTaps;
    Planes out(static_cast<std::size_t>(out_ch));
    for (int o = 0; o < out_ch; ++o) {
      out[static_cast<std::size_t>(o)].assign(n, static_cast<double>(b[o]));
    }
    conv_accumulate(rec.acts.back(), out, w, rec.h, rec.w);
    if (l + 1 < shapes.size()) {
      for (Plane& p : out) {
        for (double& v : p) v = v > 0.0 ? v : 0.0;
      }
    }
    rec.acts.push_back(std::move(out));
    off += layer_param_count(in_ch, out_ch);
  }
}

ComplexImage residual_output(const ComplexImage& x, const ForwardRecord& rec) {
  const Planes& out = rec.acts.back();
  ComplexImage y(rec.h, rec.w);
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < yd.size(); ++i) {
    yd[i] = xd[i] + Complex{out[0][i], out[1][i]};
  }
  return y;
}

double loss_from_residual(const ComplexImage& estimate, const ComplexImage& truth,
                          LossNorm norm) {
  auto e = estimate.data();
  auto t = truth.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double re = e[i].real() - t[i].real();
    const double im = e[i].imag() - t[i].imag();
    if (norm == LossNorm::kL1) {
      acc += std::abs(re) + std::abs(im);
    } else {
      acc += re * re + im * im;
    }
  }
  return acc / (2.0 * static_cast<double>(e.size()));
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

ComplexImage OracleRestorer::restore(const ComplexImage& degraded, int /*t*/) const {
  require_same_shape(degraded, truth_, "OracleRestorer::restore");
  return truth_;
}

ComplexImage ZeroFillRestorer::restore(const ComplexImage& degraded, int /*t*/) const {
  require_finite(degraded, "ZeroFillRestorer::restore");
  return degraded;
}

std::vector<std::pair<int, int>> conv_layer_shapes(const ConvArch& arch) {
  validate_arch(arch);
  if (arch.depth == 1) return {{3, 2}};
  std::vector<std::pair<int, int>> shapes;
  shapes.reserve(static_cast<std::size_t>(arch.depth));
  shapes.emplace_back(3, arch.channels);
  for (int l = 1; l < arch.depth - 1; ++l) {
    shapes.emplace_back(arch.channels, arch.channels);
  }
  shapes.emplace_back(arch.channels, 2);
  return shapes;
}

std::size_t param_count(const ConvArch& arch) {
  std::size_t n = 0;
  for (const auto& [in, out] : conv_layer_shapes(arch)) {
    n += layer_param_count(in, out);
  }
  return n;
}

ConvRestorer::ConvRestorer(ConvArch arch, int total_steps, std::vector<float> params)
    : arch_(arch), total_steps_(total_steps), params_(std::move(params)) {
  validate_arch(arch_);
  if (total_steps_ < 1) {
    throw ConfigError("total_steps must be >= 1, got " +
                      std::to_string(total_steps_));
  }
  if (params_.size() != param_count(arch_)) {
    throw ConfigError("parameter count " + std::to_string(params_.size()) +
                      " does not match architecture (" +
                      std::to_string(param_count(arch_)) + " expected)");
  }
  for (float p : params_) {
    if (!std::isfinite(p)) {
      throw InvalidInputError("model parameters contain non-finite values");
    }
  }
}

ConvRestorer ConvRestorer::seeded(ConvArch arch, int total_steps,
                                  std::uint64_t seed) {
  const auto shapes = conv_layer_shapes(arch);
  std::vector<float> params;
  params.reserve(param_count(arch));
  Rng rng(seed);
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto [in, out] = shapes[l];
    const std::size_t count = layer_param_count(in, out);
    if (l + 1 == shapes.size()) {
      // Zero final layer: the residual net starts as the identity map.
      params.insert(params.end(), count, 0.0f);
      continue;
    }
    const double fan_in = static_cast<double>(in) * kTaps;
    const double w_bound = std::sqrt(6.0 / fan_in);
    const double b_bound = 1.0 / std::sqrt(fan_in);
    const std::size_t n_weights = static_cast<std::size_t>(in) * out * kTaps;
    for (std::size_t i = 0; i < n_weights; ++i) {
      params.push_back(static_cast<float>(rng.uniform(-w_bound, w_bound)));
    }
    for (int o = 0; o < out; ++o) {
      params.push_back(static_cast<float>(rng.uniform(-b_bound, b_bound)));
    }
  }
  return ConvRestorer(arch, total_steps, std::move(params));
}

ComplexImage ConvRestorer::restore(const ComplexImage& degraded, int t) const {
  if (t < 0 || t > total_steps_) {
    throw IndexError("step " + std::to_string(t) + " outside [0, " +
                     std::to_string(total_steps_) + "]");
  }
  require_finite(degraded, "ConvRestorer::restore");
  ForwardRecord rec;
  run_forward(arch_, params_, degraded, t, total_steps_, rec);
  return residual_output(degraded, rec);
}

void ConvRestorer::set_params(std::vector<float> params) {
  if (params.size() != params_.size()) {
    throw ConfigError("parameter count " + std::to_string(params.size()) +
                      " does not match architecture (" +
                      std::to_string(params_.size()) + " expected)");
  }
  params_ = std::move(params);
}

double training_loss(const Restorer& restorer, const ComplexImage& x_true, int t,
                     const DegradationOp& op, LossNorm norm) {
  require_finite(x_true, "training_loss");
  const ComplexImage degraded = op.degrade(x_true, t);
  const ComplexImage estimate = restorer.restore(degraded, t);
  return loss_from_residual(estimate, x_true, norm);
}

struct TrainingGraph::Impl {
  const ConvRestorer* restorer;
  bool has_forward = false;
  ForwardRecord rec;
  ComplexImage degraded;
  // d loss / d output-plane values at the network output.
  Planes d_output;
};

TrainingGraph::TrainingGraph(const ConvRestorer& restorer)
    : impl_(std::make_unique<Impl>()) {
  impl_->restorer = &restorer;
}

TrainingGraph::~TrainingGraph() = default;
TrainingGraph::TrainingGraph(TrainingGraph&&) noexcept = default;
TrainingGraph& TrainingGraph::operator=(TrainingGraph&&) noexcept = default;

double TrainingGraph::forward(const ComplexImage& x_true, int t,
                              const DegradationOp& op, LossNorm norm) {
  require_finite(x_true, "TrainingGraph::forward");
  const ConvRestorer& r = *impl_->restorer;
  if (t < 0 || t > r.total_steps()) {
    throw IndexError("step " + std::to_string(t) + " outside [0, " +
                     std::to_string(r.total_steps()) + "]");
  }
  impl_->degraded = op.degrade(x_true, t);
  run_forward(r.arch(), r.params(), impl_->degraded, t, r.total_steps(),
              impl_->rec);
  const ComplexImage estimate = residual_output(impl_->degraded, impl_->rec);

  const std::size_t n = x_true.size();
  const double denom = 2.0 * static_cast<double>(n);
  impl_->d_output.assign(2, Plane(n));
  auto e = estimate.data();
  auto tr = x_true.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double re = e[i].real() - tr[i].real();
    const double im = e[i].imag() - tr[i].imag();
    if (norm == LossNorm::kL1) {
      acc += std::abs(re) + std::abs(im);
      impl_->d_output[0][i] = sign_of(re) / denom;
      impl_->d_output[1][i] = sign_of(im) / denom;
    } else {
      acc += re * re + im * im;
      impl_->d_output[0][i] = 2.0 * re / denom;
      impl_->d_output[1][i] = 2.0 * im / denom;
    }
  }
  impl_->has_forward = true;
  return acc / denom;
}

std::vector<double> TrainingGraph::backward() const {
  if (!impl_->has_forward) {
    throw StateError("backward called before forward");
  }
  const ConvRestorer& r = *impl_->restorer;
  const auto shapes = conv_layer_shapes(r.arch());
  std::vector<double> grads(r.params().size(), 0.0);

  // Parameter offsets per layer.
  std::vector<std::size_t> offsets(shapes.size());
  std::size_t off = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    offsets[l] = off;
    off += layer_param_count(shapes[l].first, shapes[l].second);
  }

  const int h = impl_->rec.h;
  const int w = impl_->rec.w;
  Planes d = impl_->d_output;  // gradient w.r.t. the current layer's output
  for (std::size_t li = shapes.size(); li-- > 0;) {
    const auto [in_ch, out_ch] = shapes[li];
    if (li + 1 < shapes.size()) {
      // Undo the ReLU that followed this layer (stored post-activation).
      const Planes& act = impl_->rec.acts[li + 1];
      for (int o = 0; o < out_ch; ++o) {
        const Plane& a = act[static_cast<std::size_t>(o)];
        Plane& g = d[static_cast<std::size_t>(o)];
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a[i] <= 0.0) g[i] = 0.0;
        }
      }
    }
    const float* wts = r.params().data() + offsets[li];
    double* d_w = grads.data() + offsets[li];
    double* d_b = d_w + static_cast<std::size_t>(in_ch) * out_ch * kTaps;
    conv_param_grads(impl_->rec.acts[li], d, d_w, d_b, h, w);
    if (li > 0) {
      Planes d_in(static_cast<std::size_t>(in_ch),
                  Plane(static_cast<std::size_t>(h) * w, 0.0));
      conv_backprop_input(d, d_in, wts, h, w);
      d = std::move(d_in);
    }
  }
  return grads;
}

void adam_step(std::vector<float>& params, std::span<const double> grads,
               AdamState& state, double learning_rate, const AdamParams& adam) {
  if (grads.size() != params.size()) {
    throw ConfigError("gradient count does not match parameter count");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  } else if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("Adam state size does not match parameter count");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = adam.beta1 * state.m[i] + (1.0 - adam.beta1) * g;
    state.v[i] = adam.beta2 * state.v[i] + (1.0 - adam.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    const double p = static_cast<double>(params[i]) -
                     learning_rate * m_hat / (std::sqrt(v_hat) + adam.eps);
    params[i] = static_cast<float>(p);
  }
}

ConvRestorer make_restorer(const ModelCheckpoint& ckpt) {
  return ConvRestorer(ckpt.arch, ckpt.total_steps, ckpt.params);
}

namespace {

ModelCheckpoint checkpoint_from(const ConvArch& arch, int total_steps,
                                std::vector<float> params,
                                const MaskFamily& family, const TrainConfig& cfg) {
  ModelCheckpoint ckpt;
  ckpt.arch = arch;
  ckpt.total_steps = total_steps;
  ckpt.params = std::move(params);
  const char* kind =
      family.schedule().kind() == ScheduleKind::kLinear ? "lin" : "log";
  ckpt.metadata = {
      {"schedule_kind", kind},
      {"sr_min", std::to_string(family.schedule().sr_min())},
      {"width", std::to_string(family.width())},
      {"center_fraction", std::to_string(family.center_fraction())},
      {"family_seed", std::to_string(family.seed())},
      {"loss", cfg.loss_norm == LossNorm::kL1 ? "l1" : "l2"},
      {"learning_rate", std::to_string(cfg.learning_rate)},
      {"batch_size", std::to_string(cfg.batch_size)},
      {"grad_steps", std::to_string(cfg.grad_steps)},
      {"train_seed", std::to_string(cfg.seed)},
  };
  return ckpt;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(std::span<const float> v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

TrainResult train(std::span<const ComplexImage> dataset, const MaskFamily& family,
                  ConvArch arch, const TrainConfig& cfg) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  for (const ComplexImage& img : dataset) {
    require_same_shape(img, dataset.front(), "train");
    require_finite(img, "train");
  }
  if (dataset.front().width() != family.width()) {
    throw ShapeError("dataset width " + std::to_string(dataset.front().width()) +
                     " does not match family width " +
                     std::to_string(family.width()));
  }
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.grad_steps < 0) throw ConfigError("grad_steps must be >= 0");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (cfg.log_every < 1) throw ConfigError("log_every must be >= 1");

  const int T = family.total_steps();
  ConvRestorer restorer = ConvRestorer::seeded(arch, T, cfg.seed);
  const DegradationOp op(family);
  // Distinct stream from the weight init.
  Rng data_rng(cfg.seed ^ 0x6a09e667f3bcc909ULL);

  std::vector<float> params(restorer.params().begin(), restorer.params().end());
  AdamState adam_state;
  TrainResult result;

  const int jobs = std::max(1, std::min(cfg.jobs, cfg.batch_size));
  std::vector<std::pair<std::size_t, int>> batch(
      static_cast<std::size_t>(cfg.batch_size));
  std::vector<double> losses(batch.size());
  std::vector<std::vector<double>> grads(batch.size());

  for (int step = 1; step <= cfg.grad_steps; ++step) {
    for (auto& [idx, t] : batch) {
      idx = static_cast<std::size_t>(data_rng.next_below(dataset.size()));
      t = 1 + static_cast<int>(data_rng.next_below(static_cast<std::uint64_t>(T)));
    }
    auto worker = [&](std::size_t first) {
      for (std::size_t s = first; s < batch.size();
           s += static_cast<std::size_t>(jobs)) {
        TrainingGraph graph(restorer);
        losses[s] = graph.forward(dataset[batch[s].first], batch[s].second, op,
                                  cfg.loss_norm);
        grads[s] = graph.backward();
      }
    };
    if (jobs == 1) {
      worker(0);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(static_cast<std::size_t>(jobs));
      for (int j = 0; j < jobs; ++j) {
        threads.emplace_back(worker, static_cast<std::size_t>(j));
      }
      for (std::thread& th : threads) th.join();
    }

    // Fixed-order reduction keeps the result independent of the job count.
    double loss = 0.0;
    std::vector<double> grad(params.size(), 0.0);
    for (std::size_t s = 0; s < batch.size(); ++s) {
      loss += losses[s];
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += grads[s][i];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    loss *= inv;
    for (double& g : grad) g *= inv;

    if (!std::isfinite(loss) || !all_finite(grad)) {
      throw TrainingDivergedError(
          "training diverged at step " + std::to_string(step),
          step, checkpoint_from(arch, T, params, family, cfg));
    }

    std::vector<float> updated = params;
    adam_step(updated, grad, adam_state, cfg.learning_rate, cfg.adam);
    if (!all_finite(std::span<const float>(updated))) {
      // Keep the pre-update parameters: the partial checkpoint must stay finite.
      throw TrainingDivergedError(
          "training diverged at step " + std::to_string(step),
          step, checkpoint_from(arch, T, params, family, cfg));
    }
    params = std::move(updated);
    restorer.set_params(params);

    if (step == 1 || step == cfg.grad_steps || step % cfg.log_every == 0) {
      result.loss_log.emplace_back(step, loss);
    }
  }

  result.checkpoint = checkpoint_from(arch, T, std::move(params), family, cfg);
  return result;
}

}  // namespace coldmri
