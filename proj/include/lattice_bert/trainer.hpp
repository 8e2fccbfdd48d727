#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace lattice_bert {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-6;
  double clip_norm = 1.0;   // global gradient norm; <= 0 disables
  std::int64_t warmup_steps = 10;
  std::int64_t total_steps = 0;  // linear decay to zero; 0 keeps the peak rate
};

// Adam with linear warmup and linear decay. Moments are kept as a shadow
// EncoderState so they line up with the parameters tensor by tensor.
template <typename Scalar = double>
class Adam {
 public:
  Adam(const EncoderConfig& cfg, AdamConfig opt)
      : opt_(opt), m_(EncoderState<Scalar>::zeros(cfg)), v_(EncoderState<Scalar>::zeros(cfg)) {}

  double rate_at(std::int64_t step) const {
    double rate = opt_.learning_rate;
    if (opt_.warmup_steps > 0 && step < opt_.warmup_steps)
      rate *= static_cast<double>(step + 1) / static_cast<double>(opt_.warmup_steps);
    if (opt_.total_steps > 0 && step >= opt_.warmup_steps) {
      const double span = static_cast<double>(std::max<std::int64_t>(1, opt_.total_steps - opt_.warmup_steps));
      rate *= std::max(0.0, 1.0 - static_cast<double>(step - opt_.warmup_steps) / span);
    }
    return rate;
  }

  // Applies one update and advances the step counter. Returns the gradient
  // norm before clipping.
  double step(EncoderState<Scalar>& params, EncoderState<Scalar>& grads) {
    auto p = params.tensors();
    auto g = grads.tensors();
    auto m = m_.tensors();
    auto v = v_.tensors();
    double norm_sq = 0.0;
    for (auto& t : g) norm_sq += static_cast<double>(t.tensor->squaredNorm());
    const double norm = std::sqrt(norm_sq);
    const double clip = opt_.clip_norm > 0 && norm > opt_.clip_norm ? opt_.clip_norm / norm : 1.0;
    const double rate = rate_at(step_);
    ++step_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
    const auto b1 = static_cast<Scalar>(opt_.beta1), b2 = static_cast<Scalar>(opt_.beta2);
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto grad = (g[i].tensor->array() * static_cast<Scalar>(clip)).eval();
      m[i].tensor->array() = b1 * m[i].tensor->array() + (Scalar(1) - b1) * grad;
      v[i].tensor->array() = b2 * v[i].tensor->array() + (Scalar(1) - b2) * grad.square();
      p[i].tensor->array() -= static_cast<Scalar>(rate) * (m[i].tensor->array() / static_cast<Scalar>(bc1)) /
                              ((v[i].tensor->array() / static_cast<Scalar>(bc2)).sqrt() + static_cast<Scalar>(opt_.epsilon));
    }
    return norm;
  }

  std::int64_t steps_taken() const { return step_; }
  void set_steps_taken(std::int64_t step) { step_ = step; }
  EncoderState<Scalar>& first_moment() { return m_; }
  EncoderState<Scalar>& second_moment() { return v_; }
  const AdamConfig& config() const { return opt_; }

 private:
  AdamConfig opt_;
  EncoderState<Scalar> m_;
  EncoderState<Scalar> v_;
  std::int64_t step_ = 0;
};

struct BatchReport {
  double msp_loss = 0.0;
  double sop_loss = 0.0;
  double msp_accuracy = 0.0;
  std::size_t msp_count = 0;
  std::size_t msp_correct = 0;
  double grad_norm = 0.0;

  double total() const { return msp_loss + sop_loss; }
};

// Mean losses over a batch; msp_loss is averaged over instances that carry
// targets, msp_accuracy over all targets.
inline BatchReport summarize(std::span<const LossReport> reports) {
  BatchReport out;
  std::size_t with_msp = 0;
  std::size_t with_sop = 0;
  for (const auto& r : reports) {
    if (r.has_msp) {
      out.msp_loss += r.msp_loss;
      ++with_msp;
    }
    if (r.has_sop) {
      out.sop_loss += r.sop_loss;
      ++with_sop;
    }
    out.msp_count += r.msp_count;
    out.msp_correct += r.msp_correct;
  }
  if (with_msp) out.msp_loss /= static_cast<double>(with_msp);
  if (with_sop) out.sop_loss /= static_cast<double>(with_sop);
  if (out.msp_count) out.msp_accuracy = static_cast<double>(out.msp_correct) / static_cast<double>(out.msp_count);
  return out;
}

// One optimizer step on the mean loss of a batch.
template <typename Scalar>
BatchReport train_step(EncoderState<Scalar>& state, Adam<Scalar>& adam, std::span<const PretrainInstance> batch,
                       Rng& rng, Mode mode = Mode::train) {
  auto grads = state.zeros_like();
  std::vector<LossReport> reports;
  const auto scale = Scalar(1) / static_cast<Scalar>(std::max<std::size_t>(1, batch.size()));
  for (const auto& inst : batch)
    reports.push_back(loss_and_gradients(state, encoder_input(inst), encoder_targets(inst), &grads, mode, &rng, scale));
  auto report = summarize(reports);
  report.grad_norm = adam.step(state, grads);
  return report;
}

template <typename Scalar>
BatchReport evaluate(const EncoderState<Scalar>& state, std::span<const PretrainInstance> instances) {
  std::vector<LossReport> reports;
  for (const auto& inst : instances) reports.push_back(loss_and_gradients(state, encoder_input(inst), encoder_targets(inst)));
  return summarize(reports);
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckGroup {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.max_rel_error);
    return m;
  }
};

// Relative error of one analytic/numeric pair. Central differences at
// h = 1e-5 carry about 1e-10 of round-off on an O(1) loss, so the
// denominator is floored at 1e-5: entries whose true gradient is zero (key
// biases, unused buckets) then score ~1e-5 instead of dividing noise by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of the eval-mode total loss against the analytic
// gradient. Tensors with at most max_entries elements are checked in full;
// larger ones on max_entries entries, half of them drawn from the entries
// with nonzero analytic gradient.
template <typename Scalar>
GradCheckReport grad_check(EncoderState<Scalar> state, const EncoderInput& input, const EncoderTargets& targets,
                           double epsilon = 1e-5, std::size_t max_entries = 48, std::uint64_t seed = 7) {
  auto grads = state.zeros_like();
  loss_and_gradients(state, input, targets, &grads);
  auto params = state.tensors();
  auto analytic = grads.tensors();
  Rng rng(seed);
  GradCheckReport report;
  auto loss_at = [&]() { return loss_and_gradients<Scalar>(state, input, targets).total(); };
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& param = *params[t].tensor;
    const auto& grad = *analytic[t].tensor;
    const auto size = static_cast<std::size_t>(param.size());
    std::vector<std::size_t> entries;
    if (size <= max_entries) {
      for (std::size_t i = 0; i < size; ++i) entries.push_back(i);
    } else {
      std::vector<std::size_t> nonzero;
      for (std::size_t i = 0; i < size; ++i)
        if (grad.data()[i] != Scalar(0)) nonzero.push_back(i);
      rng.shuffle(nonzero);
      for (std::size_t i = 0; i < nonzero.size() && entries.size() < max_entries / 2; ++i) entries.push_back(nonzero[i]);
      while (entries.size() < max_entries) entries.push_back(static_cast<std::size_t>(rng.uniform_index(size)));
    }
    GradCheckGroup group{params[t].name, entries.size(), 0.0, 0.0};
    for (auto i : entries) {
      const Scalar saved = param.data()[i];
      param.data()[i] = saved + static_cast<Scalar>(epsilon);
      const double plus = loss_at();
      param.data()[i] = saved - static_cast<Scalar>(epsilon);
      const double minus = loss_at();
      param.data()[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = static_cast<double>(grad.data()[i]);
      group.max_rel_error = std::max(group.max_rel_error, relative_error(a, numeric));
      group.max_abs_error = std::max(group.max_abs_error, std::abs(a - numeric));
    }
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace lattice_bert
