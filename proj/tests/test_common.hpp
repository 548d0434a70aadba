#pragma once

// Helpers shared by the model tests.
#include <vector>

#include "windguard/ensemble.hpp"
#include "windguard/model.hpp"
#include "windguard/rng.hpp"
#include "windguard/tape.hpp"

namespace test {

inline windguard::scada::WindowSample random_window(windguard::Rng& rng, std::size_t features, std::size_t hours,
                                                    double rated = 2000.0) {
  windguard::scada::WindowSample w;
  w.features = features;
  w.hours = hours;
  for (std::size_t i = 0; i < features * hours; ++i) w.inputs.push_back(rng.normal());
  for (std::size_t t = 0; t < hours; ++t) w.target.push_back(rng.uniform(0.0, rated));
  return w;
}

/// Tape forward of a whole batch, returned as one vector per window.
inline std::vector<std::vector<double>> tape_forward(const windguard::ModelParams& model,
                                                     std::span<const windguard::scada::WindowSample> windows) {
  windguard::ad::Tape tape;
  std::vector<windguard::ad::Var> vars;
  for (const windguard::Tensor* t : model.tensors()) vars.push_back(tape.parameter(*t));
  const windguard::Batch batch = windguard::make_batch(windows);
  const windguard::Tensor& y = tape.value(windguard::forward(tape, model, vars, batch));
  std::vector<std::vector<double>> out(batch.size, std::vector<double>(batch.hours));
  for (std::size_t b = 0; b < batch.size; ++b)
    for (std::size_t t = 0; t < batch.hours; ++t) out[b][t] = y(b, t);
  return out;
}

/// MSE-loss gradient check of a full model on the given windows.
inline windguard::ad::GradCheckResult model_grad_check(const windguard::ModelParams& model,
                                                       std::span<const windguard::scada::WindowSample> windows,
                                                       windguard::Rng& rng, std::size_t entries) {
  std::vector<windguard::Tensor> params;
  for (const windguard::Tensor* t : model.tensors()) params.push_back(*t);
  const windguard::Batch batch = windguard::make_batch(windows);
  windguard::Tensor target({batch.size, batch.hours}, batch.targets);
  return windguard::ad::grad_check(
      [&](windguard::ad::Tape& tape, std::span<const windguard::ad::Var> vars) {
        return tape.mse(windguard::forward(tape, model, vars, batch), tape.constant(target));
      },
      params, rng, entries);
}

/// Untrained member with identity normalization, for prediction plumbing tests.
inline windguard::training::TrainedModel untrained(windguard::ModelKind kind, int turbine, double rated,
                                                    windguard::Rng& rng, std::size_t window = 24) {
  windguard::training::TrainedModel m;
  m.turbine_id = turbine;
  m.config = windguard::training::TrainConfig::defaults(kind);
  m.params = windguard::training::initial_params(m.config, rated, window, rng);
  m.normalizer.mean.assign(4, 0.0);
  m.normalizer.stddev.assign(4, 1.0);
  m.history.push_back({1, 0.0, 0.0});
  m.best_epoch = 1;
  return m;
}

inline windguard::ensemble::EnsembleModel untrained_ensemble(int turbine, double rated, windguard::Rng& rng) {
  return {untrained(windguard::ModelKind::lstm, turbine, rated, rng), untrained(windguard::ModelKind::fnn, turbine, rated, rng)};
}

}  // namespace test
