#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "windguard/model.hpp"
#include "windguard/scada.hpp"

namespace windguard::training {

enum class Optimizer { adam, sgd };

struct TrainConfig {
  ModelKind kind = ModelKind::lstm;
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  lstm::LstmConfig lstm;
  fnn::FnnConfig fnn;

  /// Learning rate 0.001 for the LSTM, 0.01 for the FNN.
  static TrainConfig defaults(ModelKind kind);
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainedModel {
  int turbine_id = 0;
  ModelParams params;
  scada::NormalizerStats normalizer;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  TrainConfig config;

  ModelKind kind() const { return params.kind(); }
  double best_val_loss() const;
};

/// Mean squared difference (kW²).
double mse_loss(std::span<const double> pred, std::span<const double> target);

/// Fresh parameters for the configured kind, with rated power and input width applied.
ModelParams initial_params(const TrainConfig& config, double rated_power, std::size_t window, Rng& rng);

/// Mini-batch training on the train-tagged windows with per-epoch validation
/// on the val-tagged ones. Keeps the best-validation parameters and stops after
/// `patience` epochs without improvement. Test-tagged windows are rejected.
TrainedModel train(std::span<const scada::WindowSample> samples, const TrainConfig& config, int turbine_id,
                   double rated_power);

/// Predictions (kW) for raw windows; the model's own normalizer is applied.
std::vector<std::vector<double>> predict(const TrainedModel& model, std::span<const scada::WindowSample> windows);

struct Evaluation {
  std::vector<double> per_window_rmse;
  double mean_rmse = 0.0;
};

Evaluation evaluate(const TrainedModel& model, std::span<const scada::WindowSample> windows);

/// MSE over raw windows, averaged over every predicted hour.
double dataset_mse(const TrainedModel& model, std::span<const scada::WindowSample> windows);

}  // namespace windguard::training
