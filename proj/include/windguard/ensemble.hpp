#pragma once

#include <optional>
#include <span>
#include <vector>

#include "windguard/training.hpp"

// Equal-weight LSTM/FNN ensemble and the window error metrics.
namespace windguard::ensemble {

struct EnsembleModel {
  training::TrainedModel lstm;
  training::TrainedModel fnn;
  double w_lstm = 0.5;
  double w_fnn = 0.5;

  int turbine_id() const { return lstm.turbine_id; }
  double rated_power() const { return lstm.params.rated_power(); }
  void validate() const;
};

/// Pointwise w_lstm·a + w_fnn·b clamped to [0, rated].
std::vector<double> combine(std::span<const double> lstm_curve, std::span<const double> fnn_curve, double w_lstm,
                            double w_fnn, double rated_power);

/// Each member gets the window built from its own feature set over the same hours.
std::vector<double> ensemble_predict(const EnsembleModel& model, const scada::WindowSample& lstm_window,
                                     const scada::WindowSample& fnn_window);

/// Batched ensemble_predict over paired windows.
std::vector<std::vector<double>> ensemble_predict(const EnsembleModel& model,
                                                  std::span<const scada::WindowSample> lstm_windows,
                                                  std::span<const scada::WindowSample> fnn_windows);

/// √(mean((Y − Ŷ)²))
double rmse(std::span<const double> truth, std::span<const double> pred);

enum class RmspeForm {
  /// √(Σ(Y − Ŷ)² / ΣY)
  verbatim,
  /// √(mean(((Y − Ŷ)/Y)²)) over points with Y > 0
  per_point,
};

/// Empty when undefined (ΣY ≤ 0, or no positive Y for the per-point form).
std::optional<double> try_rmspe(std::span<const double> truth, std::span<const double> pred,
                                RmspeForm form = RmspeForm::verbatim);

/// Throws ValidationError when undefined.
double rmspe(std::span<const double> truth, std::span<const double> pred, RmspeForm form = RmspeForm::verbatim);

}  // namespace windguard::ensemble

namespace windguard::ensemble {

/// Per-window RMSE of the ensemble and their mean.
training::Evaluation evaluate(const EnsembleModel& model, std::span<const scada::WindowSample> lstm_windows,
                              std::span<const scada::WindowSample> fnn_windows);

}  // namespace windguard::ensemble
