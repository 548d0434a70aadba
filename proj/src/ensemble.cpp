#include "windguard/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "windguard/error.hpp"

namespace windguard::ensemble {

void EnsembleModel::validate() const {
  if (w_lstm < 0.0 || w_fnn < 0.0 || std::abs(w_lstm + w_fnn - 1.0) > 1e-12)
    throw ValidationError("ensemble weights must be non-negative and sum to 1");
  if (lstm.turbine_id != fnn.turbine_id) throw ValidationError("ensemble members come from different turbines");
  if (lstm.kind() != ModelKind::lstm || fnn.kind() != ModelKind::fnn)
    throw ValidationError("ensemble members have the wrong kinds");
}

std::vector<double> combine(std::span<const double> a, std::span<const double> b, double w_lstm, double w_fnn,
                            double rated_power) {
  if (a.size() != b.size()) throw ValidationError("ensemble: member curve lengths differ");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::clamp(w_lstm * a[i] + w_fnn * b[i], 0.0, rated_power);
  return out;
}

std::vector<double> ensemble_predict(const EnsembleModel& model, const scada::WindowSample& lstm_window,
                                     const scada::WindowSample& fnn_window) {
  return ensemble_predict(model, std::span(&lstm_window, 1), std::span(&fnn_window, 1)).front();
}

std::vector<std::vector<double>> ensemble_predict(const EnsembleModel& model,
                                                  std::span<const scada::WindowSample> lstm_windows,
                                                  std::span<const scada::WindowSample> fnn_windows) {
  model.validate();
  if (lstm_windows.size() != fnn_windows.size()) throw ValidationError("ensemble: window counts differ");
  const auto a = training::predict(model.lstm, lstm_windows);
  const auto b = training::predict(model.fnn, fnn_windows);
  std::vector<std::vector<double>> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(combine(a[i], b[i], model.w_lstm, model.w_fnn, model.rated_power()));
  return out;
}

double rmse(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) throw ValidationError("rmse: length mismatch");
  if (truth.empty()) throw ValidationError("rmse: empty curves");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  return std::sqrt(acc / static_cast<double>(truth.size()));
}

std::optional<double> try_rmspe(std::span<const double> truth, std::span<const double> pred, RmspeForm form) {
  if (truth.size() != pred.size()) throw ValidationError("rmspe: length mismatch");
  if (truth.empty()) throw ValidationError("rmspe: empty curves");
  if (form == RmspeForm::verbatim) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      num += (truth[i] - pred[i]) * (truth[i] - pred[i]);
      den += truth[i];
    }
    if (!(den > 0.0)) return std::nullopt;
    return std::sqrt(num / den);
  }
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!(truth[i] > 0.0)) continue;
    const double r = (truth[i] - pred[i]) / truth[i];
    acc += r * r;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(acc / static_cast<double>(n));
}

double rmspe(std::span<const double> truth, std::span<const double> pred, RmspeForm form) {
  const auto v = try_rmspe(truth, pred, form);
  if (!v) throw ValidationError("rmspe: undefined for a window whose true power sums to zero");
  return *v;
}

}  // namespace windguard::ensemble

namespace windguard::ensemble {

training::Evaluation evaluate(const EnsembleModel& model, std::span<const scada::WindowSample> lstm_windows,
                              std::span<const scada::WindowSample> fnn_windows) {
  if (lstm_windows.empty()) throw ValidationError("evaluate: empty sample set");
  const auto pred = ensemble_predict(model, lstm_windows, fnn_windows);
  training::Evaluation e;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    e.per_window_rmse.push_back(rmse(lstm_windows[i].target, pred[i]));
    sum += e.per_window_rmse.back();
  }
  e.mean_rmse = sum / static_cast<double>(pred.size());
  return e;
}

}  // namespace windguard::ensemble
