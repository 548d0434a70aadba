#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "windguard/ensemble.hpp"

// Every turbine's ensemble evaluated on every turbine's test windows.
namespace windguard::cross_eval {

/// Raw (unnormalized) test windows of one turbine, paired hour for hour.
struct TestSet {
  std::vector<scada::WindowSample> lstm;
  std::vector<scada::WindowSample> fnn;
};

struct EvalMatrix {
  std::string tag;  // "good" or "bad"
  std::vector<int> turbines;
  /// values[i * n + j]: mean window RMSE (kW) of model i on turbine j's data.
  std::vector<double> values;

  std::size_t size() const { return turbines.size(); }
  double at(std::size_t model, std::size_t data) const { return values[model * size() + data]; }
  /// Row index of each column's minimum.
  std::vector<std::size_t> column_argmin() const;
  std::vector<std::size_t> row_argmin() const;
  std::vector<std::size_t> row_argmax() const;
  /// Columns whose own-turbine entry is the column minimum.
  std::size_t diagonal_minima() const;
};

/// Models and datasets must cover the same turbine ids.
EvalMatrix cross_evaluate(const std::map<int, ensemble::EnsembleModel>& models,
                          const std::map<int, TestSet>& datasets, std::string tag);

/// Long format: model_turbine, data_turbine, rmse.
void write_matrix_csv(const EvalMatrix& matrix, const std::filesystem::path& path);
/// Row/column extremes and the diagonal count as JSON.
void write_annotations(const EvalMatrix& matrix, const std::filesystem::path& path);

}  // namespace windguard::cross_eval
