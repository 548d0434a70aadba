#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "windguard/cross_eval.hpp"
#include "windguard/detection.hpp"
#include "windguard/synth.hpp"

// The end-to-end workflow over a workspace directory:
//   data/      raw 10-minute turbine CSVs and the farm description
//   prepared/  hourly frames, split plan and pruning results
//   models/    parameter files, training histories and cutoffs
//   reports/   detection results, cross-evaluation matrices and plot data
namespace windguard::pipeline {

struct PrepSettings {
  double prune_threshold = 0.9;
  std::size_t turbulence_hours = 6;
  std::size_t group_hours = 72;
  std::size_t window_hours = 24;
  /// Stride of the training windows inside each group.
  std::size_t train_stride = 1;
  scada::SplitRatios ratios;
};

struct DetectSettings {
  double rmse_percentile = 0.90;
  double rmspe_percentile = 0.95;
  ensemble::RmspeForm rmspe_form = ensemble::RmspeForm::verbatim;
};

struct RunConfig {
  std::uint64_t seed = 42;
  /// Farm description; a preset without its own seed takes the run seed.
  nlohmann::json farm = {{"preset", "default"}};
  PrepSettings prep;
  training::TrainConfig lstm = training::TrainConfig::defaults(ModelKind::lstm);
  training::TrainConfig fnn = training::TrainConfig::defaults(ModelKind::fnn);
  DetectSettings detect;

  /// Library defaults with the epoch budget cut so a full farm runs in minutes.
  static RunConfig defaults();
  const training::TrainConfig& train(ModelKind kind) const { return kind == ModelKind::lstm ? lstm : fnn; }
  synth::FarmConfig farm_config() const;
  void validate() const;
};

inline constexpr const char* kConfigEnv = "WINDGUARD_CONFIG";

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json run_config_to_json(const RunConfig& config);
/// Reads `path`, else the file named by WINDGUARD_CONFIG, else the defaults.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path);

struct Workspace {
  std::filesystem::path root;

  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path prepared() const { return root / "prepared"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path reports() const { return root / "reports"; }

  std::filesystem::path raw_csv(int turbine) const;
  std::filesystem::path label_csv(int turbine) const;
  std::filesystem::path hourly_csv(int turbine) const;
  std::filesystem::path sidecar(int turbine) const;
  std::filesystem::path model_file(int turbine, ModelKind kind) const;
  std::filesystem::path history_csv(int turbine, ModelKind kind) const;
  std::filesystem::path cutoffs(int turbine) const;
  std::filesystem::path detect_dir(int turbine) const;
};

/// Turbine ids with a file in data/ (or prepared/ when `prepared` is set), ascending.
std::vector<int> discover_turbines(const Workspace& ws, bool prepared = false);

/// One turbine's hourly features for both model kinds, its 3-day groups and
/// the farm-wide split plan.
struct TurbineDataset {
  int turbine_id = 0;
  double rated_power = 0.0;
  scada::ScadaFrame hourly;
  scada::FeatureFrame lstm;
  scada::FeatureFrame fnn;
  std::vector<scada::DayGroup> groups;
  scada::SplitPlan plan;
  std::size_t window_hours = 24;

  const scada::FeatureFrame& features(ModelKind kind) const { return kind == ModelKind::lstm ? lstm : fnn; }
  /// Sliding windows of the good groups in the train and val splits.
  std::vector<scada::WindowSample> training_windows(ModelKind kind, std::size_t stride) const;
  std::vector<detection::Segment> validation_segments() const;
  std::vector<detection::Segment> good_test_segments() const;
  std::vector<detection::Segment> bad_segments() const;
  /// Good test groups followed by every bad group, in time order.
  std::vector<detection::Segment> detection_segments() const;
  /// Non-overlapping windows over `segments`, raw, for both kinds.
  cross_eval::TestSet windows(std::span<const detection::Segment> segments) const;
};

TurbineDataset load_dataset(const Workspace& ws, const RunConfig& config, int turbine);

ensemble::EnsembleModel load_ensemble(const Workspace& ws, int turbine);

/// Writes the farm's raw CSVs, hourly truth labels and farm.json.
void synth(const RunConfig& config, const Workspace& ws);
/// Hourly resampling, correlation pruning and the split plan for every raw CSV.
void prep(const RunConfig& config, const Workspace& ws);
void train(const RunConfig& config, const Workspace& ws, std::span<const int> turbines,
           std::span<const ModelKind> kinds);
/// Optional [from, to) restricts which windows are scored.
struct TimeRange {
  UnixSeconds from = 0;
  UnixSeconds to = 0;
};
detection::DetectionReport detect(const RunConfig& config, const Workspace& ws, int turbine,
                                  std::optional<TimeRange> range = std::nullopt);
/// Writes the Table-3-shaped weighted-F1 grid for the given reports.
void write_f1_summary(std::span<const detection::DetectionReport> reports, const std::filesystem::path& path);
std::pair<cross_eval::EvalMatrix, cross_eval::EvalMatrix> cross_eval(const RunConfig& config, const Workspace& ws);
/// Long-format plot data in reports/plot/.
void report(const RunConfig& config, const Workspace& ws);
void run_all(const RunConfig& config, const Workspace& ws);

}  // namespace windguard::pipeline
