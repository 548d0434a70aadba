#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "windguard/ensemble.hpp"
#include "windguard/scada.hpp"

// Deterioration detection: validation-window errors become per-turbine cutoff
// limits, and test windows whose error exceeds them are labelled bad.
namespace windguard::detection {

/// Linear interpolation between closest ranks: r = p·(n − 1).
double percentile(std::span<const double> values, double p);

/// Half-open range of hour indices into a feature frame.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct WindowError {
  UnixSeconds start = 0;
  std::size_t start_index = 0;
  double rmse = 0.0;
  /// Empty when the window's true power sums to zero.
  std::optional<double> rmspe;
  /// Majority of hourly labels, ties to bad.
  std::uint8_t truth = 0;
};

/// Majority vote with ties to bad.
std::uint8_t majority_label(std::span<const std::uint8_t> labels);

/// Non-overlapping windows aligned to each segment start, partial tails dropped.
/// Segments are split further wherever the frame has a gap.
std::vector<Segment> window_starts(std::span<const Segment> segments, std::span<const std::uint8_t> gaps,
                                   std::size_t window_hours);

/// Scores hourly predictions against the frame's target over each window.
std::vector<WindowError> score_windows(const scada::FeatureFrame& frame, std::span<const double> predicted,
                                       std::span<const Segment> segments, std::size_t window_hours = 24,
                                       ensemble::RmspeForm form = ensemble::RmspeForm::verbatim);

/// Predicts every window with the ensemble and scores it. The two frames must
/// share timestamps (they come from the same hourly SCADA frame).
std::vector<WindowError> window_errors(const scada::FeatureFrame& lstm_frame, const scada::FeatureFrame& fnn_frame,
                                       const ensemble::EnsembleModel& model, std::span<const Segment> segments,
                                       std::size_t window_hours = 24,
                                       ensemble::RmspeForm form = ensemble::RmspeForm::verbatim);

/// Hourly ensemble predictions over the windows of `segments`; NaN elsewhere.
std::vector<double> predict_hourly(const scada::FeatureFrame& lstm_frame, const scada::FeatureFrame& fnn_frame,
                                   const ensemble::EnsembleModel& model, std::span<const Segment> segments,
                                   std::size_t window_hours = 24);

struct CutoffLimits {
  int turbine_id = 0;
  double rmse_cutoff = 0.0;
  /// +∞ when no validation window had a defined RMSPE.
  double rmspe_cutoff = 0.0;
  double rmse_percentile = 0.90;
  double rmspe_percentile = 0.95;
  std::size_t window_count = 0;
  std::size_t rmspe_window_count = 0;
  /// Fewer than 10 validation windows.
  bool low_sample_warning = false;
};

CutoffLimits compute_cutoffs(std::span<const WindowError> validation, int turbine_id, double p_rmse = 0.90,
                             double p_rmspe = 0.95);

void write_cutoffs(const CutoffLimits& limits, const std::filesystem::path& path);
CutoffLimits read_cutoffs(const std::filesystem::path& path);

enum class Mode : std::uint8_t { rmse, rmspe, mixed };
inline constexpr std::array<Mode, 3> kModes = {Mode::rmse, Mode::rmspe, Mode::mixed};
std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// 1 = bad. Windows without an RMSPE fall back to the RMSE rule.
std::vector<std::uint8_t> label_windows(std::span<const WindowError> errors, const CutoffLimits& limits, Mode mode);

/// Bad is the positive class.
struct ConfusionMatrix {
  std::size_t true_good = 0;   // truth good, predicted good
  std::size_t false_bad = 0;   // truth good, predicted bad
  std::size_t missed_bad = 0;  // truth bad, predicted good
  std::size_t true_bad = 0;    // truth bad, predicted bad

  std::size_t total() const { return true_good + false_bad + missed_bad + true_bad; }
};

ConfusionMatrix confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

/// Index 0 = good, 1 = bad. Undefined ratios are reported as 0.
struct Scores {
  std::array<double, 2> precision{};
  std::array<double, 2> recall{};
  std::array<double, 2> f1{};
  std::array<std::size_t, 2> support{};
  double weighted_f1 = 0.0;
};

Scores scores(const ConfusionMatrix& cm);

struct DetectionReport {
  int turbine_id = 0;
  CutoffLimits cutoffs;
  std::vector<WindowError> windows;
  std::array<std::vector<std::uint8_t>, 3> predicted;
  std::array<ConfusionMatrix, 3> matrices;
  std::array<Scores, 3> scores;

  const Scores& of(Mode mode) const { return scores[static_cast<std::size_t>(mode)]; }
};

DetectionReport detect(std::span<const WindowError> test_windows, const CutoffLimits& limits);

/// turbine, window_start, rmse, rmspe, flags, truth, pred_rmse, pred_rmspe, pred_mixed
void write_window_csv(const DetectionReport& report, const std::filesystem::path& path);
/// One row per mode: counts, per-class precision/recall/F1 and weighted F1.
void write_confusion_csv(const DetectionReport& report, const std::filesystem::path& path);

}  // namespace windguard::detection
