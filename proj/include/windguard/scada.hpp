#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "windguard/model_kind.hpp"
#include "windguard/timeutil.hpp"

// SCADA ingestion and dataset construction: CSV loading, hourly resampling,
// correlation pruning, per-model feature engineering, 3-day grouping,
// sliding windows, aligned splits and input normalization.
namespace windguard::scada {

namespace channel {
inline constexpr std::string_view kPower = "WTUR.W.mag.f";
inline constexpr std::string_view kWindSpeed = "WMET.HorWdSpd.mag.f";
inline constexpr std::string_view kWindDirection = "WMET.HorWdDir.mag.f";
inline constexpr std::string_view kGeneratorSpeed = "WGEN.Spd.mag.f";
inline constexpr std::string_view kPitchAngle = "WROT.BlPthAngVal.mag.f";
inline constexpr std::string_view kRotorSpeed = "WROT.RotSpd.mag.f";
inline constexpr std::string_view kAmbientTemperature = "WMET.EnvTmp.mag.f";
inline constexpr std::string_view kGridFrequency = "WCNV.HzSetPt.mag.f";
}  // namespace channel

/// Channels the feature engineering step reads.
std::vector<std::string> base_channels();

struct Channel {
  std::string name;
  std::vector<double> values;
};

/// Per-turbine multivariate series. Gap steps carry NaN in every channel.
struct ScadaFrame {
  int turbine_id = 0;
  std::vector<UnixSeconds> timestamps;
  std::vector<Channel> channels;
  std::vector<std::uint8_t> gaps;
  std::optional<std::vector<std::uint8_t>> labels;

  std::size_t size() const { return timestamps.size(); }
  bool has_channel(std::string_view name) const;
  const std::vector<double>& channel(std::string_view name) const;
  std::vector<std::string> channel_names() const;
  /// Same frame restricted to the named channels, in the given order.
  ScadaFrame select(std::span<const std::string> names) const;
  /// Throws ValidationError when an invariant is broken.
  void validate() const;
};

struct LoadResult {
  ScadaFrame frame;
  std::size_t dropped_rows = 0;
};

/// Reads `timestamp,<channels…>[,label]`. Every column other than timestamp
/// and label becomes a channel; `required` must be a subset. Rows with an
/// unparsable or empty cell, or a repeated timestamp, are dropped and counted.
LoadResult load_csv(const std::filesystem::path& path, std::span<const std::string> required,
                    int turbine_id = 0);

/// Writes the same format load_csv reads. Gap rows are written with empty cells.
void write_csv(const ScadaFrame& frame, const std::filesystem::path& path, int decimals = 3);

/// Mean per [h, h+1h) bucket; empty buckets become gaps; labels by majority with ties to bad.
ScadaFrame resample_hourly(const ScadaFrame& frame);

struct DroppedChannel {
  std::string channel;
  std::string partner;
  double correlation = 0.0;
};

struct PruneResult {
  std::vector<std::string> kept;
  std::vector<DroppedChannel> dropped;
  std::vector<std::string> zero_variance;
};

/// Greedy pass in frame channel order: a channel is dropped when its absolute
/// Pearson correlation with an earlier kept channel exceeds `threshold`.
/// Channels in `protect` (the target by default) are always kept.
PruneResult prune_correlated(const ScadaFrame& frame, double threshold,
                             std::span<const std::string> protect = {});

double pearson(std::span<const double> x, std::span<const double> y);

/// Model inputs for one turbine, one value per hour.
struct FeatureFrame {
  int turbine_id = 0;
  ModelKind kind = ModelKind::lstm;
  std::vector<UnixSeconds> timestamps;
  std::vector<std::string> input_names;
  std::vector<std::vector<double>> inputs;
  std::vector<double> target;
  /// sin(wind direction), kept alongside the inputs.
  std::vector<double> wind_direction_sin;
  std::vector<std::uint8_t> gaps;
  std::optional<std::vector<std::uint8_t>> labels;

  std::size_t size() const { return timestamps.size(); }
};

struct FeatureOptions {
  std::size_t turbulence_hours = 6;
};

/// Wind speed turbulence: trailing rolling sample standard deviation.
std::vector<double> rolling_std(std::span<const double> values, std::span<const std::uint8_t> gaps,
                                std::size_t horizon);

/// Builds the four inputs of the given model kind from an hourly frame.
/// The first `turbulence_hours − 1` hours are dropped; hours whose trailing
/// window touches a gap are marked as gaps.
FeatureFrame engineer_features(const ScadaFrame& hourly, ModelKind kind, FeatureOptions options = {});

struct DayGroup {
  int group_id = 0;
  std::size_t begin = 0;
  std::size_t length = 0;
  /// Any hour labelled bad.
  bool bad = false;
};

/// Non-overlapping groups anchored at `origin` (frame start when absent).
/// Groups with a gap, partial groups and groups cut by the frame edge are discarded.
std::vector<DayGroup> make_day_groups(const FeatureFrame& frame, std::size_t group_hours = 72,
                                      std::optional<UnixSeconds> origin = std::nullopt);

/// Number of group slots between origin and the end of the frame.
int group_slot_count(const FeatureFrame& frame, std::size_t group_hours = 72,
                     std::optional<UnixSeconds> origin = std::nullopt);

enum class Split : std::uint8_t { train, val, test };
std::string_view to_string(Split split);

struct WindowSample {
  /// Feature-major: inputs[f * hours + t].
  std::vector<double> inputs;
  std::vector<double> target;
  std::size_t features = 0;
  std::size_t hours = 0;
  int group_id = 0;
  std::size_t offset = 0;
  /// Index of the first hour in the source frame.
  std::size_t start = 0;
  Split split = Split::train;

  double input(std::size_t feature, std::size_t hour) const { return inputs[feature * hours + hour]; }
};

std::vector<WindowSample> slide_windows(const FeatureFrame& frame, const DayGroup& group,
                                        std::size_t window_hours = 24, std::size_t stride = 1);

/// Windows per group: floor((group − window) / stride) + 1.
std::size_t window_count(std::size_t group_hours, std::size_t window_hours, std::size_t stride);

struct SplitRatios {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::vector<Split> assignment;

  Split of(int group_id) const { return assignment.at(static_cast<std::size_t>(group_id)); }
  friend bool operator==(const SplitPlan& a, const SplitPlan& b) {
    return a.seed == b.seed && a.assignment == b.assignment && a.ratios.train == b.ratios.train &&
           a.ratios.val == b.ratios.val && a.ratios.test == b.ratios.test;
  }
};

/// Seeded shuffle of group indices, then a contiguous partition. Val and test
/// counts are floor(ratio · n); the remainder goes to train.
SplitPlan assign_splits(int group_count, std::uint64_t seed, SplitRatios ratios);

struct NormalizerStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline constexpr double kStdFloor = 1e-8;

NormalizerStats fit_normalizer(std::span<const WindowSample> train_samples);
WindowSample apply_normalizer(const WindowSample& sample, const NormalizerStats& stats);
WindowSample invert_normalizer(const WindowSample& sample, const NormalizerStats& stats);

/// Sidecar file holding the split plan and normalizer stats.
void write_sidecar(const std::filesystem::path& path, const SplitPlan& plan,
                   const std::vector<std::pair<std::string, NormalizerStats>>& stats);
SplitPlan read_split_plan(const std::filesystem::path& path);

}  // namespace windguard::scada
