#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "windguard/scada.hpp"
#include "windguard/timeutil.hpp"

// Synthetic wind farm SCADA data: one shared weather realization, per-turbine
// power curves with parameter jitter, multiplicative degradation episodes and
// farm-wide data-collection outages.
namespace windguard::synth {

/// Hours are relative to the farm start; intervals are half-open [start, end).
struct Episode {
  std::int64_t start_hour = 0;
  std::int64_t end_hour = 0;
  double output_factor = 1.0;
};

struct GapEpisode {
  std::int64_t start_hour = 0;
  std::int64_t end_hour = 0;
};

/// Logit reached at rated speed; fixes the sigmoid midpoint.
inline constexpr double kRatedLogit = 5.5;

struct TurbineConfig {
  int turbine_id = 1;
  double rated_power = 2000.0;       // kW
  double cut_in = 3.0;               // m/s
  double rated_speed = 13.2;         // m/s
  double cut_out = 25.0;             // m/s
  double curve_steepness = 1.1;      // 1/(m/s)
  double noise_std = 30.0;           // kW
  std::uint64_t perturbation_seed = 1;
  std::vector<Episode> degradation_episodes;

  double anemometer_noise = 0.3;     // m/s
  double generator_rpm_min = 1000.0;
  double generator_rpm_rated = 1800.0;
  double gear_ratio = 100.0;

  /// Sigmoid midpoint: rated_speed − kRatedLogit / steepness.
  double midpoint() const { return rated_speed - kRatedLogit / curve_steepness; }
  void validate() const;
};

struct FarmConfig {
  std::vector<TurbineConfig> turbines;
  UnixSeconds start = 0;
  std::int64_t span_hours = 0;
  int sample_minutes = 10;
  std::uint64_t weather_seed = 0;
  std::vector<GapEpisode> gap_episodes;

  void validate() const;
};

/// 13 turbines over ~7 months from late October, a farm-wide soiling episode
/// (factor 0.7) in mid-November to mid-December, 1–2 episodes per turbine and
/// two data-collection outages.
FarmConfig default_farm(std::uint64_t seed, int turbine_count = 13, std::int64_t span_days = 220);

/// Either a full description or {"preset": "default", "seed", "turbine_count", "span_days"}.
FarmConfig farm_from_json(const nlohmann::json& j);
nlohmann::ordered_json farm_to_json(const FarmConfig& farm);
FarmConfig read_farm_config(const std::filesystem::path& path);
void write_farm_config(const FarmConfig& farm, const std::filesystem::path& path);

struct Weather {
  int sample_minutes = 10;
  std::vector<double> speed;       // m/s, [0, 30]
  std::vector<double> direction;   // degrees, [0, 360)
  std::vector<double> temperature; // °C
};

/// Mean-reverting wind speed (synoptic + gust components) with diurnal and
/// seasonal modulation; direction is a wrapped random walk.
Weather simulate_weather(std::int64_t span_hours, std::uint64_t seed, int sample_minutes = 10,
                         UnixSeconds start = 0);

/// Rescaled sigmoid between cut-in and cut-out, zero outside.
double power_curve(double wind_speed, const TurbineConfig& cfg);

double generator_speed_curve(double wind_speed, const TurbineConfig& cfg);
double pitch_curve(double wind_speed, const TurbineConfig& cfg);

/// Samples at the weather's resolution. Labels are 1 exactly on degradation hours.
scada::ScadaFrame generate_turbine(const TurbineConfig& cfg, const Weather& weather, UnixSeconds start,
                                   const std::vector<GapEpisode>& gaps = {});

}  // namespace windguard::synth
