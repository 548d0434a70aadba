#include "windguard/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include "windguard/error.hpp"
#include "windguard/rng.hpp"

namespace windguard::synth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Exact discretization of an Ornstein–Uhlenbeck step with stationary stddev `sigma`.
double ou_step(double x, double dt, double tau, double sigma, Rng& rng) {
  const double decay = std::exp(-dt / tau);
  return x * decay + sigma * std::sqrt(1.0 - decay * decay) * rng.normal();
}

bool overlaps(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) { return a0 < b1 && b0 < a1; }

// Approximate day of year (epoch is Jan 1).
double day_of_year(UnixSeconds t) { return std::fmod(static_cast<double>(t) / 86400.0, 365.2425); }

}  // namespace

void TurbineConfig::validate() const {
  const std::string who = "turbine " + std::to_string(turbine_id) + ": ";
  if (!(rated_power > 0.0)) throw ValidationError(who + "rated_power must be positive");
  if (!(0.0 < cut_in && cut_in < rated_speed && rated_speed < cut_out))
    throw ValidationError(who + "need 0 < cut_in < rated_speed < cut_out");
  if (!(curve_steepness > 0.0)) throw ValidationError(who + "curve_steepness must be positive");
  if (!(midpoint() > cut_in)) throw ValidationError(who + "sigmoid midpoint must lie above cut_in");
  if (noise_std < 0.0 || anemometer_noise < 0.0) throw ValidationError(who + "noise must be non-negative");
  for (const Episode& e : degradation_episodes) {
    if (!(e.output_factor > 0.0 && e.output_factor < 1.0))
      throw ValidationError(who + "output_factor must be in (0, 1)");
    if (e.end_hour <= e.start_hour) throw ValidationError(who + "empty degradation episode");
  }
  for (std::size_t i = 0; i < degradation_episodes.size(); ++i)
    for (std::size_t j = i + 1; j < degradation_episodes.size(); ++j)
      if (overlaps(degradation_episodes[i].start_hour, degradation_episodes[i].end_hour,
                   degradation_episodes[j].start_hour, degradation_episodes[j].end_hour))
        throw ValidationError(who + "overlapping degradation episodes");
}

void FarmConfig::validate() const {
  if (turbines.empty()) throw ValidationError("farm has no turbines");
  if (span_hours < 90 * 24) throw ValidationError("farm span must be at least 90 days");
  if (sample_minutes <= 0 || 60 % sample_minutes != 0)
    throw ValidationError("sample_minutes must divide 60");
  std::set<int> ids;
  for (const TurbineConfig& t : turbines) {
    t.validate();
    if (!ids.insert(t.turbine_id).second)
      throw ValidationError("duplicate turbine id " + std::to_string(t.turbine_id));
  }
  for (const GapEpisode& g : gap_episodes)
    if (g.end_hour <= g.start_hour) throw ValidationError("empty gap episode");
}

FarmConfig default_farm(std::uint64_t seed, int turbine_count, std::int64_t span_days) {
  FarmConfig farm;
  farm.start = *parse_rfc3339("2022-10-28T00:00:00Z");
  farm.span_hours = span_days * 24;
  farm.sample_minutes = 10;
  farm.weather_seed = derive_seed(seed, 1);
  farm.gap_episodes = {{80 * 24 + 7, 81 * 24 + 13}, {150 * 24, 152 * 24 + 12}};

  // Nov 14 to Dec 14.
  const Episode farm_wide{17 * 24, 47 * 24, 0.7};
  Rng rng(derive_seed(seed, 2));
  for (int i = 0; i < turbine_count; ++i) {
    TurbineConfig t;
    t.turbine_id = i + 1;
    t.curve_steepness = 1.1 * rng.uniform(0.9, 1.1);
    const double midpoint = 8.2 * rng.uniform(0.9, 1.1);
    t.rated_speed = midpoint + kRatedLogit / t.curve_steepness;
    t.generator_rpm_rated = 1800.0 * rng.uniform(0.97, 1.03);
    t.perturbation_seed = derive_seed(seed, 100 + static_cast<std::uint64_t>(i));
    t.degradation_episodes.push_back(farm_wide);

    const int extra = 1 + static_cast<int>(rng.index(2));
    int placed = 0;
    for (int attempt = 0; placed < extra && attempt < 200; ++attempt) {
      const auto length = static_cast<std::int64_t>(24 * rng.uniform(4.0, 10.0));
      const std::int64_t earliest = 55 * 24;
      const std::int64_t latest = farm.span_hours - length - 24;
      if (latest <= earliest) break;
      const std::int64_t start = earliest + static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(latest - earliest)));
      bool clash = false;
      for (const Episode& e : t.degradation_episodes)
        clash = clash || overlaps(start - 72, start + length + 72, e.start_hour, e.end_hour);
      for (const GapEpisode& g : farm.gap_episodes)
        clash = clash || overlaps(start, start + length, g.start_hour, g.end_hour);
      if (clash) continue;
      t.degradation_episodes.push_back({start, start + length, rng.uniform(0.6, 0.8)});
      ++placed;
    }
    std::sort(t.degradation_episodes.begin(), t.degradation_episodes.end(),
              [](const Episode& a, const Episode& b) { return a.start_hour < b.start_hour; });
    farm.turbines.push_back(std::move(t));
  }
  farm.validate();
  return farm;
}

Weather simulate_weather(std::int64_t span_hours, std::uint64_t seed, int sample_minutes, UnixSeconds start) {
  if (span_hours < 1) throw ValidationError("simulate_weather: span must be at least one hour");
  if (sample_minutes <= 0 || 60 % sample_minutes != 0)
    throw ValidationError("simulate_weather: sample_minutes must divide 60");
  const auto steps = static_cast<std::size_t>(span_hours * 60 / sample_minutes);
  const double dt = sample_minutes / 60.0;
  Weather w;
  w.sample_minutes = sample_minutes;
  w.speed.resize(steps);
  w.direction.resize(steps);
  w.temperature.resize(steps);

  Rng rng(seed);
  double synoptic = rng.normal(0.0, 2.8);
  double gust = 0.0;
  double heading = rng.uniform(0.0, 360.0);
  double temp_anomaly = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const UnixSeconds t = start + static_cast<UnixSeconds>(k) * sample_minutes * 60;
    const double hour_of_day = static_cast<double>(t % 86400) / 3600.0;
    const double season = std::cos(2.0 * std::numbers::pi * (day_of_year(t) - 15.0) / 365.2425);
    synoptic = ou_step(synoptic, dt, 30.0, 2.8, rng);
    gust = ou_step(gust, dt, 0.5, 0.7, rng);
    const double diurnal = 0.7 * std::sin(2.0 * std::numbers::pi * (hour_of_day - 9.0) / 24.0);
    w.speed[k] = std::clamp(7.5 + 1.2 * season + diurnal + synoptic + gust, 0.0, 30.0);

    heading += 3.0 * std::sqrt(dt) * rng.normal();
    heading = std::fmod(heading, 360.0);
    if (heading < 0.0) heading += 360.0;
    w.direction[k] = heading;

    temp_anomaly = ou_step(temp_anomaly, dt, 48.0, 2.5, rng);
    w.temperature[k] = 9.0 + 7.0 * -season + 3.0 * std::sin(2.0 * std::numbers::pi * (hour_of_day - 9.0) / 24.0) +
                       temp_anomaly;
  }
  return w;
}

double power_curve(double v, const TurbineConfig& cfg) {
  if (v < cfg.cut_in || v > cfg.cut_out) return 0.0;
  const double m = cfg.midpoint();
  const double base = sigmoid(cfg.curve_steepness * (cfg.cut_in - m));
  return cfg.rated_power * (sigmoid(cfg.curve_steepness * (v - m)) - base) / (1.0 - base);
}

double generator_speed_curve(double v, const TurbineConfig& cfg) {
  if (v > cfg.cut_out) return 0.0;
  if (v < cfg.cut_in) return cfg.generator_rpm_min * v / cfg.cut_in;
  const double ramp = smoothstep((v - cfg.cut_in) / (0.85 * cfg.rated_speed - cfg.cut_in));
  return cfg.generator_rpm_min + (cfg.generator_rpm_rated - cfg.generator_rpm_min) * ramp;
}

double pitch_curve(double v, const TurbineConfig& cfg) {
  if (v > cfg.cut_out) return 90.0;
  if (v <= cfg.rated_speed) return 1.0;
  return 1.0 + 24.0 * (1.0 - std::exp(-(v - cfg.rated_speed) / 6.0));
}

scada::ScadaFrame generate_turbine(const TurbineConfig& cfg, const Weather& weather, UnixSeconds start,
                                   const std::vector<GapEpisode>& gaps) {
  cfg.validate();
  const std::size_t steps = weather.speed.size();
  const int per_hour = 60 / weather.sample_minutes;
  Rng rng(cfg.perturbation_seed);

  scada::ScadaFrame f;
  f.turbine_id = cfg.turbine_id;
  f.timestamps.resize(steps);
  f.gaps.assign(steps, 0);
  f.labels = std::vector<std::uint8_t>(steps, 0);
  using namespace scada::channel;
  std::vector<double> wind(steps), gen(steps), pitch(steps), dir(steps), power(steps), rotor(steps),
      temp(steps), freq(steps);

  for (std::size_t k = 0; k < steps; ++k) {
    f.timestamps[k] = start + static_cast<UnixSeconds>(k) * weather.sample_minutes * 60;
    const auto hour = static_cast<std::int64_t>(k) / per_hour;
    const double v = weather.speed[k];

    double factor = 1.0;
    for (const Episode& e : cfg.degradation_episodes) {
      if (hour >= e.start_hour && hour < e.end_hour) {
        factor = e.output_factor;
        (*f.labels)[k] = 1;
      }
    }
    // Draw every noise term unconditionally so gaps do not shift the stream.
    const double n_wind = rng.normal(), n_gen = rng.normal(), n_pitch = rng.normal(), n_power = rng.normal(),
                 n_rotor = rng.normal(), n_temp = rng.normal(), n_dir = rng.normal();

    wind[k] = std::max(0.0, v + cfg.anemometer_noise * n_wind);
    const double rpm = generator_speed_curve(v, cfg);
    gen[k] = std::max(0.0, rpm + 15.0 * n_gen);
    pitch[k] = pitch_curve(v, cfg) + 0.3 * n_pitch;
    dir[k] = std::fmod(weather.direction[k] + 2.0 * n_dir + 360.0, 360.0);
    power[k] = std::clamp(power_curve(v, cfg) * factor + cfg.noise_std * n_power, 0.0, cfg.rated_power);
    rotor[k] = std::max(0.0, rpm / cfg.gear_ratio + 0.05 * n_rotor);
    temp[k] = weather.temperature[k] + 0.2 * n_temp;
    freq[k] = 50.0;

    for (const GapEpisode& g : gaps) {
      if (hour >= g.start_hour && hour < g.end_hour) {
        f.gaps[k] = 1;
        (*f.labels)[k] = 0;
      }
    }
    if (f.gaps[k]) {
      wind[k] = gen[k] = pitch[k] = dir[k] = power[k] = rotor[k] = temp[k] = freq[k] = kNaN;
    }
  }
  f.channels = {{std::string(kWindSpeed), std::move(wind)},
                {std::string(kGeneratorSpeed), std::move(gen)},
                {std::string(kPitchAngle), std::move(pitch)},
                {std::string(kWindDirection), std::move(dir)},
                {std::string(kPower), std::move(power)},
                {std::string(kRotorSpeed), std::move(rotor)},
                {std::string(kAmbientTemperature), std::move(temp)},
                {std::string(kGridFrequency), std::move(freq)}};
  return f;
}

namespace {

TurbineConfig turbine_from_json(const nlohmann::json& j) {
  TurbineConfig t;
  t.turbine_id = j.at("turbine_id").get<int>();
  t.rated_power = j.value("rated_power", t.rated_power);
  t.cut_in = j.value("cut_in", t.cut_in);
  t.rated_speed = j.value("rated_speed", t.rated_speed);
  t.cut_out = j.value("cut_out", t.cut_out);
  t.curve_steepness = j.value("curve_steepness", t.curve_steepness);
  t.noise_std = j.value("noise_std", t.noise_std);
  t.perturbation_seed = j.value("perturbation_seed", t.perturbation_seed);
  t.anemometer_noise = j.value("anemometer_noise", t.anemometer_noise);
  t.generator_rpm_min = j.value("generator_rpm_min", t.generator_rpm_min);
  t.generator_rpm_rated = j.value("generator_rpm_rated", t.generator_rpm_rated);
  t.gear_ratio = j.value("gear_ratio", t.gear_ratio);
  if (j.contains("degradation_episodes")) {
    for (const auto& e : j.at("degradation_episodes"))
      t.degradation_episodes.push_back(
          {e.at("start_hour").get<std::int64_t>(), e.at("end_hour").get<std::int64_t>(), e.at("output_factor").get<double>()});
  }
  return t;
}

}  // namespace

FarmConfig farm_from_json(const nlohmann::json& j) {
  try {
    FarmConfig farm;
    if (j.contains("preset")) {
      if (j.at("preset").get<std::string>() != "default") throw ValidationError("unknown farm preset");
      farm = default_farm(j.value("seed", std::uint64_t{42}), j.value("turbine_count", 13),
                          j.value("span_days", std::int64_t{220}));
    } else {
      const auto start = parse_rfc3339(j.at("start").get<std::string>());
      if (!start) throw ValidationError("farm start is not RFC 3339");
      farm.start = *start;
      farm.span_hours = j.at("span_hours").get<std::int64_t>();
      farm.sample_minutes = j.value("sample_minutes", 10);
      farm.weather_seed = j.at("weather_seed").get<std::uint64_t>();
      for (const auto& g : j.value("gap_episodes", nlohmann::json::array()))
        farm.gap_episodes.push_back({g.at("start_hour").get<std::int64_t>(), g.at("end_hour").get<std::int64_t>()});
      for (const auto& t : j.at("turbines")) farm.turbines.push_back(turbine_from_json(t));
    }
    farm.validate();
    return farm;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("farm config: ") + e.what());
  }
}

nlohmann::ordered_json farm_to_json(const FarmConfig& farm) {
  nlohmann::ordered_json j;
  j["start"] = format_rfc3339(farm.start);
  j["span_hours"] = farm.span_hours;
  j["sample_minutes"] = farm.sample_minutes;
  j["weather_seed"] = farm.weather_seed;
  j["gap_episodes"] = nlohmann::ordered_json::array();
  for (const GapEpisode& g : farm.gap_episodes)
    j["gap_episodes"].push_back({{"start_hour", g.start_hour}, {"end_hour", g.end_hour}});
  j["turbines"] = nlohmann::ordered_json::array();
  for (const TurbineConfig& t : farm.turbines) {
    nlohmann::ordered_json tj;
    tj["turbine_id"] = t.turbine_id;
    tj["rated_power"] = t.rated_power;
    tj["cut_in"] = t.cut_in;
    tj["rated_speed"] = t.rated_speed;
    tj["cut_out"] = t.cut_out;
    tj["curve_steepness"] = t.curve_steepness;
    tj["noise_std"] = t.noise_std;
    tj["perturbation_seed"] = t.perturbation_seed;
    tj["anemometer_noise"] = t.anemometer_noise;
    tj["generator_rpm_min"] = t.generator_rpm_min;
    tj["generator_rpm_rated"] = t.generator_rpm_rated;
    tj["gear_ratio"] = t.gear_ratio;
    tj["degradation_episodes"] = nlohmann::ordered_json::array();
    for (const Episode& e : t.degradation_episodes)
      tj["degradation_episodes"].push_back(
          {{"start_hour", e.start_hour}, {"end_hour", e.end_hour}, {"output_factor", e.output_factor}});
    j["turbines"].push_back(std::move(tj));
  }
  return j;
}

FarmConfig read_farm_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return farm_from_json(j);
}

void write_farm_config(const FarmConfig& farm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << farm_to_json(farm).dump(2) << '\n';
}

}  // namespace windguard::synth
