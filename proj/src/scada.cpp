#include "windguard/scada.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "windguard/error.hpp"
#include "windguard/rng.hpp"

namespace windguard::scada {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.remove_suffix(1);
    while (!c.empty() && c.front() == ' ') c.remove_prefix(1);
  }
  return cells;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::vector<std::string> base_channels() {
  return {std::string(channel::kWindSpeed), std::string(channel::kGeneratorSpeed),
          std::string(channel::kPitchAngle), std::string(channel::kWindDirection),
          std::string(channel::kPower)};
}

bool ScadaFrame::has_channel(std::string_view name) const {
  return std::any_of(channels.begin(), channels.end(), [&](const Channel& c) { return c.name == name; });
}

const std::vector<double>& ScadaFrame::channel(std::string_view name) const {
  for (const Channel& c : channels)
    if (c.name == name) return c.values;
  throw ValidationError("missing channel '" + std::string(name) + "'");
}

std::vector<std::string> ScadaFrame::channel_names() const {
  std::vector<std::string> names;
  for (const Channel& c : channels) names.push_back(c.name);
  return names;
}

ScadaFrame ScadaFrame::select(std::span<const std::string> names) const {
  ScadaFrame out;
  out.turbine_id = turbine_id;
  out.timestamps = timestamps;
  out.gaps = gaps;
  out.labels = labels;
  for (const std::string& n : names) out.channels.push_back({n, channel(n)});
  return out;
}

void ScadaFrame::validate() const {
  const std::size_t n = timestamps.size();
  for (std::size_t i = 1; i < n; ++i)
    if (timestamps[i] <= timestamps[i - 1]) throw ValidationError("timestamps not strictly increasing");
  for (const Channel& c : channels)
    if (c.values.size() != n) throw ValidationError("channel '" + c.name + "' length mismatch");
  if (gaps.size() != n) throw ValidationError("gap mask length mismatch");
  if (labels && labels->size() != n) throw ValidationError("label length mismatch");
}

LoadResult load_csv(const std::filesystem::path& path, std::span<const std::string> required,
                    int turbine_id) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
  const auto header = split_csv_line(line);

  std::optional<std::size_t> ts_col;
  std::optional<std::size_t> label_col;
  std::vector<std::size_t> channel_cols;
  LoadResult result;
  ScadaFrame& frame = result.frame;
  frame.turbine_id = turbine_id;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "timestamp") {
      ts_col = i;
    } else if (header[i] == "label") {
      label_col = i;
    } else {
      channel_cols.push_back(i);
      frame.channels.push_back({std::string(header[i]), {}});
    }
  }
  if (!ts_col) throw ValidationError(path.string() + ": missing column 'timestamp'");
  for (const std::string& r : required)
    if (!frame.has_channel(r)) throw ValidationError(path.string() + ": missing column '" + r + "'");

  struct Row {
    UnixSeconds t;
    std::vector<double> values;
    std::uint8_t label;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      ++result.dropped_rows;
      continue;
    }
    Row row;
    const auto t = parse_rfc3339(cells[*ts_col]);
    bool ok = t.has_value();
    if (ok) row.t = *t;
    row.values.reserve(channel_cols.size());
    for (std::size_t c = 0; ok && c < channel_cols.size(); ++c) {
      const auto v = parse_double(cells[channel_cols[c]]);
      ok = v.has_value();
      if (ok) row.values.push_back(*v);
    }
    row.label = 0;
    if (ok && label_col) {
      const auto cell = cells[*label_col];
      ok = cell == "0" || cell == "1";
      if (ok) row.label = cell == "1" ? 1 : 0;
    }
    if (!ok) {
      ++result.dropped_rows;
      continue;
    }
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  std::vector<std::uint8_t> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!frame.timestamps.empty() && rows[i].t == frame.timestamps.back()) {
      ++result.dropped_rows;
      continue;
    }
    frame.timestamps.push_back(rows[i].t);
    for (std::size_t c = 0; c < channel_cols.size(); ++c) frame.channels[c].values.push_back(rows[i].values[c]);
    labels.push_back(rows[i].label);
  }
  if (frame.timestamps.empty()) throw ValidationError(path.string() + ": no usable rows");
  frame.gaps.assign(frame.timestamps.size(), 0);
  if (label_col) frame.labels = std::move(labels);
  return result;
}

void write_csv(const ScadaFrame& frame, const std::filesystem::path& path, int decimals) {
  frame.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "timestamp";
  for (const Channel& c : frame.channels) out << ',' << c.name;
  if (frame.labels) out << ",label";
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < frame.size(); ++i) {
    out << format_rfc3339(frame.timestamps[i]);
    for (const Channel& c : frame.channels) {
      out << ',';
      if (frame.gaps[i]) continue;
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, c.values[i], std::chars_format::fixed, decimals);
      out.write(buf, ptr - buf);
    }
    if (frame.labels) {
      out << ',';
      if (!frame.gaps[i]) out << static_cast<int>((*frame.labels)[i]);
    }
    out << '\n';
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

ScadaFrame resample_hourly(const ScadaFrame& frame) {
  if (frame.size() == 0) throw ValidationError("resample_hourly: empty frame");
  frame.validate();
  const UnixSeconds first = floor_hour(frame.timestamps.front());
  const UnixSeconds last = floor_hour(frame.timestamps.back());
  const auto hours = static_cast<std::size_t>((last - first) / kHour + 1);

  ScadaFrame out;
  out.turbine_id = frame.turbine_id;
  out.timestamps.resize(hours);
  for (std::size_t h = 0; h < hours; ++h) out.timestamps[h] = first + static_cast<UnixSeconds>(h) * kHour;

  std::vector<std::size_t> counts(hours, 0);
  std::vector<std::size_t> bad(hours, 0);
  for (const Channel& c : frame.channels) out.channels.push_back({c.name, std::vector<double>(hours, 0.0)});
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (frame.gaps[i]) continue;
    const auto h = static_cast<std::size_t>((floor_hour(frame.timestamps[i]) - first) / kHour);
    ++counts[h];
    if (frame.labels && (*frame.labels)[i]) ++bad[h];
    for (std::size_t c = 0; c < frame.channels.size(); ++c) out.channels[c].values[h] += frame.channels[c].values[i];
  }
  out.gaps.assign(hours, 0);
  if (frame.labels) out.labels = std::vector<std::uint8_t>(hours, 0);
  for (std::size_t h = 0; h < hours; ++h) {
    if (counts[h] == 0) {
      out.gaps[h] = 1;
      for (Channel& c : out.channels) c.values[h] = kNaN;
      continue;
    }
    for (Channel& c : out.channels) c.values[h] /= static_cast<double>(counts[h]);
    if (out.labels) (*out.labels)[h] = 2 * bad[h] >= counts[h] ? 1 : 0;
  }
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

PruneResult prune_correlated(const ScadaFrame& frame, double threshold, std::span<const std::string> protect) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("prune_correlated: threshold must be in (0, 1)");
  if (frame.channels.size() < 2) throw ValidationError("prune_correlated: need at least 2 channels");
  std::vector<std::string> protected_names(protect.begin(), protect.end());
  if (protected_names.empty()) protected_names.emplace_back(channel::kPower);
  auto is_protected = [&](const std::string& name) {
    return std::find(protected_names.begin(), protected_names.end(), name) != protected_names.end();
  };

  // Rows where every channel has data.
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    bool ok = !frame.gaps[i];
    for (const Channel& c : frame.channels) ok = ok && std::isfinite(c.values[i]);
    if (ok) rows.push_back(i);
  }
  if (rows.size() < 3) throw ValidationError("prune_correlated: fewer than 3 overlapping samples");

  std::vector<std::vector<double>> cols;
  for (const Channel& c : frame.channels) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (std::size_t r : rows) v.push_back(c.values[r]);
    cols.push_back(std::move(v));
  }

  PruneResult result;
  std::vector<std::size_t> kept_idx;
  for (std::size_t c = 0; c < frame.channels.size(); ++c) {
    const std::string& name = frame.channels[c].name;
    const auto [lo, hi] = std::minmax_element(cols[c].begin(), cols[c].end());
    if (*lo == *hi) {
      result.zero_variance.push_back(name);
      if (is_protected(name)) result.kept.push_back(name);
      continue;
    }
    std::optional<DroppedChannel> worst;
    for (std::size_t k : kept_idx) {
      const double r = pearson(cols[c], cols[k]);
      if (std::abs(r) > threshold && (!worst || std::abs(r) > std::abs(worst->correlation)))
        worst = DroppedChannel{name, frame.channels[k].name, r};
    }
    if (worst && !is_protected(name)) {
      result.dropped.push_back(*worst);
      continue;
    }
    kept_idx.push_back(c);
    result.kept.push_back(name);
  }
  return result;
}

std::vector<double> rolling_std(std::span<const double> values, std::span<const std::uint8_t> gaps,
                                std::size_t horizon) {
  const double nan = kNaN;
  std::vector<double> out(values.size(), nan);
  if (horizon < 2) throw ValidationError("rolling_std: horizon must be at least 2");
  for (std::size_t i = horizon - 1; i < values.size(); ++i) {
    bool ok = true;
    double mean = 0.0;
    for (std::size_t k = i + 1 - horizon; k <= i; ++k) {
      ok = ok && !gaps[k];
      mean += values[k];
    }
    if (!ok) continue;
    mean /= static_cast<double>(horizon);
    double ss = 0.0;
    for (std::size_t k = i + 1 - horizon; k <= i; ++k) ss += (values[k] - mean) * (values[k] - mean);
    out[i] = std::sqrt(ss / static_cast<double>(horizon - 1));
  }
  return out;
}

FeatureFrame engineer_features(const ScadaFrame& hourly, ModelKind kind, FeatureOptions options) {
  for (const std::string& name : base_channels())
    if (!hourly.has_channel(name)) throw ValidationError("engineer_features: missing channel '" + name + "'");
  const std::size_t horizon = options.turbulence_hours;
  if (hourly.size() < horizon) throw ValidationError("engineer_features: shorter than the turbulence horizon");

  const auto& wind = hourly.channel(channel::kWindSpeed);
  const auto& gen = hourly.channel(channel::kGeneratorSpeed);
  const auto& pitch = hourly.channel(channel::kPitchAngle);
  const auto& dir = hourly.channel(channel::kWindDirection);
  const auto& power = hourly.channel(channel::kPower);
  const std::vector<double> turbulence = rolling_std(wind, hourly.gaps, horizon);

  FeatureFrame out;
  out.turbine_id = hourly.turbine_id;
  out.kind = kind;
  if (kind == ModelKind::lstm) {
    out.input_names = {"wind_speed", "generator_speed", "pitch_x_generator_speed", "pitch_x_turbulence"};
  } else {
    out.input_names = {"wind_speed", "generator_speed", "wind_speed_x_generator_speed", "turbulence"};
  }
  out.inputs.assign(4, {});
  if (hourly.labels) out.labels.emplace();

  for (std::size_t i = horizon - 1; i < hourly.size(); ++i) {
    const bool gap = hourly.gaps[i] || !std::isfinite(turbulence[i]);
    out.timestamps.push_back(hourly.timestamps[i]);
    out.gaps.push_back(gap ? 1 : 0);
    if (out.labels) out.labels->push_back((*hourly.labels)[i]);
    if (gap) {
      for (auto& in : out.inputs) in.push_back(kNaN);
      out.target.push_back(kNaN);
      out.wind_direction_sin.push_back(kNaN);
      continue;
    }
    const double t = turbulence[i];
    out.inputs[0].push_back(wind[i]);
    out.inputs[1].push_back(gen[i]);
    if (kind == ModelKind::lstm) {
      out.inputs[2].push_back(pitch[i] * gen[i]);
      out.inputs[3].push_back(pitch[i] * t);
    } else {
      out.inputs[2].push_back(wind[i] * gen[i]);
      out.inputs[3].push_back(t);
    }
    out.target.push_back(power[i]);
    out.wind_direction_sin.push_back(std::sin(dir[i] * std::numbers::pi / 180.0));
  }
  return out;
}

int group_slot_count(const FeatureFrame& frame, std::size_t group_hours, std::optional<UnixSeconds> origin) {
  if (frame.size() == 0) return 0;
  const UnixSeconds start = origin.value_or(frame.timestamps.front());
  const UnixSeconds span = frame.timestamps.back() + kHour - start;
  if (span <= 0) return 0;
  return static_cast<int>(span / (static_cast<UnixSeconds>(group_hours) * kHour));
}

std::vector<DayGroup> make_day_groups(const FeatureFrame& frame, std::size_t group_hours,
                                      std::optional<UnixSeconds> origin) {
  std::vector<DayGroup> groups;
  if (frame.size() == 0 || group_hours == 0) return groups;
  const UnixSeconds start = origin.value_or(frame.timestamps.front());
  const UnixSeconds group_span = static_cast<UnixSeconds>(group_hours) * kHour;
  std::size_t i = 0;
  while (i < frame.size()) {
    const UnixSeconds rel = frame.timestamps[i] - start;
    if (rel < 0 || rel % group_span != 0) {
      ++i;
      continue;
    }
    const std::size_t end = i + group_hours;
    if (end > frame.size()) break;
    bool ok = frame.timestamps[end - 1] - frame.timestamps[i] ==
              static_cast<UnixSeconds>(group_hours - 1) * kHour;
    bool bad = false;
    for (std::size_t k = i; ok && k < end; ++k) {
      ok = !frame.gaps[k];
      if (frame.labels && (*frame.labels)[k]) bad = true;
    }
    if (ok) groups.push_back({static_cast<int>(rel / group_span), i, group_hours, bad});
    i = ok ? end : i + 1;
  }
  return groups;
}

std::size_t window_count(std::size_t group_hours, std::size_t window_hours, std::size_t stride) {
  if (window_hours > group_hours || stride == 0) return 0;
  return (group_hours - window_hours) / stride + 1;
}

std::vector<WindowSample> slide_windows(const FeatureFrame& frame, const DayGroup& group,
                                        std::size_t window_hours, std::size_t stride) {
  if (window_hours == 0) throw ValidationError("slide_windows: window must be at least one hour");
  if (window_hours > group.length) throw ValidationError("slide_windows: window longer than group");
  if (stride == 0) throw ValidationError("slide_windows: stride must be positive");
  const std::size_t features = frame.inputs.size();
  std::vector<WindowSample> out;
  for (std::size_t offset = 0; offset + window_hours <= group.length; offset += stride) {
    WindowSample s;
    s.features = features;
    s.hours = window_hours;
    s.group_id = group.group_id;
    s.offset = offset;
    s.start = group.begin + offset;
    s.inputs.resize(features * window_hours);
    for (std::size_t f = 0; f < features; ++f)
      for (std::size_t t = 0; t < window_hours; ++t) s.inputs[f * window_hours + t] = frame.inputs[f][s.start + t];
    s.target.assign(frame.target.begin() + static_cast<std::ptrdiff_t>(s.start),
                    frame.target.begin() + static_cast<std::ptrdiff_t>(s.start + window_hours));
    out.push_back(std::move(s));
  }
  return out;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

SplitPlan assign_splits(int group_count, std::uint64_t seed, SplitRatios ratios) {
  if (ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0)
    throw ValidationError("assign_splits: ratios must be non-negative");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ValidationError("assign_splits: ratios must sum to 1");
  if (group_count < 3) throw ValidationError("assign_splits: need at least 3 groups");

  const auto n = static_cast<std::size_t>(group_count);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));

  const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * static_cast<double>(n) + 1e-9));
  const std::size_t n_train = n - n_val - n_test;

  SplitPlan plan;
  plan.seed = seed;
  plan.ratios = ratios;
  plan.assignment.assign(n, Split::train);
  for (std::size_t k = n_train; k < n_train + n_val; ++k) plan.assignment[order[k]] = Split::val;
  for (std::size_t k = n_train + n_val; k < n; ++k) plan.assignment[order[k]] = Split::test;
  return plan;
}

NormalizerStats fit_normalizer(std::span<const WindowSample> train_samples) {
  if (train_samples.empty()) throw ValidationError("fit_normalizer: empty training set");
  const std::size_t features = train_samples.front().features;
  NormalizerStats stats;
  stats.mean.assign(features, 0.0);
  stats.stddev.assign(features, 0.0);
  std::size_t count = 0;
  for (const WindowSample& s : train_samples) {
    if (s.features != features) throw ValidationError("fit_normalizer: inconsistent feature count");
    count += s.hours;
    for (std::size_t f = 0; f < features; ++f)
      for (std::size_t t = 0; t < s.hours; ++t) stats.mean[f] += s.input(f, t);
  }
  for (double& m : stats.mean) m /= static_cast<double>(count);
  for (const WindowSample& s : train_samples)
    for (std::size_t f = 0; f < features; ++f)
      for (std::size_t t = 0; t < s.hours; ++t) {
        const double d = s.input(f, t) - stats.mean[f];
        stats.stddev[f] += d * d;
      }
  for (double& sd : stats.stddev) sd = std::max(std::sqrt(sd / static_cast<double>(count)), kStdFloor);
  return stats;
}

WindowSample apply_normalizer(const WindowSample& sample, const NormalizerStats& stats) {
  if (stats.mean.size() != sample.features) throw ValidationError("apply_normalizer: feature count mismatch");
  WindowSample out = sample;
  for (std::size_t f = 0; f < sample.features; ++f)
    for (std::size_t t = 0; t < sample.hours; ++t)
      out.inputs[f * sample.hours + t] = (sample.input(f, t) - stats.mean[f]) / stats.stddev[f];
  return out;
}

WindowSample invert_normalizer(const WindowSample& sample, const NormalizerStats& stats) {
  if (stats.mean.size() != sample.features) throw ValidationError("invert_normalizer: feature count mismatch");
  WindowSample out = sample;
  for (std::size_t f = 0; f < sample.features; ++f)
    for (std::size_t t = 0; t < sample.hours; ++t)
      out.inputs[f * sample.hours + t] = sample.input(f, t) * stats.stddev[f] + stats.mean[f];
  return out;
}

void write_sidecar(const std::filesystem::path& path, const SplitPlan& plan,
                   const std::vector<std::pair<std::string, NormalizerStats>>& stats) {
  nlohmann::ordered_json j;
  j["format"] = "windguard-sidecar";
  j["version"] = 1;
  j["split_plan"]["seed"] = plan.seed;
  j["split_plan"]["ratios"] = {plan.ratios.train, plan.ratios.val, plan.ratios.test};
  std::vector<std::string> assignment;
  for (Split s : plan.assignment) assignment.emplace_back(to_string(s));
  j["split_plan"]["assignment"] = assignment;
  for (const auto& [name, st] : stats) {
    j["normalizers"][name]["mean"] = st.mean;
    j["normalizers"][name]["stddev"] = st.stddev;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

SplitPlan read_split_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    SplitPlan plan;
    const auto& p = j.at("split_plan");
    plan.seed = p.at("seed").get<std::uint64_t>();
    const auto r = p.at("ratios").get<std::vector<double>>();
    if (r.size() != 3) throw ValidationError("bad ratios");
    plan.ratios = {r[0], r[1], r[2]};
    for (const auto& s : p.at("assignment")) {
      const auto name = s.get<std::string>();
      if (name == "train") plan.assignment.push_back(Split::train);
      else if (name == "val") plan.assignment.push_back(Split::val);
      else if (name == "test") plan.assignment.push_back(Split::test);
      else throw ValidationError("bad split '" + name + "'");
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace windguard::scada
