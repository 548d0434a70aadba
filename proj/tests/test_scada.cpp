#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "windguard/error.hpp"
#include "windguard/rng.hpp"
#include "windguard/scada.hpp"
#include "windguard/timeutil.hpp"

using namespace windguard;
using namespace windguard::scada;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "windguard_test_scada";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const UnixSeconds kT0 = *parse_rfc3339("2023-01-01T00:00:00Z");

// Hourly frame with the five base channels, all constant except where noted.
ScadaFrame hourly_frame(std::size_t hours, Rng& rng) {
  ScadaFrame f;
  f.turbine_id = 1;
  for (std::size_t h = 0; h < hours; ++h) f.timestamps.push_back(kT0 + static_cast<UnixSeconds>(h) * kHour);
  auto fill = [&](std::string_view name, double mean, double sd) {
    Channel c{std::string(name), {}};
    for (std::size_t h = 0; h < hours; ++h) c.values.push_back(rng.normal(mean, sd));
    f.channels.push_back(std::move(c));
  };
  fill(channel::kWindSpeed, 8, 2);
  fill(channel::kGeneratorSpeed, 1400, 100);
  fill(channel::kPitchAngle, 2, 1);
  fill(channel::kWindDirection, 180, 40);
  fill(channel::kPower, 900, 200);
  f.gaps.assign(hours, 0);
  f.labels = std::vector<std::uint8_t>(hours, 0);
  return f;
}

double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST_CASE("load_csv restores timestamp order from shuffled rows") {
  const auto p = scratch("shuffled.csv");
  write_text(p,
             "timestamp,WTUR.W.mag.f\n"
             "2023-01-01T02:00:00Z,3\n"
             "2023-01-01T00:00:00Z,1\n"
             "2023-01-01T01:00:00Z,2\n");
  const std::string req[] = {std::string(channel::kPower)};
  const auto r = load_csv(p, req, 4);
  REQUIRE(r.frame.size() == 3);
  CHECK(r.dropped_rows == 0);
  CHECK(r.frame.channel(channel::kPower) == std::vector<double>{1, 2, 3});
  CHECK(r.frame.timestamps[0] == kT0);
  CHECK(r.frame.turbine_id == 4);
}

TEST_CASE("load_csv schema and malformed rows") {
  const std::string req[] = {std::string(channel::kPower)};
  const auto missing = scratch("missing.csv");
  write_text(missing, "timestamp,WMET.HorWdSpd.mag.f\n2023-01-01T00:00:00Z,3\n");
  CHECK_THROWS_AS(load_csv(missing, req, 1), ValidationError);
  CHECK_THROWS_AS(load_csv(scratch("does_not_exist.csv"), req, 1), ValidationError);

  std::string text = "timestamp,WTUR.W.mag.f,label\n";
  for (int i = 0; i < 10; ++i) {
    char row[96];
    std::snprintf(row, sizeof row, "2023-01-01T%02d:00:00Z,%s,0\n", i, i == 6 ? "abc" : "12.5");
    text += row;
  }
  const auto bad = scratch("malformed.csv");
  write_text(bad, text);
  const auto r = load_csv(bad, req, 1);
  CHECK(r.frame.size() == 9);
  CHECK(r.dropped_rows == 1);
  REQUIRE(r.frame.labels.has_value());

  const auto empty = scratch("empty_rows.csv");
  write_text(empty, "timestamp,WTUR.W.mag.f\nnot-a-time,1\n");
  CHECK_THROWS_AS(load_csv(empty, req, 1), ValidationError);
}

TEST_CASE("csv round trip through write_csv") {
  Rng rng(3);
  ScadaFrame f = hourly_frame(30, rng);
  f.gaps[5] = 1;
  for (auto& c : f.channels) c.values[5] = std::nan("");
  (*f.labels)[10] = 1;
  const auto p = scratch("roundtrip.csv");
  write_csv(f, p, 6);
  const auto r = load_csv(p, base_channels(), 1);
  CHECK(r.frame.size() == 29);  // gap row has empty cells
  const ScadaFrame h = resample_hourly(r.frame);
  REQUIRE(h.size() == 30);
  CHECK(h.gaps[5] == 1);
  CHECK((*h.labels)[10] == 1);
  CHECK(h.channel(channel::kPower)[3] == doctest::Approx(f.channel(channel::kPower)[3]).epsilon(1e-8));
}

TEST_CASE("resample_hourly means, single samples and gaps") {
  ScadaFrame f;
  const std::vector<double> speeds = {1, 2, 3, 4, 5, 6};
  for (int i = 0; i < 6; ++i) f.timestamps.push_back(kT0 + i * 600);
  f.timestamps.push_back(kT0 + 2 * kHour + 300);  // hour 1 has no samples
  f.channels.push_back({std::string(channel::kWindSpeed), {1, 2, 3, 4, 5, 6, 9}});
  f.gaps.assign(7, 0);
  f.labels = std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0, 0};
  const ScadaFrame h = resample_hourly(f);
  REQUIRE(h.size() == 3);
  CHECK(h.channel(channel::kWindSpeed)[0] == 3.5);
  CHECK(h.gaps[1] == 1);
  CHECK(std::isnan(h.channel(channel::kWindSpeed)[1]));
  CHECK(h.channel(channel::kWindSpeed)[2] == 9.0);
  CHECK((*h.labels)[0] == 1);  // 3 of 6 bad: tie goes to bad
  CHECK(h.timestamps[2] == kT0 + 2 * kHour);
  CHECK_THROWS_AS(resample_hourly(ScadaFrame{}), ValidationError);
}

TEST_CASE("resample_hourly preserves the mean with equal counts") {
  Rng rng(5);
  ScadaFrame f;
  std::vector<double> v;
  for (int i = 0; i < 6 * 50; ++i) {
    f.timestamps.push_back(kT0 + i * 600);
    v.push_back(rng.uniform(0, 20));
  }
  f.channels.push_back({"x", v});
  f.gaps.assign(v.size(), 0);
  const ScadaFrame h = resample_hourly(f);
  double raw = 0, hourly = 0;
  for (double x : v) raw += x;
  for (double x : h.channel("x")) hourly += x;
  CHECK(hourly / 50.0 == doctest::Approx(raw / 300.0).epsilon(1e-12));
}

TEST_CASE("prune_correlated") {
  Rng rng(8);
  ScadaFrame f;
  std::vector<double> a, b, c, k, p;
  for (int i = 0; i < 200; ++i) {
    f.timestamps.push_back(kT0 + i * kHour);
    a.push_back(rng.normal());
    b.push_back(2.0 * a.back());
    c.push_back(rng.normal());
    k.push_back(50.0);
    p.push_back(rng.normal(500, 100));
  }
  f.channels = {{"A", a}, {"B", b}, {"C", c}, {"K", k}, {std::string(channel::kPower), p}};
  f.gaps.assign(200, 0);
  const PruneResult r = prune_correlated(f, 0.9);
  CHECK(r.kept == std::vector<std::string>{"A", "C", std::string(channel::kPower)});
  REQUIRE(r.dropped.size() == 1);
  CHECK(r.dropped[0].channel == "B");
  CHECK(r.dropped[0].partner == "A");
  CHECK(r.dropped[0].correlation == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.zero_variance == std::vector<std::string>{"K"});
  // Independent channels stay below the threshold.
  CHECK(std::abs(naive_pearson(a, c)) < 0.9);

  // Idempotent: pruning the kept set drops nothing.
  const PruneResult again = prune_correlated(f.select(r.kept), 0.9);
  CHECK(again.kept == r.kept);
  CHECK(again.dropped.empty());

  // The target is never dropped, even when it duplicates an earlier channel.
  f.channels[4].values = a;
  const PruneResult t = prune_correlated(f, 0.9);
  CHECK(std::find(t.kept.begin(), t.kept.end(), channel::kPower) != t.kept.end());

  CHECK_THROWS_AS(prune_correlated(f, 1.5), ValidationError);
}

TEST_CASE("pearson matches the sum-of-products oracle") {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
      x.push_back(rng.normal());
      y.push_back(0.3 * x.back() + rng.normal());
    }
    CHECK(pearson(x, y) == doctest::Approx(naive_pearson(x, y)).epsilon(1e-10));
  }
}

TEST_CASE("engineer_features") {
  Rng rng(12);
  ScadaFrame f = hourly_frame(12, rng);
  auto set = [&](std::string_view name, std::vector<double> v) {
    for (auto& c : f.channels)
      if (c.name == name) c.values = v;
  };
  set(channel::kWindSpeed, std::vector<double>(12, 7.0));
  set(channel::kWindDirection, std::vector<double>(12, 90.0));
  std::vector<double> pitch(12, 2.0), gen(12, 100.0);
  gen[11] = 200.0;
  set(channel::kPitchAngle, pitch);
  set(channel::kGeneratorSpeed, gen);

  const FeatureFrame l = engineer_features(f, ModelKind::lstm);
  REQUIRE(l.size() == 7);  // first 5 hours lack a full turbulence window
  CHECK(l.inputs.size() == 4);
  CHECK(l.timestamps.front() == f.timestamps[5]);
  CHECK(l.inputs[2][5] == 200.0);
  CHECK(l.inputs[2][6] == 400.0);
  CHECK(l.wind_direction_sin[0] == doctest::Approx(1.0).epsilon(1e-15));
  for (double t : l.inputs[3]) CHECK(t == 0.0);  // constant wind → zero turbulence

  const FeatureFrame n = engineer_features(f, ModelKind::fnn);
  CHECK(n.input_names[2] == "wind_speed_x_generator_speed");
  CHECK(n.inputs[2][6] == 1400.0);
  for (double t : n.inputs[3]) CHECK(t == 0.0);

  ScadaFrame missing = f;
  missing.channels.erase(missing.channels.begin());
  CHECK_THROWS_AS(engineer_features(missing, ModelKind::lstm), ValidationError);
}

TEST_CASE("rolling_std matches a direct sample standard deviation") {
  Rng rng(13);
  std::vector<double> v(40);
  for (double& x : v) x = rng.uniform(0, 10);
  std::vector<std::uint8_t> gaps(40, 0);
  gaps[20] = 1;
  const auto s = rolling_std(v, gaps, 6);
  for (std::size_t i = 0; i < 40; ++i) {
    if (i < 5 || (i >= 20 && i < 26)) {
      CHECK(std::isnan(s[i]));
      continue;
    }
    double m = 0;
    for (std::size_t k = i - 5; k <= i; ++k) m += v[k] / 6.0;
    double ss = 0;
    for (std::size_t k = i - 5; k <= i; ++k) ss += (v[k] - m) * (v[k] - m);
    CHECK(s[i] == doctest::Approx(std::sqrt(ss / 5.0)).epsilon(1e-12));
  }
}

namespace {

FeatureFrame feature_frame(std::size_t hours) {
  FeatureFrame f;
  for (std::size_t h = 0; h < hours; ++h) f.timestamps.push_back(kT0 + static_cast<UnixSeconds>(h) * kHour);
  f.inputs.assign(4, std::vector<double>(hours));
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t h = 0; h < hours; ++h) f.inputs[j][h] = static_cast<double>(j * 1000 + h);
  f.target.assign(hours, 1.0);
  f.gaps.assign(hours, 0);
  return f;
}

}  // namespace

TEST_CASE("make_day_groups") {
  CHECK(make_day_groups(feature_frame(216)).size() == 3);
  const auto g220 = make_day_groups(feature_frame(220));
  CHECK(g220.size() == 3);
  CHECK(g220.back().begin + g220.back().length == 216);
  FeatureFrame one = feature_frame(72);
  one.gaps[40] = 1;
  CHECK(make_day_groups(one).empty());

  // Anchored to an origin earlier than the frame: the cut first slot is dropped,
  // and group ids count slots from the origin.
  const auto anchored = make_day_groups(feature_frame(216), 72, kT0 - 10 * kHour);
  REQUIRE(anchored.size() == 2);
  CHECK(anchored[0].group_id == 1);
  CHECK(anchored[0].begin == 62);
  CHECK(group_slot_count(feature_frame(216), 72, kT0 - 10 * kHour) == 3);

  FeatureFrame labelled = feature_frame(144);
  labelled.labels = std::vector<std::uint8_t>(144, 0);
  (*labelled.labels)[100] = 1;
  const auto lg = make_day_groups(labelled);
  CHECK_FALSE(lg[0].bad);
  CHECK(lg[1].bad);
}

TEST_CASE("slide_windows counts and contents") {
  const FeatureFrame f = feature_frame(72);
  const DayGroup g{5, 0, 72, false};
  const auto w = slide_windows(f, g, 24, 1);
  CHECK(w.size() == 49);
  CHECK(slide_windows(f, g, 72, 1).size() == 1);
  CHECK(slide_windows(f, g, 24, 24).size() == 3);
  CHECK_THROWS_AS(slide_windows(f, DayGroup{0, 0, 20, false}, 24, 1), ValidationError);
  for (const auto& s : w) {
    CHECK(s.offset + s.hours <= 72);
    CHECK(s.group_id == 5);
  }
  CHECK(w[10].input(2, 3) == 2000.0 + 13.0);
  for (std::size_t G : {24u, 48u, 72u, 100u})
    for (std::size_t W : {1u, 5u, 24u})
      for (std::size_t s : {1u, 2u, 7u}) {
        if (W > G) continue;
        std::size_t brute = 0;
        for (std::size_t o = 0; o + W <= G; o += s) ++brute;
        CHECK(window_count(G, W, s) == brute);
        CHECK(slide_windows(feature_frame(G), DayGroup{0, 0, G, false}, W, s).size() == brute);
      }
}

TEST_CASE("assign_splits") {
  const SplitPlan p = assign_splits(10, 17, {0.8, 0.1, 0.1});
  std::array<int, 3> counts{};
  for (Split s : p.assignment) ++counts[static_cast<int>(s)];
  CHECK(counts == std::array<int, 3>{8, 1, 1});
  CHECK(assign_splits(10, 17, {0.8, 0.1, 0.1}) == p);
  CHECK_FALSE(assign_splits(73, 18, {0.7, 0.15, 0.15}).assignment == assign_splits(73, 17, {0.7, 0.15, 0.15}).assignment);
  for (Split s : assign_splits(7, 3, {1.0, 0.0, 0.0}).assignment) CHECK(s == Split::train);
  CHECK_THROWS_AS(assign_splits(10, 1, {1.2, -0.1, -0.1}), ValidationError);
  CHECK_THROWS_AS(assign_splits(10, 1, {0.5, 0.1, 0.1}), ValidationError);

  const SplitPlan big = assign_splits(73, 42, {0.7, 0.15, 0.15});
  std::array<int, 3> c{};
  for (Split s : big.assignment) ++c[static_cast<int>(s)];
  CHECK(c == std::array<int, 3>{53, 10, 10});

  const auto path = scratch("sidecar.json");
  write_sidecar(path, big, {{"lstm", NormalizerStats{{1, 2}, {3, 4}}}});
  CHECK(read_split_plan(path) == big);
}

TEST_CASE("normalizer") {
  WindowSample s;
  s.features = 1;
  s.hours = 2;
  s.inputs = {3.0, 7.0};  // mean 5, population std 2
  s.target = {0, 0};
  const std::vector<WindowSample> train = {s};
  const NormalizerStats st = fit_normalizer(train);
  CHECK(st.mean[0] == 5.0);
  CHECK(st.stddev[0] == 2.0);
  WindowSample nine = s;
  nine.inputs = {9.0, 5.0};
  CHECK(apply_normalizer(nine, st).inputs == std::vector<double>{2.0, 0.0});

  WindowSample k = s;
  k.inputs = {4.0, 4.0};
  const std::vector<WindowSample> flat = {k};
  const NormalizerStats fs = fit_normalizer(flat);
  CHECK(fs.stddev[0] == kStdFloor);
  for (double v : apply_normalizer(k, fs).inputs) CHECK(v == 0.0);

  Rng rng(4);
  WindowSample r;
  r.features = 3;
  r.hours = 5;
  for (int i = 0; i < 15; ++i) r.inputs.push_back(rng.normal(100, 30));
  const std::vector<WindowSample> rs = {r};
  const auto back = invert_normalizer(apply_normalizer(r, fit_normalizer(rs)), fit_normalizer(rs));
  for (std::size_t i = 0; i < 15; ++i) CHECK(back.inputs[i] == doctest::Approx(r.inputs[i]).epsilon(1e-12));
  CHECK_THROWS_AS(fit_normalizer(std::span<const WindowSample>{}), ValidationError);
}

TEST_CASE("rfc3339 parsing") {
  CHECK(parse_rfc3339("1970-01-01T00:00:00Z") == 0);
  CHECK(parse_rfc3339("2023-01-01T01:00:00+01:00") == kT0);
  CHECK(parse_rfc3339("2023-01-01T00:00:00.75Z") == kT0);
  CHECK_FALSE(parse_rfc3339("2023-13-01T00:00:00Z").has_value());
  CHECK_FALSE(parse_rfc3339("yesterday").has_value());
  CHECK(format_rfc3339(kT0 + 3723) == "2023-01-01T01:02:03Z");
}
