#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "test_common.hpp"
#include "windguard/detection.hpp"
#include "windguard/error.hpp"

using namespace windguard;
using namespace windguard::detection;

namespace {

// Sort-and-interpolate written out longhand.
double naive_percentile(std::vector<double> v, double p) {
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j)
      if (v[j] < v[i]) std::swap(v[i], v[j]);
  const double r = p * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(r);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (r - lo) * (v[hi] - v[lo]);
}

double naive_weighted_f1(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth) {
  double total = 0;
  for (int c = 0; c < 2; ++c) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == c, t = truth[i] == c;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
      support += t;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
    total += support / pred.size() * f1;
  }
  return total;
}

std::vector<WindowError> errors_from(const std::vector<double>& rmse, const std::vector<double>& rmspe) {
  std::vector<WindowError> out;
  for (std::size_t i = 0; i < rmse.size(); ++i) {
    WindowError e;
    e.start = static_cast<UnixSeconds>(i) * 86400;
    e.rmse = rmse[i];
    if (!std::isnan(rmspe[i])) e.rmspe = rmspe[i];
    out.push_back(e);
  }
  return out;
}

std::vector<WindowError> random_errors(Rng& rng, std::size_t n, bool with_ties) {
  std::vector<WindowError> out;
  for (std::size_t i = 0; i < n; ++i) {
    WindowError e;
    e.rmse = rng.uniform(0.0, 300.0);
    if (with_ties) e.rmse = std::round(e.rmse / 50.0);
    if (rng.uniform() > 0.1) e.rmspe = with_ties ? std::round(rng.uniform(0.0, 4.0)) : rng.uniform(0.0, 6.0);
    e.truth = rng.uniform() < 0.3;
    out.push_back(e);
  }
  return out;
}

scada::FeatureFrame frame_of(std::size_t hours) {
  scada::FeatureFrame f;
  for (std::size_t h = 0; h < hours; ++h) f.timestamps.push_back(1'700'000'000 + static_cast<UnixSeconds>(h) * 3600);
  f.inputs.assign(4, std::vector<double>(hours, 0.0));
  f.target.assign(hours, 100.0);
  f.gaps.assign(hours, 0);
  f.labels = std::vector<std::uint8_t>(hours, 0);
  return f;
}

}  // namespace

TEST_CASE("percentile examples") {
  const std::vector<double> one = {7.5};
  for (double p : {0.0, 0.3, 0.9, 1.0}) CHECK(percentile(one, p) == 7.5);
  std::vector<double> v;
  for (int i = 20; i >= 1; --i) v.push_back(i);
  CHECK(percentile(v, 0.90) == doctest::Approx(18.1).epsilon(1e-14));
  CHECK(percentile(v, 1.0) == 20.0);
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK_THROWS_AS(percentile(std::vector<double>{}, 0.5), ValidationError);
  CHECK_THROWS_AS(percentile(v, 1.5), ValidationError);
}

TEST_CASE("percentile and weighted F1 agree with naive oracles") {
  Rng rng(61);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + rng.index(60);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-50.0, 500.0);
    const double p = rng.uniform();
    const double o = naive_percentile(v, p);
    CHECK(std::abs(percentile(v, p) - o) <= 1e-12 * std::max(1.0, std::abs(o)));

    std::vector<std::uint8_t> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) pred[i] = rng.uniform() < 0.4, truth[i] = rng.uniform() < 0.3;
    const double f = scores(confusion(pred, truth)).weighted_f1;
    CHECK(std::abs(f - naive_weighted_f1(pred, truth)) <= 1e-12);
    CHECK((f >= 0.0 && f <= 1.0));
  }
}

TEST_CASE("scores examples") {
  const std::vector<std::uint8_t> truth = {0, 0, 0, 1}, pred = {0, 0, 1, 1};
  const ConfusionMatrix cm = confusion(pred, truth);
  CHECK(cm.true_good == 2);
  CHECK(cm.false_bad == 1);
  CHECK(cm.missed_bad == 0);
  CHECK(cm.true_bad == 1);
  CHECK(cm.total() == 4);
  const Scores s = scores(cm);
  CHECK(s.f1[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s.f1[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.weighted_f1 == doctest::Approx(0.7667).epsilon(1e-4));
  CHECK(s.weighted_f1 == doctest::Approx(0.75 * 0.8 + 0.25 * 2.0 / 3.0).epsilon(1e-15));

  CHECK(scores(confusion(truth, truth)).weighted_f1 == 1.0);
  const std::vector<std::uint8_t> good(5, 0);
  const Scores g = scores(confusion(good, good));
  CHECK(g.weighted_f1 == 1.0);
  CHECK(g.precision[1] == 0.0);
  CHECK(g.support[1] == 0);
  CHECK_THROWS_AS(confusion(pred, good), ValidationError);
}

TEST_CASE("majority label ties go to bad") {
  const std::vector<std::uint8_t> tie = {0, 1, 1, 0}, good = {0, 0, 1}, bad = {1, 1, 0};
  CHECK(majority_label(tie) == 1);
  CHECK(majority_label(good) == 0);
  CHECK(majority_label(bad) == 1);
}

TEST_CASE("cutoffs") {
  std::vector<double> r, s;
  for (int i = 1; i <= 20; ++i) r.push_back(i), s.push_back(i / 10.0);
  const CutoffLimits c = compute_cutoffs(errors_from(r, s), 4);
  CHECK(c.rmse_cutoff == doctest::Approx(18.1).epsilon(1e-14));
  CHECK(c.rmspe_cutoff == doctest::Approx(percentile(s, 0.95)).epsilon(1e-15));
  CHECK(c.window_count == 20);
  CHECK(!c.low_sample_warning);

  const CutoffLimits k = compute_cutoffs(errors_from({3, 3, 3}, {3, 3, 3}), 1);
  CHECK(k.rmse_cutoff == 3.0);
  CHECK(k.rmspe_cutoff == 3.0);
  CHECK(k.low_sample_warning);

  // Undefined RMSPE windows are left out of the RMSPE statistic.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const CutoffLimits u = compute_cutoffs(errors_from({1, 2, 3}, {nan, 0.5, nan}), 1);
  CHECK(u.rmspe_cutoff == 0.5);
  CHECK(u.rmspe_window_count == 1);
  CHECK(std::isinf(compute_cutoffs(errors_from({1}, {nan}), 1).rmspe_cutoff));
  CHECK_THROWS_AS(compute_cutoffs(std::vector<WindowError>{}, 1), ValidationError);
}

TEST_CASE("validation exceedance stays within the percentile bound") {
  Rng rng(62);
  for (int k = 0; k < 500; ++k) {
    const std::size_t n = 20 + rng.index(200);
    const auto errs = random_errors(rng, n, k % 2 == 0);
    const CutoffLimits c = compute_cutoffs(errs, 1);
    std::size_t over_rmse = 0, over_rmspe = 0, defined = 0;
    for (const auto& e : errs) {
      over_rmse += e.rmse > c.rmse_cutoff;
      if (e.rmspe) ++defined, over_rmspe += *e.rmspe > c.rmspe_cutoff;
    }
    CHECK(static_cast<double>(over_rmse) / n <= 0.10 + 1.0 / n);
    if (defined >= 20) CHECK(static_cast<double>(over_rmspe) / defined <= 0.05 + 1.0 / defined);
  }
}

TEST_CASE("labelling: modes, union, monotonicity, fallback") {
  CutoffLimits c;
  c.rmse_cutoff = 10;
  c.rmspe_cutoff = 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto errs = errors_from({12, 5, 12, 5, 12}, {0.5, 2, 2, 0.5, nan});
  CHECK(label_windows(errs, c, Mode::rmse) == std::vector<std::uint8_t>{1, 0, 1, 0, 1});
  CHECK(label_windows(errs, c, Mode::rmspe) == std::vector<std::uint8_t>{0, 1, 1, 0, 1});
  CHECK(label_windows(errs, c, Mode::mixed) == std::vector<std::uint8_t>{1, 1, 1, 0, 1});

  Rng rng(63);
  for (int k = 0; k < 300; ++k) {
    const auto e = random_errors(rng, 40, k % 3 == 0);
    CutoffLimits lim = compute_cutoffs(random_errors(rng, 30, false), 1);
    const auto a = label_windows(e, lim, Mode::rmse);
    const auto b = label_windows(e, lim, Mode::rmspe);
    const auto m = label_windows(e, lim, Mode::mixed);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(m[i] == (a[i] | b[i]));

    std::vector<std::uint8_t> truth;
    for (const auto& w : e) truth.push_back(w.truth);
    const double rm = scores(confusion(m, truth)).recall[1];
    CHECK(rm >= scores(confusion(a, truth)).recall[1]);
    CHECK(rm >= scores(confusion(b, truth)).recall[1]);

    CutoffLimits raised = lim;
    raised.rmse_cutoff += rng.uniform(0.0, 50.0);
    raised.rmspe_cutoff += rng.uniform(0.0, 1.0);
    for (Mode mode : kModes) {
      const auto before = label_windows(e, lim, mode);
      const auto after = label_windows(e, raised, mode);
      for (std::size_t i = 0; i < e.size(); ++i) CHECK(after[i] <= before[i]);
    }
  }
}

TEST_CASE("window_starts and score_windows") {
  const std::vector<std::uint8_t> no_gaps(100, 0);
  const std::vector<Segment> s48 = {{0, 48}}, s47 = {{0, 47}};
  CHECK(window_starts(s48, no_gaps, 24).size() == 2);
  CHECK(window_starts(s47, no_gaps, 24).size() == 1);

  std::vector<std::uint8_t> gaps(100, 0);
  gaps[30] = 1;
  const std::vector<Segment> all = {{0, 100}};
  const auto w = window_starts(all, gaps, 24);
  REQUIRE(w.size() == 3);
  CHECK(w[0].begin == 0);
  CHECK(w[1].begin == 31);
  CHECK(w[2].begin == 55);

  scada::FeatureFrame f = frame_of(72);
  for (std::size_t h = 24; h < 48; ++h) f.target[h] = 0.0;
  for (std::size_t h = 48; h < 60; ++h) (*f.labels)[h] = 1;
  const std::vector<Segment> seg = {{0, 72}};
  const auto errs = score_windows(f, f.target, seg);
  REQUIRE(errs.size() == 3);
  for (const auto& e : errs) CHECK(e.rmse == 0.0);
  CHECK(errs[0].rmspe == 0.0);
  CHECK(!errs[1].rmspe);
  CHECK(errs[2].truth == 1);
  CHECK(errs[0].truth == 0);
  CHECK(errs[1].start == f.timestamps[24]);

  std::vector<double> off = f.target;
  for (double& v : off) v += 10.0;
  CHECK(score_windows(f, off, seg)[0].rmse == doctest::Approx(10.0).epsilon(1e-15));

  const std::vector<Segment> short_seg = {{0, 20}};
  CHECK_THROWS_AS(score_windows(f, f.target, short_seg), ValidationError);
  // Range entirely inside a gap.
  std::fill(f.gaps.begin(), f.gaps.begin() + 30, 1);
  const std::vector<Segment> in_gap = {{0, 30}};
  CHECK_THROWS_AS(score_windows(f, f.target, in_gap), ValidationError);
}

TEST_CASE("window_errors runs the ensemble on every window") {
  Rng rng(64);
  const auto model = test::untrained_ensemble(2, 2000.0, rng);
  scada::FeatureFrame lf = frame_of(60), ff = frame_of(60);
  for (auto* f : {&lf, &ff})
    for (auto& c : f->inputs)
      for (double& v : c) v = rng.normal();
  const std::vector<Segment> seg = {{5, 60}};
  const auto hourly = predict_hourly(lf, ff, model, seg);
  for (std::size_t h = 0; h < 60; ++h) CHECK(std::isnan(hourly[h]) == (h < 5 || h >= 53));
  const auto errs = window_errors(lf, ff, model, seg);
  REQUIRE(errs.size() == 2);
  std::vector<double> truth(lf.target.begin() + 29, lf.target.begin() + 53);
  std::vector<double> pred(hourly.begin() + 29, hourly.begin() + 53);
  CHECK(errs[1].rmse == ensemble::rmse(truth, pred));
  ff.timestamps[0] += 1;
  CHECK_THROWS_AS(window_errors(lf, ff, model, seg), ValidationError);
}

TEST_CASE("detect, cutoff file and CSV outputs") {
  Rng rng(65);
  const auto val = random_errors(rng, 30, false);
  const CutoffLimits c = compute_cutoffs(val, 9);
  const auto dir = std::filesystem::temp_directory_path() / "windguard_test_detection";
  std::filesystem::create_directories(dir);
  write_cutoffs(c, dir / "cutoffs.json");
  const CutoffLimits r = read_cutoffs(dir / "cutoffs.json");
  CHECK(r.turbine_id == 9);
  CHECK(r.rmse_cutoff == c.rmse_cutoff);
  CHECK(r.rmspe_cutoff == c.rmspe_cutoff);
  CHECK(r.window_count == c.window_count);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  CutoffLimits inf = compute_cutoffs(errors_from({1, 2}, {nan, nan}), 3);
  write_cutoffs(inf, dir / "inf.json");
  CHECK(std::isinf(read_cutoffs(dir / "inf.json").rmspe_cutoff));
  {
    std::ofstream(dir / "broken.json") << "{\"format\": \"something-else\"}";
  }
  CHECK_THROWS_AS(read_cutoffs(dir / "broken.json"), ValidationError);
  CHECK_THROWS_AS(read_cutoffs(dir / "missing.json"), ValidationError);

  const auto test_windows = random_errors(rng, 25, false);
  const DetectionReport rep = detect(test_windows, c);
  for (Mode m : kModes) {
    const auto& cm = rep.matrices[static_cast<std::size_t>(m)];
    CHECK(cm.total() == 25);
    CHECK(rep.predicted[static_cast<std::size_t>(m)] == label_windows(test_windows, c, m));
  }
  CHECK(rep.of(Mode::mixed).recall[1] >= rep.of(Mode::rmse).recall[1]);
  CHECK(rep.of(Mode::mixed).recall[1] >= rep.of(Mode::rmspe).recall[1]);

  // A perfect predictor stub: every truth-bad window is far above the cutoffs.
  std::vector<WindowError> stub = test_windows;
  for (auto& e : stub) {
    e.rmse = e.truth ? 1e6 : 0.0;
    e.rmspe = e.truth ? 1e6 : 0.0;
  }
  const DetectionReport perfect = detect(stub, c);
  for (Mode m : kModes) CHECK(perfect.of(m).weighted_f1 == 1.0);
  CHECK_THROWS_AS(detect(std::vector<WindowError>{}, c), ValidationError);

  write_window_csv(rep, dir / "windows.csv");
  write_confusion_csv(rep, dir / "confusion.csv");
  std::ifstream in(dir / "windows.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "turbine,window_start,rmse,rmspe,flags,truth,pred_rmse,pred_rmspe,pred_mixed");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 25);
  std::ifstream cin(dir / "confusion.csv");
  rows = 0;
  for (std::string line; std::getline(cin, line);) ++rows;
  CHECK(rows == 4);

  CHECK(parse_mode("mixed") == Mode::mixed);
  CHECK(to_string(Mode::rmspe) == "rmspe");
  CHECK_THROWS_AS(parse_mode("both"), ValidationError);
}
