#include "windguard/detection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "windguard/error.hpp"
#include "windguard/timeutil.hpp"

namespace windguard::detection {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<scada::WindowSample> windows_at(const scada::FeatureFrame& frame, std::span<const Segment> starts) {
  std::vector<scada::WindowSample> out;
  out.reserve(starts.size());
  for (const Segment& s : starts) {
    const scada::DayGroup g{0, s.begin, s.end - s.begin, false};
    auto w = scada::slide_windows(frame, g, s.end - s.begin, s.end - s.begin);
    out.push_back(std::move(w.front()));
  }
  return out;
}

}  // namespace

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw ValidationError("percentile: empty list");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("percentile: p must be in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double rank = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (rank - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

std::uint8_t majority_label(std::span<const std::uint8_t> labels) {
  std::size_t bad = 0;
  for (std::uint8_t l : labels) bad += l ? 1 : 0;
  return !labels.empty() && 2 * bad >= labels.size() ? 1 : 0;
}

std::vector<Segment> window_starts(std::span<const Segment> segments, std::span<const std::uint8_t> gaps,
                                   std::size_t window_hours) {
  if (window_hours == 0) throw ValidationError("window_starts: window must be at least one hour");
  std::vector<Segment> out;
  for (const Segment& seg : segments) {
    if (seg.end > gaps.size() || seg.begin > seg.end) throw ValidationError("window_starts: segment out of range");
    std::size_t run_start = seg.begin;
    for (std::size_t i = seg.begin; i <= seg.end; ++i) {
      if (i < seg.end && !gaps[i]) continue;
      for (std::size_t w = run_start; w + window_hours <= i; w += window_hours) out.push_back({w, w + window_hours});
      run_start = i + 1;
    }
  }
  return out;
}

std::vector<WindowError> score_windows(const scada::FeatureFrame& frame, std::span<const double> predicted,
                                       std::span<const Segment> segments, std::size_t window_hours,
                                       ensemble::RmspeForm form) {
  if (predicted.size() != frame.size()) throw ValidationError("score_windows: prediction length mismatch");
  const auto starts = window_starts(segments, frame.gaps, window_hours);
  if (starts.empty()) throw ValidationError("score_windows: timeline shorter than one window");
  std::vector<WindowError> out;
  for (const Segment& w : starts) {
    const std::span<const double> truth(frame.target.data() + w.begin, window_hours);
    const std::span<const double> pred(predicted.data() + w.begin, window_hours);
    WindowError e;
    e.start = frame.timestamps[w.begin];
    e.start_index = w.begin;
    e.rmse = ensemble::rmse(truth, pred);
    e.rmspe = ensemble::try_rmspe(truth, pred, form);
    if (frame.labels) e.truth = majority_label(std::span(frame.labels->data() + w.begin, window_hours));
    out.push_back(e);
  }
  return out;
}

std::vector<double> predict_hourly(const scada::FeatureFrame& lstm_frame, const scada::FeatureFrame& fnn_frame,
                                   const ensemble::EnsembleModel& model, std::span<const Segment> segments,
                                   std::size_t window_hours) {
  if (lstm_frame.timestamps != fnn_frame.timestamps) throw ValidationError("window_errors: frames are not aligned");
  const auto starts = window_starts(segments, lstm_frame.gaps, window_hours);
  std::vector<double> hourly(lstm_frame.size(), std::numeric_limits<double>::quiet_NaN());
  if (starts.empty()) return hourly;
  const auto lstm_windows = windows_at(lstm_frame, starts);
  const auto fnn_windows = windows_at(fnn_frame, starts);
  const auto pred = ensemble::ensemble_predict(model, lstm_windows, fnn_windows);
  for (std::size_t k = 0; k < starts.size(); ++k)
    std::copy(pred[k].begin(), pred[k].end(), hourly.begin() + static_cast<std::ptrdiff_t>(starts[k].begin));
  return hourly;
}

std::vector<WindowError> window_errors(const scada::FeatureFrame& lstm_frame, const scada::FeatureFrame& fnn_frame,
                                       const ensemble::EnsembleModel& model, std::span<const Segment> segments,
                                       std::size_t window_hours, ensemble::RmspeForm form) {
  const auto hourly = predict_hourly(lstm_frame, fnn_frame, model, segments, window_hours);
  return score_windows(lstm_frame, hourly, segments, window_hours, form);
}

CutoffLimits compute_cutoffs(std::span<const WindowError> validation, int turbine_id, double p_rmse, double p_rmspe) {
  if (validation.empty()) throw ValidationError("compute_cutoffs: empty validation set");
  std::vector<double> rmse, rmspe;
  for (const WindowError& e : validation) {
    rmse.push_back(e.rmse);
    if (e.rmspe) rmspe.push_back(*e.rmspe);
  }
  CutoffLimits c;
  c.turbine_id = turbine_id;
  c.rmse_percentile = p_rmse;
  c.rmspe_percentile = p_rmspe;
  c.window_count = validation.size();
  c.rmspe_window_count = rmspe.size();
  c.rmse_cutoff = percentile(rmse, p_rmse);
  c.rmspe_cutoff = rmspe.empty() ? std::numeric_limits<double>::infinity() : percentile(rmspe, p_rmspe);
  c.low_sample_warning = validation.size() < 10;
  return c;
}

void write_cutoffs(const CutoffLimits& c, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "windguard-cutoffs";
  j["version"] = 1;
  j["turbine_id"] = c.turbine_id;
  j["rmse_cutoff"] = c.rmse_cutoff;
  j["rmspe_cutoff"] = std::isfinite(c.rmspe_cutoff) ? nlohmann::ordered_json(c.rmspe_cutoff) : nlohmann::ordered_json();
  j["rmse_percentile"] = c.rmse_percentile;
  j["rmspe_percentile"] = c.rmspe_percentile;
  j["window_count"] = c.window_count;
  j["rmspe_window_count"] = c.rmspe_window_count;
  j["low_sample_warning"] = c.low_sample_warning;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

CutoffLimits read_cutoffs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    CutoffLimits c;
    c.turbine_id = j.at("turbine_id").get<int>();
    c.rmse_cutoff = j.at("rmse_cutoff").get<double>();
    c.rmspe_cutoff = j.at("rmspe_cutoff").is_null() ? std::numeric_limits<double>::infinity()
                                                    : j.at("rmspe_cutoff").get<double>();
    c.rmse_percentile = j.at("rmse_percentile").get<double>();
    c.rmspe_percentile = j.at("rmspe_percentile").get<double>();
    c.window_count = j.at("window_count").get<std::size_t>();
    c.rmspe_window_count = j.at("rmspe_window_count").get<std::size_t>();
    c.low_sample_warning = j.at("low_sample_warning").get<bool>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::rmse: return "rmse";
    case Mode::rmspe: return "rmspe";
    case Mode::mixed: return "mixed";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  for (Mode m : kModes)
    if (to_string(m) == text) return m;
  throw ValidationError("unknown detection mode '" + std::string(text) + "'");
}

std::vector<std::uint8_t> label_windows(std::span<const WindowError> errors, const CutoffLimits& limits, Mode mode) {
  std::vector<std::uint8_t> out;
  out.reserve(errors.size());
  for (const WindowError& e : errors) {
    const bool by_rmse = e.rmse > limits.rmse_cutoff;
    const bool by_rmspe = e.rmspe ? *e.rmspe > limits.rmspe_cutoff : by_rmse;
    bool bad = false;
    switch (mode) {
      case Mode::rmse: bad = by_rmse; break;
      case Mode::rmspe: bad = by_rmspe; break;
      case Mode::mixed: bad = by_rmse || by_rmspe; break;
    }
    out.push_back(bad ? 1 : 0);
  }
  return out;
}

ConfusionMatrix confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) throw ValidationError("confusion: length mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) (predicted[i] ? cm.true_bad : cm.missed_bad)++;
    else (predicted[i] ? cm.false_bad : cm.true_good)++;
  }
  return cm;
}

Scores scores(const ConfusionMatrix& cm) {
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  Scores s;
  // Per class: (tp, fp, fn).
  const std::array<std::array<double, 3>, 2> counts = {{
      {double(cm.true_good), double(cm.missed_bad), double(cm.false_bad)},
      {double(cm.true_bad), double(cm.false_bad), double(cm.missed_bad)},
  }};
  s.support = {cm.true_good + cm.false_bad, cm.true_bad + cm.missed_bad};
  const double n = static_cast<double>(cm.total());
  for (std::size_t c = 0; c < 2; ++c) {
    const auto [tp, fp, fn] = counts[c];
    s.precision[c] = ratio(tp, tp + fp);
    s.recall[c] = ratio(tp, tp + fn);
    s.f1[c] = ratio(2.0 * s.precision[c] * s.recall[c], s.precision[c] + s.recall[c]);
    s.weighted_f1 += ratio(static_cast<double>(s.support[c]), n) * s.f1[c];
  }
  return s;
}

DetectionReport detect(std::span<const WindowError> test_windows, const CutoffLimits& limits) {
  if (test_windows.empty()) throw ValidationError("detect: empty test range");
  DetectionReport r;
  r.turbine_id = limits.turbine_id;
  r.cutoffs = limits;
  r.windows.assign(test_windows.begin(), test_windows.end());
  std::vector<std::uint8_t> truth;
  for (const WindowError& e : test_windows) truth.push_back(e.truth);
  for (std::size_t m = 0; m < kModes.size(); ++m) {
    r.predicted[m] = label_windows(test_windows, limits, kModes[m]);
    r.matrices[m] = confusion(r.predicted[m], truth);
    r.scores[m] = scores(r.matrices[m]);
  }
  return r;
}

void write_window_csv(const DetectionReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "turbine,window_start,rmse,rmspe,flags,truth,pred_rmse,pred_rmspe,pred_mixed\n";
  for (std::size_t i = 0; i < r.windows.size(); ++i) {
    const WindowError& e = r.windows[i];
    out << r.turbine_id << ',' << format_rfc3339(e.start) << ',' << fmt(e.rmse) << ','
        << (e.rmspe ? fmt(*e.rmspe) : std::string()) << ',' << (e.rmspe ? "" : "rmspe_undefined") << ','
        << int(e.truth) << ',' << int(r.predicted[0][i]) << ',' << int(r.predicted[1][i]) << ','
        << int(r.predicted[2][i]) << '\n';
  }
}

void write_confusion_csv(const DetectionReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "turbine,mode,true_good,false_bad,missed_bad,true_bad,precision_good,recall_good,f1_good,"
         "precision_bad,recall_bad,f1_bad,weighted_f1\n";
  for (std::size_t m = 0; m < kModes.size(); ++m) {
    const ConfusionMatrix& cm = r.matrices[m];
    const Scores& s = r.scores[m];
    out << r.turbine_id << ',' << to_string(kModes[m]) << ',' << cm.true_good << ',' << cm.false_bad << ','
        << cm.missed_bad << ',' << cm.true_bad << ',' << fmt(s.precision[0]) << ',' << fmt(s.recall[0]) << ','
        << fmt(s.f1[0]) << ',' << fmt(s.precision[1]) << ',' << fmt(s.recall[1]) << ',' << fmt(s.f1[1]) << ','
        << fmt(s.weighted_f1) << '\n';
  }
}

}  // namespace windguard::detection
