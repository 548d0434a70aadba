#include "windguard/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>

#include "windguard/error.hpp"
#include "windguard/model_io.hpp"
#include "windguard/rng.hpp"
#include "windguard/timeutil.hpp"

namespace windguard::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

std::string turbine_tag(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "turbine_%02d", id);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const ordered_json& j, const fs::path& path) { open_out(path) << j.dump(2) << '\n'; }

std::uint64_t train_seed(std::uint64_t run_seed, int turbine, ModelKind kind) {
  return derive_seed(run_seed, static_cast<std::uint64_t>(turbine) * 2 + (kind == ModelKind::fnn ? 1 : 0));
}

ensemble::RmspeForm parse_form(const std::string& s) {
  if (s == "verbatim") return ensemble::RmspeForm::verbatim;
  if (s == "per_point") return ensemble::RmspeForm::per_point;
  throw ValidationError("unknown rmspe form '" + s + "'");
}

std::string form_name(ensemble::RmspeForm f) { return f == ensemble::RmspeForm::verbatim ? "verbatim" : "per_point"; }

struct PreparedManifest {
  std::uint64_t seed = 0;
  UnixSeconds origin = 0;
  std::map<int, double> rated_power;
};

PreparedManifest read_manifest(const Workspace& ws) {
  const auto path = ws.prepared() / "manifest.json";
  if (!fs::exists(path)) throw ValidationError("no prepared data in " + ws.prepared().string() + " (run prep)");
  const json j = read_json(path);
  PreparedManifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto origin = parse_rfc3339(j.at("origin").get<std::string>());
    if (!origin) throw ValidationError("manifest origin is not RFC 3339");
    m.origin = *origin;
    for (const auto& t : j.at("turbines")) m.rated_power[t.at("turbine_id").get<int>()] = t.at("rated_power").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return m;
}

std::vector<detection::Segment> group_segments(const TurbineDataset& d, auto&& keep) {
  std::vector<detection::Segment> out;
  for (const scada::DayGroup& g : d.groups)
    if (keep(g)) out.push_back({g.begin, g.begin + g.length});
  return out;
}

}  // namespace

// ---------------------------------------------------------------- config

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.prep.train_stride = 2;
  c.lstm.max_epochs = 30;
  c.lstm.patience = 6;
  c.fnn.max_epochs = 30;
  c.fnn.patience = 6;
  return c;
}

synth::FarmConfig RunConfig::farm_config() const {
  json j = farm;
  if (j.contains("preset") && !j.contains("seed")) j["seed"] = seed;
  return synth::farm_from_json(j);
}

void RunConfig::validate() const {
  if (!(prep.prune_threshold > 0.0 && prep.prune_threshold < 1.0))
    throw ValidationError("config: prune threshold must be in (0, 1)");
  if (prep.window_hours == 0 || prep.window_hours > prep.group_hours)
    throw ValidationError("config: window must fit inside a group");
  if (prep.train_stride == 0) throw ValidationError("config: stride must be positive");
  if (prep.turbulence_hours < 2) throw ValidationError("config: turbulence horizon must be at least 2 hours");
  const auto& r = prep.ratios;
  if (r.train <= 0 || r.val <= 0 || r.test <= 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
    throw ValidationError("config: split ratios must be positive and sum to 1");
  for (double p : {detect.rmse_percentile, detect.rmspe_percentile})
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("config: percentiles must be in [0, 1]");
  lstm.validate();
  fnn.validate();
  if (lstm.kind != ModelKind::lstm || fnn.kind != ModelKind::fnn) throw ValidationError("config: model kinds swapped");
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c = RunConfig::defaults();
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("farm")) c.farm = j.at("farm");
    if (j.contains("prep")) {
      const auto& p = j.at("prep");
      c.prep.prune_threshold = p.value("prune_threshold", c.prep.prune_threshold);
      c.prep.turbulence_hours = p.value("turbulence_hours", c.prep.turbulence_hours);
      c.prep.group_hours = p.value("group_hours", c.prep.group_hours);
      c.prep.window_hours = p.value("window_hours", c.prep.window_hours);
      c.prep.train_stride = p.value("train_stride", c.prep.train_stride);
      if (p.contains("ratios")) {
        const auto r = p.at("ratios").get<std::vector<double>>();
        if (r.size() != 3) throw ValidationError("config: ratios needs three values");
        c.prep.ratios = {r[0], r[1], r[2]};
      }
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      auto merge = [&](const char* key, training::TrainConfig& cfg, ModelKind kind) {
        if (!t.contains(key)) return;
        json merged = model_io::train_config_to_json(cfg);
        merged.update(t.at(key));
        cfg = model_io::train_config_from_json(merged, kind);
      };
      merge("lstm", c.lstm, ModelKind::lstm);
      merge("fnn", c.fnn, ModelKind::fnn);
    }
    if (j.contains("detect")) {
      const auto& d = j.at("detect");
      c.detect.rmse_percentile = d.value("rmse_percentile", c.detect.rmse_percentile);
      c.detect.rmspe_percentile = d.value("rmspe_percentile", c.detect.rmspe_percentile);
      if (d.contains("rmspe_form")) c.detect.rmspe_form = parse_form(d.at("rmspe_form").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ordered_json run_config_to_json(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["farm"] = c.farm;
  j["prep"] = {{"prune_threshold", c.prep.prune_threshold},
               {"turbulence_hours", c.prep.turbulence_hours},
               {"group_hours", c.prep.group_hours},
               {"window_hours", c.prep.window_hours},
               {"train_stride", c.prep.train_stride},
               {"ratios", {c.prep.ratios.train, c.prep.ratios.val, c.prep.ratios.test}}};
  ordered_json lstm = model_io::train_config_to_json(c.lstm);
  ordered_json fnn = model_io::train_config_to_json(c.fnn);
  lstm.erase("seed");
  fnn.erase("seed");
  j["train"] = {{"lstm", lstm}, {"fnn", fnn}};
  j["detect"] = {{"rmse_percentile", c.detect.rmse_percentile},
                 {"rmspe_percentile", c.detect.rmspe_percentile},
                 {"rmspe_form", form_name(c.detect.rmspe_form)}};
  return j;
}

RunConfig load_run_config(const std::optional<fs::path>& path) {
  if (path) return run_config_from_json(read_json(*path));
  if (const char* env = std::getenv(kConfigEnv); env && *env) return run_config_from_json(read_json(env));
  return RunConfig::defaults();
}

// ---------------------------------------------------------------- workspace

fs::path Workspace::raw_csv(int t) const { return data() / (turbine_tag(t) + ".csv"); }
fs::path Workspace::label_csv(int t) const { return data() / (turbine_tag(t) + "_labels.csv"); }
fs::path Workspace::hourly_csv(int t) const { return prepared() / (turbine_tag(t) + ".csv"); }
fs::path Workspace::sidecar(int t) const { return prepared() / (turbine_tag(t) + ".sidecar.json"); }
fs::path Workspace::model_file(int t, ModelKind k) const {
  return models() / (turbine_tag(t) + "_" + std::string(to_string(k)) + ".json");
}
fs::path Workspace::history_csv(int t, ModelKind k) const {
  return models() / (turbine_tag(t) + "_" + std::string(to_string(k)) + "_history.csv");
}
fs::path Workspace::cutoffs(int t) const { return models() / (turbine_tag(t) + "_cutoffs.json"); }
fs::path Workspace::detect_dir(int t) const { return reports() / "detect" / turbine_tag(t); }

std::vector<int> discover_turbines(const Workspace& ws, bool prepared) {
  const fs::path dir = prepared ? ws.prepared() : ws.data();
  if (!fs::is_directory(dir)) throw ValidationError("missing directory " + dir.string());
  static const std::regex pattern(R"(turbine_(\d+)\.csv)");
  std::vector<int> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) ids.push_back(std::stoi(m[1]));
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw ValidationError("no turbine CSVs in " + dir.string());
  return ids;
}

// ---------------------------------------------------------------- dataset

std::vector<scada::WindowSample> TurbineDataset::training_windows(ModelKind kind, std::size_t stride) const {
  std::vector<scada::WindowSample> out;
  for (const scada::DayGroup& g : groups) {
    const scada::Split split = plan.of(g.group_id);
    if (g.bad || split == scada::Split::test) continue;
    for (auto& w : scada::slide_windows(features(kind), g, window_hours, stride)) {
      w.split = split;
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<detection::Segment> TurbineDataset::validation_segments() const {
  return group_segments(*this, [&](const scada::DayGroup& g) { return !g.bad && plan.of(g.group_id) == scada::Split::val; });
}

std::vector<detection::Segment> TurbineDataset::good_test_segments() const {
  return group_segments(*this, [&](const scada::DayGroup& g) { return !g.bad && plan.of(g.group_id) == scada::Split::test; });
}

std::vector<detection::Segment> TurbineDataset::bad_segments() const {
  return group_segments(*this, [](const scada::DayGroup& g) { return g.bad; });
}

std::vector<detection::Segment> TurbineDataset::detection_segments() const {
  return group_segments(*this, [&](const scada::DayGroup& g) { return g.bad || plan.of(g.group_id) == scada::Split::test; });
}

cross_eval::TestSet TurbineDataset::windows(std::span<const detection::Segment> segments) const {
  cross_eval::TestSet set;
  for (const detection::Segment& w : detection::window_starts(segments, lstm.gaps, window_hours)) {
    const scada::DayGroup g{0, w.begin, w.end - w.begin, false};
    set.lstm.push_back(scada::slide_windows(lstm, g, window_hours, window_hours).front());
    set.fnn.push_back(scada::slide_windows(fnn, g, window_hours, window_hours).front());
  }
  return set;
}

TurbineDataset load_dataset(const Workspace& ws, const RunConfig& config, int turbine) {
  const PreparedManifest manifest = read_manifest(ws);
  if (!manifest.rated_power.contains(turbine))
    throw ValidationError("unknown turbine " + std::to_string(turbine));
  TurbineDataset d;
  d.turbine_id = turbine;
  d.rated_power = manifest.rated_power.at(turbine);
  d.window_hours = config.prep.window_hours;
  const auto loaded = scada::load_csv(ws.hourly_csv(turbine), scada::base_channels(), turbine);
  d.hourly = scada::resample_hourly(loaded.frame);
  const scada::FeatureOptions options{config.prep.turbulence_hours};
  d.lstm = scada::engineer_features(d.hourly, ModelKind::lstm, options);
  d.fnn = scada::engineer_features(d.hourly, ModelKind::fnn, options);
  d.plan = scada::read_split_plan(ws.sidecar(turbine));
  d.groups = scada::make_day_groups(d.lstm, config.prep.group_hours, manifest.origin);
  for (const auto& g : d.groups)
    if (static_cast<std::size_t>(g.group_id) >= d.plan.assignment.size())
      throw ValidationError("split plan does not cover group " + std::to_string(g.group_id));
  return d;
}

ensemble::EnsembleModel load_ensemble(const Workspace& ws, int turbine) {
  ensemble::EnsembleModel m;
  for (ModelKind k : {ModelKind::lstm, ModelKind::fnn})
    if (!fs::exists(ws.model_file(turbine, k)))
      throw ValidationError("missing " + std::string(to_string(k)) + " model for turbine " + std::to_string(turbine));
  m.lstm = model_io::load_model(ws.model_file(turbine, ModelKind::lstm));
  m.fnn = model_io::load_model(ws.model_file(turbine, ModelKind::fnn));
  m.validate();
  return m;
}

// ---------------------------------------------------------------- commands

void synth(const RunConfig& config, const Workspace& ws) {
  const synth::FarmConfig farm = config.farm_config();
  fs::create_directories(ws.data());
  const synth::Weather weather = synth::simulate_weather(farm.span_hours, farm.weather_seed, farm.sample_minutes, farm.start);
  for (const synth::TurbineConfig& t : farm.turbines) {
    const scada::ScadaFrame frame = synth::generate_turbine(t, weather, farm.start, farm.gap_episodes);
    scada::write_csv(frame, ws.raw_csv(t.turbine_id));
    const scada::ScadaFrame hourly = scada::resample_hourly(frame);
    auto out = open_out(ws.label_csv(t.turbine_id));
    out << "timestamp,label\n";
    for (std::size_t h = 0; h < hourly.size(); ++h)
      if (!hourly.gaps[h]) out << format_rfc3339(hourly.timestamps[h]) << ',' << int((*hourly.labels)[h]) << '\n';
  }
  synth::write_farm_config(farm, ws.data() / "farm.json");
  write_json({{"seed", config.seed}, {"turbines", farm.turbines.size()}}, ws.data() / "run.json");
}

void prep(const RunConfig& config, const Workspace& ws) {
  const std::vector<int> ids = discover_turbines(ws);
  std::map<int, double> rated;
  if (fs::exists(ws.data() / "farm.json"))
    for (const auto& t : synth::read_farm_config(ws.data() / "farm.json").turbines) rated[t.turbine_id] = t.rated_power;

  struct Prepared {
    scada::ScadaFrame hourly;
    scada::PruneResult pruning;
  };
  std::map<int, Prepared> frames;
  std::optional<UnixSeconds> origin;
  UnixSeconds end = 0;
  const scada::FeatureOptions options{config.prep.turbulence_hours};
  for (int id : ids) {
    const auto loaded = scada::load_csv(ws.raw_csv(id), scada::base_channels(), id);
    Prepared p;
    const scada::ScadaFrame hourly = scada::resample_hourly(loaded.frame);
    p.pruning = scada::prune_correlated(hourly, config.prep.prune_threshold, scada::base_channels());
    p.hourly = hourly.select(p.pruning.kept);
    if (!rated.contains(id)) {
      double peak = 0.0;
      for (double v : p.hourly.channel(scada::channel::kPower))
        if (std::isfinite(v)) peak = std::max(peak, v);
      rated[id] = peak;
    }
    const auto features = scada::engineer_features(p.hourly, ModelKind::lstm, options);
    origin = std::min(origin.value_or(features.timestamps.front()), features.timestamps.front());
    end = std::max(end, features.timestamps.back());
    frames.emplace(id, std::move(p));
  }

  const auto span_hours = static_cast<std::size_t>((end + kHour - *origin) / kHour);
  const int slots = static_cast<int>(span_hours / config.prep.group_hours);
  const scada::SplitPlan plan = scada::assign_splits(slots, derive_seed(config.seed, 0x5e17), config.prep.ratios);

  fs::create_directories(ws.prepared());
  ordered_json manifest;
  manifest["seed"] = config.seed;
  manifest["origin"] = format_rfc3339(*origin);
  manifest["group_hours"] = config.prep.group_hours;
  manifest["group_slots"] = slots;
  manifest["turbines"] = ordered_json::array();
  for (const auto& [id, p] : frames) {
    scada::write_csv(p.hourly, ws.hourly_csv(id), 6);
    const auto groups = scada::make_day_groups(scada::engineer_features(p.hourly, ModelKind::lstm, options),
                                               config.prep.group_hours, *origin);
    std::vector<std::pair<std::string, scada::NormalizerStats>> stats;
    for (ModelKind kind : {ModelKind::lstm, ModelKind::fnn}) {
      const auto features = scada::engineer_features(p.hourly, kind, options);
      std::vector<scada::WindowSample> train_windows;
      for (const auto& g : groups)
        if (!g.bad && plan.of(g.group_id) == scada::Split::train)
          for (auto& w : scada::slide_windows(features, g, config.prep.window_hours, config.prep.train_stride))
            train_windows.push_back(std::move(w));
      if (train_windows.empty()) throw ValidationError("turbine " + std::to_string(id) + ": no training windows");
      stats.emplace_back(std::string(to_string(kind)), scada::fit_normalizer(train_windows));
    }
    scada::write_sidecar(ws.sidecar(id), plan, stats);

    ordered_json t;
    t["turbine_id"] = id;
    t["rated_power"] = rated.at(id);
    t["kept"] = p.pruning.kept;
    t["dropped"] = ordered_json::array();
    for (const auto& d : p.pruning.dropped)
      t["dropped"].push_back({{"channel", d.channel}, {"partner", d.partner}, {"correlation", d.correlation}});
    t["zero_variance"] = p.pruning.zero_variance;
    t["groups"] = groups.size();
    manifest["turbines"].push_back(std::move(t));
  }
  write_json(manifest, ws.prepared() / "manifest.json");
}

void train(const RunConfig& config, const Workspace& ws, std::span<const int> turbines,
           std::span<const ModelKind> kinds) {
  fs::create_directories(ws.models());
  for (int id : turbines) {
    const TurbineDataset d = load_dataset(ws, config, id);
    for (ModelKind kind : kinds) {
      training::TrainConfig cfg = config.train(kind);
      cfg.seed = train_seed(config.seed, id, kind);
      const auto samples = d.training_windows(kind, config.prep.train_stride);
      const training::TrainedModel model = training::train(samples, cfg, id, d.rated_power);
      fs::remove(ws.cutoffs(id));
      model_io::save_model(model, ws.model_file(id, kind));
      model_io::write_history_csv(model, ws.history_csv(id, kind));
    }
  }
}

namespace {

void write_validation_csv(std::span<const detection::WindowError> errors, int turbine, const fs::path& path) {
  auto out = open_out(path);
  out << "turbine,window_start,rmse,rmspe,flags\n";
  for (const auto& e : errors)
    out << turbine << ',' << format_rfc3339(e.start) << ',' << num(e.rmse) << ',' << (e.rmspe ? num(*e.rmspe) : "")
        << ',' << (e.rmspe ? "" : "rmspe_undefined") << '\n';
}

void write_trace_csv(const TurbineDataset& d, std::span<const double> hourly, const fs::path& path) {
  auto out = open_out(path);
  out << "turbine,timestamp,truth,prediction,label\n";
  for (std::size_t i = 0; i < hourly.size(); ++i) {
    if (!std::isfinite(hourly[i])) continue;
    out << d.turbine_id << ',' << format_rfc3339(d.lstm.timestamps[i]) << ',' << num(d.lstm.target[i]) << ','
        << num(hourly[i]) << ',' << (d.lstm.labels ? int((*d.lstm.labels)[i]) : 0) << '\n';
  }
}

}  // namespace

detection::DetectionReport detect(const RunConfig& config, const Workspace& ws, int turbine,
                                  std::optional<TimeRange> range) {
  const TurbineDataset d = load_dataset(ws, config, turbine);
  const ensemble::EnsembleModel model = load_ensemble(ws, turbine);
  const std::size_t W = config.prep.window_hours;
  const auto form = config.detect.rmspe_form;

  detection::CutoffLimits limits;
  const auto val_segments = d.validation_segments();
  const auto val_errors = detection::window_errors(d.lstm, d.fnn, model, val_segments, W, form);
  if (fs::exists(ws.cutoffs(turbine))) {
    limits = detection::read_cutoffs(ws.cutoffs(turbine));
  } else {
    limits = detection::compute_cutoffs(val_errors, turbine, config.detect.rmse_percentile,
                                        config.detect.rmspe_percentile);
    detection::write_cutoffs(limits, ws.cutoffs(turbine));
  }

  std::vector<detection::Segment> segments = d.detection_segments();
  if (range) {
    std::vector<detection::Segment> kept;
    for (const auto& w : detection::window_starts(segments, d.lstm.gaps, W))
      if (d.lstm.timestamps[w.begin] >= range->from && d.lstm.timestamps[w.end - 1] < range->to) kept.push_back(w);
    if (kept.empty()) throw ValidationError("detect: no complete test window inside the requested range");
    segments = std::move(kept);
  }
  const auto hourly = detection::predict_hourly(d.lstm, d.fnn, model, segments, W);
  const auto test_errors = detection::score_windows(d.lstm, hourly, segments, W, form);
  detection::DetectionReport report = detection::detect(test_errors, limits);

  const fs::path dir = ws.detect_dir(turbine);
  fs::create_directories(dir);
  detection::write_window_csv(report, dir / "windows.csv");
  detection::write_confusion_csv(report, dir / "confusion.csv");
  write_validation_csv(val_errors, turbine, dir / "validation.csv");
  write_trace_csv(d, hourly, dir / "trace.csv");
  return report;
}

void write_f1_summary(std::span<const detection::DetectionReport> reports, const fs::path& path) {
  auto out = open_out(path);
  out << "turbine,rmse,rmspe,mixed\n";
  for (const auto& r : reports) {
    out << r.turbine_id;
    for (detection::Mode m : detection::kModes) out << ',' << num(r.of(m).weighted_f1);
    out << '\n';
  }
}

std::pair<cross_eval::EvalMatrix, cross_eval::EvalMatrix> cross_eval(const RunConfig& config, const Workspace& ws) {
  std::map<int, ensemble::EnsembleModel> models;
  std::map<int, cross_eval::TestSet> good, bad;
  for (int id : discover_turbines(ws, true)) {
    models.emplace(id, load_ensemble(ws, id));
    const TurbineDataset d = load_dataset(ws, config, id);
    good.emplace(id, d.windows(d.good_test_segments()));
    bad.emplace(id, d.windows(d.bad_segments()));
  }
  auto g = cross_eval::cross_evaluate(models, good, "good");
  auto b = cross_eval::cross_evaluate(models, bad, "bad");
  const fs::path dir = ws.reports() / "cross_eval";
  fs::create_directories(dir);
  for (const auto* m : {&g, &b}) {
    cross_eval::write_matrix_csv(*m, dir / (m->tag + ".csv"));
    cross_eval::write_annotations(*m, dir / (m->tag + ".annotations.json"));
  }
  return {std::move(g), std::move(b)};
}

namespace {

/// Appends every data row of `src` (header skipped) to `out`.
bool append_rows(std::ofstream& out, const fs::path& src, bool with_header) {
  std::ifstream in(src);
  if (!in) return false;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && !with_header) {
      first = false;
      continue;
    }
    first = false;
    out << line << '\n';
  }
  return true;
}

}  // namespace

void report(const RunConfig& config, const Workspace& ws) {
  const std::vector<int> ids = discover_turbines(ws, true);
  const fs::path dir = ws.reports() / "plot";
  fs::create_directories(dir);

  struct Bundle {
    const char* name;
    const char* source;
  };
  std::size_t produced = 0;
  for (const Bundle& b : {Bundle{"trace.csv", "trace.csv"}, Bundle{"rmse_timeline.csv", "windows.csv"},
                          Bundle{"validation_errors.csv", "validation.csv"}}) {
    auto out = open_out(dir / b.name);
    bool header = true;
    for (int id : ids)
      if (append_rows(out, ws.detect_dir(id) / b.source, header)) header = false;
    produced += header ? 0 : 1;
  }

  {
    auto out = open_out(dir / "cutoff_overlay.csv");
    out << "turbine,window_start,rmse,rmse_cutoff,rmspe,rmspe_cutoff,truth,pred_mixed\n";
    for (int id : ids) {
      if (!fs::exists(ws.cutoffs(id)) || !fs::exists(ws.detect_dir(id) / "windows.csv")) continue;
      const auto limits = detection::read_cutoffs(ws.cutoffs(id));
      std::ifstream in(ws.detect_dir(id) / "windows.csv");
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        std::vector<std::string> c;
        std::size_t pos = 0;
        for (std::size_t k; (k = line.find(',', pos)) != std::string::npos; pos = k + 1) c.push_back(line.substr(pos, k - pos));
        c.push_back(line.substr(pos));
        // turbine, window_start, rmse, rmspe, flags, truth, pred_rmse, pred_rmspe, pred_mixed
        out << c[0] << ',' << c[1] << ',' << c[2] << ',' << num(limits.rmse_cutoff) << ',' << c[3] << ','
            << num(limits.rmspe_cutoff) << ',' << c[5] << ',' << c[8] << '\n';
      }
      produced += 1;
    }
  }

  {
    auto out = open_out(dir / "power_curve.csv");
    out << "turbine,timestamp,wind_speed,power,label\n";
    for (int id : ids) {
      const TurbineDataset d = load_dataset(ws, config, id);
      const auto& wind = d.hourly.channel(scada::channel::kWindSpeed);
      const auto& power = d.hourly.channel(scada::channel::kPower);
      for (std::size_t h = 0; h < d.hourly.size(); ++h) {
        if (d.hourly.gaps[h]) continue;
        out << id << ',' << format_rfc3339(d.hourly.timestamps[h]) << ',' << num(wind[h]) << ',' << num(power[h])
            << ',' << (d.hourly.labels ? int((*d.hourly.labels)[h]) : 0) << '\n';
      }
    }
    produced += 1;
  }

  {
    auto out = open_out(dir / "training_history.csv");
    out << "turbine,kind,epoch,train_loss,val_loss,best\n";
    for (int id : ids)
      for (ModelKind k : {ModelKind::lstm, ModelKind::fnn}) {
        std::ifstream in(ws.history_csv(id, k));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) out << id << ',' << to_string(k) << ',' << line << '\n';
      }
  }

  {
    // Confusion rows end with the weighted F1; regroup them one turbine per line.
    auto out = open_out(dir / "confusion.csv");
    auto summary = open_out(dir / "f1_summary.csv");
    summary << "turbine,rmse,rmspe,mixed\n";
    bool header = true;
    for (int id : ids) {
      if (append_rows(out, ws.detect_dir(id) / "confusion.csv", header)) header = false;
      std::ifstream in(ws.detect_dir(id) / "confusion.csv");
      std::string line;
      std::getline(in, line);
      std::vector<std::string> f1;
      while (std::getline(in, line)) f1.push_back(line.substr(line.rfind(',') + 1));
      if (f1.size() != detection::kModes.size()) continue;
      summary << id << ',' << f1[0] << ',' << f1[1] << ',' << f1[2] << '\n';
    }
  }
  if (produced < 2) throw ValidationError("report: nothing to report (run detect first)");
  write_json({{"seed", config.seed}, {"turbines", ids}}, dir / "run.json");
}

void run_all(const RunConfig& config, const Workspace& ws) {
  synth(config, ws);
  prep(config, ws);
  const std::vector<int> ids = discover_turbines(ws, true);
  const std::array<ModelKind, 2> kinds = {ModelKind::lstm, ModelKind::fnn};
  train(config, ws, ids, kinds);
  std::vector<detection::DetectionReport> reports;
  for (int id : ids) reports.push_back(detect(config, ws, id));
  write_f1_summary(reports, ws.reports() / "f1_summary.csv");
  cross_eval(config, ws);
  report(config, ws);
}

}  // namespace windguard::pipeline
