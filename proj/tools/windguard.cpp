// Command-line driver: synth, prep, train, detect, cross-eval, report, pipeline.
// Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "windguard/error.hpp"
#include "windguard/pipeline.hpp"
#include "windguard/timeutil.hpp"

namespace wg = windguard;
namespace pl = windguard::pipeline;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> turbine;
  std::string kind = "both";
  std::string mode = "mixed";
  std::string out = "windguard-run";
  std::string from, to;
};

pl::RunConfig resolve_config(const Options& o) {
  std::optional<std::filesystem::path> path;
  if (!o.config.empty()) path = o.config;
  pl::RunConfig cfg = pl::load_run_config(path);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

std::vector<int> selected_turbines(const Options& o, const pl::Workspace& ws) {
  const auto all = pl::discover_turbines(ws, true);
  if (!o.turbine) return all;
  if (std::find(all.begin(), all.end(), *o.turbine) == all.end())
    throw wg::ValidationError("unknown turbine " + std::to_string(*o.turbine));
  return {*o.turbine};
}

void print_detection(const wg::detection::DetectionReport& r, wg::detection::Mode mode) {
  const auto& s = r.of(mode);
  const auto& cm = r.matrices[static_cast<std::size_t>(mode)];
  std::printf("turbine %2d  %-5s  windows %3zu  bad recall %.3f  bad precision %.3f  weighted F1 %.3f  (tn %zu fp %zu fn %zu tp %zu)\n",
              r.turbine_id, std::string(wg::detection::to_string(mode)).c_str(), cm.total(), s.recall[1],
              s.precision[1], s.weighted_f1, cm.true_good, cm.false_bad, cm.missed_bad, cm.true_bad);
}

int run(int argc, char** argv) {
  CLI::App app{"Wind turbine power prediction and deterioration detection"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Run configuration JSON (default: $WINDGUARD_CONFIG)");
  app.add_option("--seed", o.seed, "Override the run seed");
  app.add_option("--out", o.out, "Workspace directory");

  app.add_subcommand("synth", "Generate the synthetic farm into <out>/data");
  app.add_subcommand("prep", "Resample, prune and split every turbine in <out>/data");
  auto* train = app.add_subcommand("train", "Train models");
  train->add_option("--turbine", o.turbine, "Turbine id (default: all)");
  train->add_option("--kind", o.kind, "lstm, fnn or both")->check(CLI::IsMember({"lstm", "fnn", "both"}));
  auto* detect = app.add_subcommand("detect", "Label test windows");
  detect->add_option("--turbine", o.turbine, "Turbine id (default: all)");
  detect->add_option("--mode", o.mode, "Mode to print")->check(CLI::IsMember({"rmse", "rmspe", "mixed"}));
  detect->add_option("--from", o.from, "Only windows starting at or after this RFC 3339 time");
  detect->add_option("--to", o.to, "Only windows ending before this RFC 3339 time");
  app.add_subcommand("cross-eval", "Evaluate every model on every turbine");
  app.add_subcommand("report", "Collect plot data under <out>/reports/plot");
  app.add_subcommand("pipeline", "synth, prep, train, detect, cross-eval and report in one go");
  auto* show = app.add_subcommand("config", "Print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const pl::RunConfig cfg = resolve_config(o);
  const pl::Workspace ws{o.out};
  const std::string cmd = app.get_subcommands().front()->get_name();

  if (show->parsed()) {
    std::cout << pl::run_config_to_json(cfg).dump(2) << '\n';
  } else if (cmd == "synth") {
    pl::synth(cfg, ws);
  } else if (cmd == "prep") {
    pl::prep(cfg, ws);
  } else if (cmd == "train") {
    std::vector<wg::ModelKind> kinds;
    if (o.kind == "both") kinds = {wg::ModelKind::lstm, wg::ModelKind::fnn};
    else kinds = {wg::parse_model_kind(o.kind)};
    pl::train(cfg, ws, selected_turbines(o, ws), kinds);
  } else if (cmd == "detect") {
    std::optional<pl::TimeRange> range;
    if (!o.from.empty() || !o.to.empty()) {
      pl::TimeRange r{std::numeric_limits<wg::UnixSeconds>::min(), std::numeric_limits<wg::UnixSeconds>::max()};
      for (auto [text, slot] : {std::pair{&o.from, &r.from}, std::pair{&o.to, &r.to}}) {
        if (text->empty()) continue;
        const auto t = wg::parse_rfc3339(*text);
        if (!t) throw wg::ValidationError("not an RFC 3339 time: " + *text);
        *slot = *t;
      }
      range = r;
    }
    const auto mode = wg::detection::parse_mode(o.mode);
    std::vector<wg::detection::DetectionReport> reports;
    for (int id : selected_turbines(o, ws)) {
      reports.push_back(pl::detect(cfg, ws, id, range));
      print_detection(reports.back(), mode);
    }
    if (!o.turbine) pl::write_f1_summary(reports, ws.reports() / "f1_summary.csv");
  } else if (cmd == "cross-eval") {
    const auto [good, bad] = pl::cross_eval(cfg, ws);
    std::printf("good timeline: own model is the column minimum for %zu of %zu turbines\n", good.diagonal_minima(),
                good.size());
    std::printf("bad timeline:  own model is the column minimum for %zu of %zu turbines\n", bad.diagonal_minima(),
                bad.size());
  } else if (cmd == "report") {
    pl::report(cfg, ws);
  } else if (cmd == "pipeline") {
    pl::run_all(cfg, ws);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const wg::NumericalError& e) {
    std::fprintf(stderr, "windguard: numerical failure: %s\n", e.what());
    return 2;
  } catch (const wg::ValidationError& e) {
    std::fprintf(stderr, "windguard: %s\n", e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "windguard: %s\n", e.what());
    return 1;
  }
}
