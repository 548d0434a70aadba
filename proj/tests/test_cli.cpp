#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "windguard_test_cli";

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const fs::path log = kRoot / "last_output.txt";
  const std::string cmd = std::string(WINDGUARD_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const nlohmann::json& j) {
  fs::create_directories(kRoot);
  const fs::path p = kRoot / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

// Two turbines over the minimum span, a few cheap epochs.
nlohmann::json small_config() {
  return {{"seed", 9},
          {"farm", {{"preset", "default"}, {"turbine_count", 2}, {"span_days", 90}}},
          {"prep", {{"train_stride", 6}}},
          {"train",
           {{"lstm", {{"max_epochs", 2}, {"patience", 2}, {"hidden", 8}}},
            {"fnn", {{"max_epochs", 2}, {"patience", 2}, {"grid", 12}, {"neurons", 6}}}}}};
}

}  // namespace

TEST_CASE("help, config and argument errors") {
  fs::remove_all(kRoot);
  fs::create_directories(kRoot);
  CHECK(run("--help").code == 0);
  CHECK(run("").code == 1);
  CHECK(run("no-such-command").code == 1);
  CHECK(run("train --kind svm").code == 1);

  const auto cfg = write_config("small.json", small_config());
  const Result shown = run("--config " + cfg.string() + " config");
  REQUIRE(shown.code == 0);
  const auto j = nlohmann::json::parse(shown.out);
  CHECK(j.at("seed") == 9);
  CHECK(j.at("train").at("fnn").at("grid") == 12);
  CHECK(run("--config " + cfg.string() + " --seed 5 config").out.find("\"seed\": 5") != std::string::npos);

  // The environment variable supplies the default config path.
  CHECK(run("config").out.find("\"seed\": 42") != std::string::npos);
  const std::string env = "WINDGUARD_CONFIG=" + cfg.string() + " ";
  CHECK(std::system((env + WINDGUARD_CLI + " config | grep -q '\"seed\": 9'").c_str()) == 0);

  CHECK(run("--config " + (kRoot / "missing.json").string() + " config").code == 1);
  const auto broken = write_config("broken.json", {{"prep", {{"ratios", {0.5, 0.5}}}}});
  CHECK(run("--config " + broken.string() + " config").code == 1);
}

TEST_CASE("synth → prep → train → detect → cross-eval → report") {
  const auto cfg = write_config("small.json", small_config());
  const std::string base = "--config " + cfg.string() + " --out " + (kRoot / "ws").string() + " ";
  const fs::path ws = kRoot / "ws";
  fs::remove_all(ws);

  // Nothing to work on yet.
  CHECK(run(base + "prep").code == 1);
  CHECK(run(base + "report").code == 1);

  REQUIRE(run(base + "synth").code == 0);
  CHECK(fs::exists(ws / "data" / "turbine_01.csv"));
  CHECK(fs::exists(ws / "data" / "turbine_02.csv"));
  CHECK(!fs::exists(ws / "data" / "turbine_03.csv"));
  const std::string first = slurp(ws / "data" / "turbine_02.csv");
  REQUIRE(run(base + "synth").code == 0);
  CHECK(slurp(ws / "data" / "turbine_02.csv") == first);

  auto short_farm = small_config();
  short_farm["farm"]["span_days"] = 60;
  const auto short_cfg = write_config("short.json", short_farm);
  CHECK(run("--config " + short_cfg.string() + " --out " + (kRoot / "short").string() + " synth").code == 1);

  CHECK(run(base + "train --turbine 1").code == 1);  // not prepared yet
  REQUIRE(run(base + "prep").code == 0);
  CHECK(fs::exists(ws / "prepared" / "manifest.json"));
  CHECK(run(base + "train --turbine 7 --kind both").code == 1);

  REQUIRE(run(base + "train --turbine 1 --kind both").code == 0);
  CHECK(fs::exists(ws / "models" / "turbine_01_lstm.json"));
  CHECK(fs::exists(ws / "models" / "turbine_01_fnn.json"));
  CHECK(fs::exists(ws / "models" / "turbine_01_fnn_history.csv"));
  const std::string model = slurp(ws / "models" / "turbine_01_lstm.json");
  REQUIRE(run(base + "train --turbine 1 --kind lstm").code == 0);
  CHECK(slurp(ws / "models" / "turbine_01_lstm.json") == model);

  CHECK(run(base + "detect --turbine 2").code == 1);  // no models yet
  const Result d = run(base + "detect --turbine 1 --mode mixed");
  REQUIRE(d.code == 0);
  CHECK(d.out.find("mixed") != std::string::npos);
  for (const char* f : {"windows.csv", "confusion.csv", "validation.csv", "trace.csv"})
    CHECK(fs::exists(ws / "reports" / "detect" / "turbine_01" / f));
  CHECK(fs::exists(ws / "models" / "turbine_01_cutoffs.json"));
  // The farm-wide data gap runs from day 80 07:00 to day 81 13:00 after 2022-10-28.
  CHECK(run(base + "detect --turbine 1 --from 2023-01-16T08:00:00Z --to 2023-01-17T12:00:00Z").code == 1);
  CHECK(run(base + "detect --turbine 1 --from yesterday").code == 1);

  CHECK(run(base + "cross-eval").code == 1);  // turbine 2 has no models
  REQUIRE(run(base + "train --turbine 2").code == 0);
  const Result x = run(base + "cross-eval");
  REQUIRE(x.code == 0);
  CHECK(fs::exists(ws / "reports" / "cross_eval" / "good.csv"));
  CHECK(fs::exists(ws / "reports" / "cross_eval" / "bad.annotations.json"));

  REQUIRE(run(base + "detect").code == 0);
  CHECK(fs::exists(ws / "reports" / "f1_summary.csv"));
  const std::string raw_before = slurp(ws / "data" / "turbine_01.csv");
  REQUIRE(run(base + "report").code == 0);
  std::size_t kinds = 0;
  for (const auto& e : fs::directory_iterator(ws / "reports" / "plot")) kinds += e.path().extension() == ".csv";
  CHECK(kinds >= 4);
  CHECK(slurp(ws / "data" / "turbine_01.csv") == raw_before);
}

TEST_CASE("numerical failure exits with 2") {
  auto j = small_config();
  j["train"]["fnn"]["learning_rate"] = 1e305;
  const auto cfg = write_config("diverge.json", j);
  const std::string ws = (kRoot / "diverge").string();
  fs::remove_all(ws);
  const std::string base = "--config " + cfg.string() + " --out " + ws + " ";
  REQUIRE(run(base + "synth").code == 0);
  REQUIRE(run(base + "prep").code == 0);
  const Result r = run(base + "train --turbine 1 --kind fnn");
  CHECK(r.code == 2);
  CHECK(r.out.find("numerical") != std::string::npos);
}
