#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "test_common.hpp"
#include "windguard/cross_eval.hpp"
#include "windguard/error.hpp"

using namespace windguard;
using namespace windguard::cross_eval;

namespace {

TestSet test_set(Rng& rng, std::size_t n, double level) {
  TestSet s;
  for (std::size_t i = 0; i < n; ++i) {
    auto w = test::random_window(rng, 4, 24);
    for (double& y : w.target) y = level + 0.1 * y;
    s.lstm.push_back(w);
    s.fnn.push_back(std::move(w));
  }
  return s;
}

}  // namespace

TEST_CASE("single turbine farm gives the model's own test RMSE") {
  Rng rng(81);
  std::map<int, ensemble::EnsembleModel> models = {{4, test::untrained_ensemble(4, 2000, rng)}};
  std::map<int, TestSet> data = {{4, test_set(rng, 3, 500)}};
  const EvalMatrix m = cross_evaluate(models, data, "good");
  REQUIRE(m.size() == 1);
  const double own = ensemble::evaluate(models.at(4), data.at(4).lstm, data.at(4).fnn).mean_rmse;
  CHECK(m.at(0, 0) == own);
  CHECK(m.diagonal_minima() == 1);
}

TEST_CASE("entries match evaluate and are permutation equivariant") {
  Rng rng(82);
  std::map<int, ensemble::EnsembleModel> models;
  std::map<int, TestSet> data;
  for (int id : {1, 2, 3}) {
    models.emplace(id, test::untrained_ensemble(id, 2000, rng));
    data.emplace(id, test_set(rng, 2, 300.0 * id));
  }
  const EvalMatrix m = cross_evaluate(models, data, "bad");
  CHECK(m.tag == "bad");
  CHECK(m.turbines == std::vector<int>{1, 2, 3});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const int mi = m.turbines[i], dj = m.turbines[j];
      const double direct = ensemble::evaluate(models.at(mi), data.at(dj).lstm, data.at(dj).fnn).mean_rmse;
      CHECK(std::abs(m.at(i, j) - direct) <= 1e-12 * direct);
      CHECK(m.at(i, j) >= 0.0);
    }

  // Relabel 1→30, 2→10, 3→20; turbine ids are sorted so rows and columns permute.
  const std::map<int, int> relabel = {{1, 30}, {2, 10}, {3, 20}};
  std::map<int, ensemble::EnsembleModel> pm;
  std::map<int, TestSet> pd;
  for (auto [from, to] : relabel) {
    auto e = models.at(from);
    e.lstm.turbine_id = e.fnn.turbine_id = to;
    pm.emplace(to, e);
    pd.emplace(to, data.at(from));
  }
  const EvalMatrix p = cross_evaluate(pm, pd, "bad");
  CHECK(p.turbines == std::vector<int>{10, 20, 30});
  auto index_of = [&](int id) { return static_cast<std::size_t>(std::find(p.turbines.begin(), p.turbines.end(), id) - p.turbines.begin()); };
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(p.at(index_of(relabel.at(m.turbines[i])), index_of(relabel.at(m.turbines[j]))) == m.at(i, j));
  CHECK(p.diagonal_minima() == m.diagonal_minima());
}

TEST_CASE("annotations") {
  EvalMatrix m;
  m.tag = "good";
  m.turbines = {1, 2, 3};
  m.values = {1, 5, 9,   //
              4, 2, 3,   //
              7, 8, 0.5};
  CHECK(m.column_argmin() == std::vector<std::size_t>{0, 1, 2});
  CHECK(m.row_argmin() == std::vector<std::size_t>{0, 1, 2});
  CHECK(m.row_argmax() == std::vector<std::size_t>{2, 0, 1});
  CHECK(m.diagonal_minima() == 3);
  m.values[3] = 0.1;  // model 2 beats model 1 on turbine 1's data
  CHECK(m.column_argmin()[0] == 1);
  CHECK(m.diagonal_minima() == 2);

  const auto dir = std::filesystem::temp_directory_path() / "windguard_test_cross_eval";
  std::filesystem::create_directories(dir);
  write_matrix_csv(m, dir / "good.csv");
  write_annotations(m, dir / "good.annotations.json");
  std::ifstream in(dir / "good.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "model_turbine,data_turbine,rmse");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 9);
  const auto j = nlohmann::json::parse(std::ifstream(dir / "good.annotations.json"));
  CHECK(j.at("diagonal_minima").get<int>() == 2);
}

TEST_CASE("missing models or datasets are errors") {
  Rng rng(83);
  std::map<int, ensemble::EnsembleModel> models = {{1, test::untrained_ensemble(1, 2000, rng)},
                                                   {2, test::untrained_ensemble(2, 2000, rng)}};
  std::map<int, TestSet> data = {{1, test_set(rng, 1, 100)}};
  CHECK_THROWS_AS(cross_evaluate(models, data, "good"), ValidationError);
  data.emplace(2, TestSet{});
  CHECK_THROWS_AS(cross_evaluate(models, data, "good"), ValidationError);
  data[2] = test_set(rng, 1, 100);
  data.emplace(3, test_set(rng, 1, 100));
  CHECK_THROWS_AS(cross_evaluate(models, data, "good"), ValidationError);
}
