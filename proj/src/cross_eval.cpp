#include "windguard/cross_eval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <json.hpp>

#include "windguard/error.hpp"

namespace windguard::cross_eval {

std::vector<std::size_t> EvalMatrix::column_argmin() const {
  std::vector<std::size_t> out(size(), 0);
  for (std::size_t j = 0; j < size(); ++j)
    for (std::size_t i = 1; i < size(); ++i)
      if (at(i, j) < at(out[j], j)) out[j] = i;
  return out;
}

std::vector<std::size_t> EvalMatrix::row_argmin() const {
  std::vector<std::size_t> out(size(), 0);
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = 1; j < size(); ++j)
      if (at(i, j) < at(i, out[i])) out[i] = j;
  return out;
}

std::vector<std::size_t> EvalMatrix::row_argmax() const {
  std::vector<std::size_t> out(size(), 0);
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = 1; j < size(); ++j)
      if (at(i, j) > at(i, out[i])) out[i] = j;
  return out;
}

std::size_t EvalMatrix::diagonal_minima() const {
  std::size_t count = 0;
  for (std::size_t j = 0; j < size(); ++j) {
    bool is_min = true;
    for (std::size_t i = 0; i < size(); ++i) is_min = is_min && at(j, j) <= at(i, j);
    count += is_min ? 1 : 0;
  }
  return count;
}

EvalMatrix cross_evaluate(const std::map<int, ensemble::EnsembleModel>& models,
                          const std::map<int, TestSet>& datasets, std::string tag) {
  if (models.empty()) throw ValidationError("cross_evaluate: no models");
  EvalMatrix m;
  m.tag = std::move(tag);
  for (const auto& [id, _] : models) {
    if (!datasets.contains(id)) throw ValidationError("cross_evaluate: no dataset for turbine " + std::to_string(id));
    m.turbines.push_back(id);
  }
  for (const auto& [id, _] : datasets)
    if (!models.contains(id)) throw ValidationError("cross_evaluate: no model for turbine " + std::to_string(id));
  const std::size_t n = m.turbines.size();
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& model = models.at(m.turbines[i]);
    for (std::size_t j = 0; j < n; ++j) {
      const TestSet& data = datasets.at(m.turbines[j]);
      if (data.lstm.empty()) throw ValidationError("cross_evaluate: turbine " + std::to_string(m.turbines[j]) +
                                                   " has no " + m.tag + " test windows");
      m.values[i * n + j] = ensemble::evaluate(model, data.lstm, data.fnn).mean_rmse;
    }
  }
  return m;
}

void write_matrix_csv(const EvalMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "model_turbine,data_turbine,rmse\n";
  char buf[64];
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) {
      auto end = std::to_chars(buf, buf + sizeof buf, m.at(i, j)).ptr;
      out << m.turbines[i] << ',' << m.turbines[j] << ',' << std::string_view(buf, end - buf) << '\n';
    }
}

void write_annotations(const EvalMatrix& m, const std::filesystem::path& path) {
  auto ids = [&](const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    for (std::size_t k : idx) out.push_back(m.turbines[k]);
    return out;
  };
  nlohmann::ordered_json j;
  j["tag"] = m.tag;
  j["turbines"] = m.turbines;
  j["column_min_model"] = ids(m.column_argmin());
  j["row_min_data"] = ids(m.row_argmin());
  j["row_max_data"] = ids(m.row_argmax());
  j["diagonal_minima"] = m.diagonal_minima();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace windguard::cross_eval
