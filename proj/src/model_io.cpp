#include "windguard/model_io.hpp"

#include <charconv>
#include <fstream>

#include "windguard/error.hpp"

namespace windguard::model_io {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string_view optimizer_name(training::Optimizer o) { return o == training::Optimizer::adam ? "adam" : "sgd"; }

training::Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return training::Optimizer::adam;
  if (s == "sgd") return training::Optimizer::sgd;
  throw ValidationError("unknown optimizer '" + s + "'");
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ordered_json stats_to_json(const scada::NormalizerStats& s) {
  ordered_json j;
  j["mean"] = s.mean;
  j["stddev"] = s.stddev;
  return j;
}

}  // namespace

ordered_json train_config_to_json(const training::TrainConfig& c) {
  ordered_json j;
  j["kind"] = std::string(to_string(c.kind));
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["optimizer"] = std::string(optimizer_name(c.optimizer));
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  if (c.kind == ModelKind::lstm) {
    j["hidden"] = c.lstm.hidden;
    j["layers"] = c.lstm.layers;
  } else {
    j["grid"] = c.fnn.grid;
    j["neurons"] = c.fnn.neurons;
    j["hidden_layers"] = c.fnn.hidden_layers;
  }
  return j;
}

training::TrainConfig train_config_from_json(const json& j, ModelKind kind) {
  auto c = training::TrainConfig::defaults(kind);
  try {
    if (j.contains("kind") && parse_model_kind(j.at("kind").get<std::string>()) != kind)
      throw ValidationError("train config kind does not match");
    read_opt(j, "learning_rate", c.learning_rate);
    read_opt(j, "batch_size", c.batch_size);
    read_opt(j, "max_epochs", c.max_epochs);
    read_opt(j, "patience", c.patience);
    read_opt(j, "seed", c.seed);
    if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    read_opt(j, "beta1", c.beta1);
    read_opt(j, "beta2", c.beta2);
    read_opt(j, "epsilon", c.epsilon);
    read_opt(j, "hidden", c.lstm.hidden);
    read_opt(j, "layers", c.lstm.layers);
    read_opt(j, "grid", c.fnn.grid);
    read_opt(j, "neurons", c.fnn.neurons);
    read_opt(j, "hidden_layers", c.fnn.hidden_layers);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::string> tensor_names(const ModelParams& params) {
  std::vector<std::string> names;
  if (const auto* p = std::get_if<lstm::LstmParams>(&params.net)) {
    for (std::size_t l = 0; l < p->layers.size(); ++l) {
      names.push_back("layer" + std::to_string(l) + ".weight");
      names.push_back("layer" + std::to_string(l) + ".bias");
    }
    names.push_back("head.weight");
    names.push_back("head.bias");
  } else {
    const auto& f = std::get<fnn::FnnParams>(params.net);
    for (std::size_t l = 0; l < f.hidden.size(); ++l) {
      names.push_back("hidden" + std::to_string(l) + ".weight");
      names.push_back("hidden" + std::to_string(l) + ".intercept");
    }
    names.push_back("output.weight");
    names.push_back("output.intercept");
  }
  return names;
}

void save_model(const training::TrainedModel& m, const std::filesystem::path& path) {
  ordered_json j;
  j["format"] = "windguard-params";
  j["version"] = kFormatVersion;
  j["kind"] = std::string(to_string(m.kind()));
  j["turbine_id"] = m.turbine_id;
  j["rated_power"] = m.params.rated_power();
  j["input_dim"] = m.params.input_dim();
  if (const auto* f = std::get_if<fnn::FnnParams>(&m.params.net)) j["window"] = f->config.window;
  j["config"] = train_config_to_json(m.config);
  j["normalizer"] = stats_to_json(m.normalizer);
  j["best_epoch"] = m.best_epoch;
  ordered_json hist = ordered_json::array();
  for (const auto& r : m.history) hist.push_back({r.epoch, r.train_loss, r.val_loss});
  j["history"] = hist;
  const auto names = tensor_names(m.params);
  const auto tensors = m.params.tensors();
  ordered_json arr = ordered_json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    ordered_json t;
    t["name"] = names[i];
    t["shape"] = tensors[i]->shape();
    t["values"] = std::vector<double>(tensors[i]->values().begin(), tensors[i]->values().end());
    arr.push_back(std::move(t));
  }
  j["tensors"] = std::move(arr);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

training::TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file " + path.string());
  try {
    json j;
    in >> j;
    if (j.at("format").get<std::string>() != "windguard-params") throw ValidationError("not a parameter file");
    if (j.at("version").get<int>() != kFormatVersion) throw ValidationError("unsupported parameter file version");
    const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
    training::TrainedModel m;
    m.turbine_id = j.at("turbine_id").get<int>();
    m.config = train_config_from_json(j.at("config"), kind);
    const double rated = j.at("rated_power").get<double>();
    const auto input_dim = j.at("input_dim").get<std::size_t>();
    if (kind == ModelKind::lstm) {
      auto cfg = m.config.lstm;
      cfg.rated_power = rated;
      cfg.input_dim = input_dim;
      m.params.net = lstm::zero_params(cfg);
    } else {
      auto cfg = m.config.fnn;
      cfg.rated_power = rated;
      cfg.input_dim = input_dim;
      cfg.window = j.at("window").get<std::size_t>();
      m.params.net = fnn::zero_params(cfg);
    }
    const auto names = tensor_names(m.params);
    auto tensors = m.params.tensors();
    const auto& arr = j.at("tensors");
    if (arr.size() != tensors.size()) throw ValidationError("tensor count does not match the architecture");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& t = arr.at(i);
      if (t.at("name").get<std::string>() != names[i]) throw ValidationError("unexpected tensor " + names[i]);
      Tensor loaded(t.at("shape").get<std::vector<std::size_t>>(), t.at("values").get<std::vector<double>>());
      if (!loaded.same_shape(*tensors[i]))
        throw ValidationError("tensor " + names[i] + " has shape " + loaded.shape_string() + ", expected " +
                              tensors[i]->shape_string());
      *tensors[i] = std::move(loaded);
    }
    m.normalizer.mean = j.at("normalizer").at("mean").get<std::vector<double>>();
    m.normalizer.stddev = j.at("normalizer").at("stddev").get<std::vector<double>>();
    m.best_epoch = j.at("best_epoch").get<std::size_t>();
    for (const auto& r : j.at("history"))
      m.history.push_back({r.at(0).get<std::size_t>(), r.at(1).get<double>(), r.at(2).get<double>()});
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_history_csv(const training::TrainedModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,best\n";
  char a[64], b[64];
  for (const auto& r : m.history) {
    auto ea = std::to_chars(a, a + sizeof a, r.train_loss).ptr;
    auto eb = std::to_chars(b, b + sizeof b, r.val_loss).ptr;
    out << r.epoch << ',' << std::string_view(a, ea - a) << ',' << std::string_view(b, eb - b) << ','
        << (r.epoch == m.best_epoch ? 1 : 0) << '\n';
  }
}

}  // namespace windguard::model_io
