#include "windguard/training.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "windguard/ensemble.hpp"
#include "windguard/error.hpp"

namespace windguard::training {

namespace {

class AdamState {
 public:
  AdamState(const TrainConfig& cfg, const std::vector<Tensor*>& params) : cfg_(cfg) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    ++t_;
    const double lr = cfg_.learning_rate;
    if (cfg_.optimizer == Optimizer::sgd) {
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k]->values();
        auto g = grads[k].values();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
      }
      return;
    }
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto p = params[k]->values();
      auto g = grads[k].values();
      auto m = m_[k].values();
      auto v = v_[k].values();
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

std::vector<scada::WindowSample> normalize_all(std::span<const scada::WindowSample> windows,
                                               const scada::NormalizerStats& stats) {
  std::vector<scada::WindowSample> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(scada::apply_normalizer(w, stats));
  return out;
}

double mse_over(const std::vector<std::vector<double>>& pred, std::span<const scada::WindowSample> windows) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (std::size_t t = 0; t < windows[i].hours; ++t) {
      const double d = pred[i][t] - windows[i].target[t];
      acc += d * d;
    }
    n += windows[i].hours;
  }
  return acc / static_cast<double>(n);
}

}  // namespace

TrainConfig TrainConfig::defaults(ModelKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.learning_rate = kind == ModelKind::lstm ? 0.001 : 0.01;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("train: learning rate must be positive");
  if (patience < 1) throw ValidationError("train: patience must be at least 1");
  if (batch_size < 1 || max_epochs < 1) throw ValidationError("train: batch size and epochs must be positive");
}

double TrainedModel::best_val_loss() const {
  double best = std::numeric_limits<double>::infinity();
  for (const EpochRecord& r : history) best = std::min(best, r.val_loss);
  return best;
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ValidationError("mse_loss: length mismatch");
  if (pred.empty()) throw ValidationError("mse_loss: empty curves");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - target[i]) * (pred[i] - target[i]);
  return acc / static_cast<double>(pred.size());
}

ModelParams initial_params(const TrainConfig& config, double rated_power, std::size_t window, Rng& rng) {
  if (config.kind == ModelKind::lstm) {
    lstm::LstmConfig c = config.lstm;
    c.rated_power = rated_power;
    return {lstm::init_params(c, rng)};
  }
  fnn::FnnConfig c = config.fnn;
  c.rated_power = rated_power;
  c.window = window;
  return {fnn::init_params(c, rng)};
}

TrainedModel train(std::span<const scada::WindowSample> samples, const TrainConfig& config, int turbine_id,
                   double rated_power) {
  config.validate();
  std::vector<scada::WindowSample> train_raw, val_raw;
  for (const auto& s : samples) {
    if (s.split == scada::Split::test) throw ValidationError("train: test-split window passed to training");
    (s.split == scada::Split::train ? train_raw : val_raw).push_back(s);
  }
  if (train_raw.empty()) throw ValidationError("train: empty training split");
  if (val_raw.empty()) throw ValidationError("train: empty validation split");

  TrainedModel model;
  model.turbine_id = turbine_id;
  model.config = config;
  model.normalizer = scada::fit_normalizer(train_raw);
  const auto train_set = normalize_all(train_raw, model.normalizer);
  const auto val_set = normalize_all(val_raw, model.normalizer);

  Rng rng(config.seed);
  ModelParams params = initial_params(config, rated_power, train_set.front().hours, rng);
  if (params.input_dim() != train_set.front().features) throw ValidationError("train: feature count mismatch");
  std::vector<Tensor*> tensors = params.tensors();
  AdamState optimizer(config, tensors);

  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const Batch batch = make_batch(train_set, std::span(order).subspan(begin, end - begin));
      ad::Tape tape;
      std::vector<ad::Var> vars;
      for (const Tensor* t : tensors) vars.push_back(tape.parameter(*t));
      const ad::Var pred = forward(tape, params, vars, batch);
      const ad::Var target = tape.constant(Tensor({batch.size, batch.hours}, batch.targets));
      const ad::Var loss = tape.mse(pred, target);
      const double value = tape.value(loss).item();
      if (!std::isfinite(value)) throw NumericalError("train: loss diverged at epoch " + std::to_string(epoch));
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (ad::Var v : vars) grads.push_back(tape.grad(v));
      optimizer.step(tensors, grads);
      loss_sum += value * static_cast<double>(batch.size);
    }
    for (const Tensor* t : tensors)
      if (!t->all_finite()) throw NumericalError("train: parameters diverged at epoch " + std::to_string(epoch));

    const double val_loss = mse_over(windguard::predict(params, val_set), val_set);
    model.history.push_back({epoch, loss_sum / static_cast<double>(train_set.size()), val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      best = params;
      model.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model.params = std::move(best);
  return model;
}

std::vector<std::vector<double>> predict(const TrainedModel& model, std::span<const scada::WindowSample> windows) {
  return windguard::predict(model.params, normalize_all(windows, model.normalizer));
}

Evaluation evaluate(const TrainedModel& model, std::span<const scada::WindowSample> windows) {
  if (windows.empty()) throw ValidationError("evaluate: empty sample set");
  const auto pred = predict(model, windows);
  Evaluation e;
  for (std::size_t i = 0; i < windows.size(); ++i) e.per_window_rmse.push_back(ensemble::rmse(windows[i].target, pred[i]));
  e.mean_rmse = std::accumulate(e.per_window_rmse.begin(), e.per_window_rmse.end(), 0.0) /
                static_cast<double>(e.per_window_rmse.size());
  return e;
}

double dataset_mse(const TrainedModel& model, std::span<const scada::WindowSample> windows) {
  if (windows.empty()) throw ValidationError("dataset_mse: empty sample set");
  return mse_over(predict(model, windows), windows);
}

}  // namespace windguard::training
