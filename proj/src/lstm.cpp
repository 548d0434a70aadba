#include "windguard/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "windguard/error.hpp"

namespace windguard::lstm {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t layer_input(const LstmConfig& c, std::size_t layer) { return layer == 0 ? c.input_dim : c.hidden; }

}  // namespace

void LstmConfig::validate() const {
  if (input_dim == 0 || hidden == 0 || layers == 0) throw ValidationError("lstm: sizes must be positive");
  if (!(rated_power > 0.0)) throw ValidationError("lstm: rated_power must be positive");
}

std::vector<Tensor*> LstmParams::tensors() {
  std::vector<Tensor*> out;
  for (LayerParams& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&head_weight);
  out.push_back(&head_bias);
  return out;
}

std::vector<const Tensor*> LstmParams::tensors() const {
  std::vector<const Tensor*> out;
  for (const LayerParams& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&head_weight);
  out.push_back(&head_bias);
  return out;
}

LstmParams zero_params(const LstmConfig& config) {
  config.validate();
  LstmParams p;
  p.config = config;
  for (std::size_t l = 0; l < config.layers; ++l) {
    p.layers.push_back({Tensor::matrix(config.hidden + layer_input(config, l), 4 * config.hidden),
                        Tensor::matrix(1, 4 * config.hidden)});
  }
  p.head_weight = Tensor::matrix(config.hidden, 1);
  p.head_bias = Tensor::matrix(1, 1);
  return p;
}

LstmParams init_params(const LstmConfig& config, Rng& rng) {
  LstmParams p = zero_params(config);
  const std::size_t h = config.hidden;
  for (LayerParams& layer : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.rows()));
    for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    for (std::size_t k = 0; k < 4 * h; ++k) layer.bias[k] = k < h ? 1.0 : rng.uniform(-bound, bound);
  }
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (double& w : p.head_weight.values()) w = rng.uniform(-head_bound, head_bound);
  p.head_bias[0] = 0.5;
  return p;
}

CellOutput cell_step(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev,
                     const LayerParams& layer, std::size_t hidden) {
  const std::size_t in = x.size();
  if (h_prev.size() != hidden || c_prev.size() != hidden || layer.weight.rows() != hidden + in ||
      layer.weight.cols() != 4 * hidden || layer.bias.size() != 4 * hidden) {
    throw ValidationError("lstm cell_step: shape mismatch");
  }
  std::vector<double> z(layer.bias.values().begin(), layer.bias.values().end());
  for (std::size_t r = 0; r < hidden + in; ++r) {
    const double v = r < hidden ? h_prev[r] : x[r - hidden];
    for (std::size_t k = 0; k < 4 * hidden; ++k) z[k] += v * layer.weight(r, k);
  }
  CellOutput out{std::vector<double>(hidden), std::vector<double>(hidden)};
  for (std::size_t k = 0; k < hidden; ++k) {
    const double f = sigmoid(z[k]);
    const double i = sigmoid(z[hidden + k]);
    const double o = sigmoid(z[2 * hidden + k]);
    const double g = std::tanh(z[3 * hidden + k]);
    out.c[k] = f * c_prev[k] + i * g;
    out.h[k] = o * std::tanh(out.c[k]);
    if (!std::isfinite(out.c[k]) || !std::isfinite(out.h[k])) throw NumericalError("lstm cell_step: non-finite state");
  }
  return out;
}

ad::Var forward(ad::Tape& tape, const LstmConfig& config, std::span<const ad::Var> params, const Batch& batch) {
  const std::size_t h = config.hidden;
  if (params.size() != 2 * config.layers + 2) throw ValidationError("lstm forward: wrong parameter count");
  if (batch.features != config.input_dim) throw ValidationError("lstm forward: feature count mismatch");
  if (batch.hours < 1) throw ValidationError("lstm forward: window shorter than one step");
  const std::size_t rows = batch.size;

  // Per-timestep input matrices.
  std::vector<ad::Var> seq;
  seq.reserve(batch.hours);
  for (std::size_t t = 0; t < batch.hours; ++t) {
    Tensor x = Tensor::matrix(rows, batch.features);
    for (std::size_t b = 0; b < rows; ++b)
      for (std::size_t f = 0; f < batch.features; ++f) x(b, f) = batch.input(b, f, t);
    seq.push_back(tape.constant(std::move(x)));
  }

  for (std::size_t l = 0; l < config.layers; ++l) {
    const ad::Var weight = params[2 * l];
    const ad::Var bias = params[2 * l + 1];
    ad::Var h_prev = tape.constant(Tensor::matrix(rows, h));
    ad::Var c_prev = tape.constant(Tensor::matrix(rows, h));
    std::vector<ad::Var> outputs;
    outputs.reserve(seq.size());
    for (const ad::Var x : seq) {
      const ad::Var joined[] = {h_prev, x};
      const ad::Var z = tape.add_row(tape.matmul(tape.concat_cols(joined), weight), bias);
      const ad::Var f = tape.sigmoid(tape.slice_cols(z, 0, h));
      const ad::Var i = tape.sigmoid(tape.slice_cols(z, h, 2 * h));
      const ad::Var o = tape.sigmoid(tape.slice_cols(z, 2 * h, 3 * h));
      const ad::Var g = tape.tanh(tape.slice_cols(z, 3 * h, 4 * h));
      const ad::Var c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
      h_prev = tape.mul(o, tape.tanh(c));
      c_prev = c;
      outputs.push_back(h_prev);
    }
    seq = std::move(outputs);
  }

  const ad::Var head_w = params[2 * config.layers];
  const ad::Var head_b = params[2 * config.layers + 1];
  std::vector<ad::Var> steps;
  steps.reserve(seq.size());
  for (const ad::Var hs : seq) steps.push_back(tape.add_row(tape.matmul(hs, head_w), head_b));
  const ad::Var raw = tape.scale(tape.concat_cols(steps), config.rated_power);
  return tape.clamp(tape.relu(raw), 0.0, config.rated_power);
}

std::vector<double> forward_reference(const LstmParams& params, const scada::WindowSample& sample) {
  const LstmConfig& cfg = params.config;
  if (sample.features != cfg.input_dim) throw ValidationError("lstm forward: feature count mismatch");
  if (sample.hours < 1) throw ValidationError("lstm forward: window shorter than one step");
  std::vector<std::vector<double>> h(cfg.layers, std::vector<double>(cfg.hidden, 0.0));
  std::vector<std::vector<double>> c = h;
  std::vector<double> out(sample.hours);
  for (std::size_t t = 0; t < sample.hours; ++t) {
    std::vector<double> x(sample.features);
    for (std::size_t f = 0; f < sample.features; ++f) x[f] = sample.input(f, t);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      CellOutput next = cell_step(x, h[l], c[l], params.layers[l], cfg.hidden);
      h[l] = std::move(next.h);
      c[l] = std::move(next.c);
      x = h[l];
    }
    double y = params.head_bias[0];
    for (std::size_t k = 0; k < cfg.hidden; ++k) y += x[k] * params.head_weight[k];
    out[t] = std::clamp(std::max(0.0, cfg.rated_power * y), 0.0, cfg.rated_power);
  }
  return out;
}

}  // namespace windguard::lstm
