#include "windguard/fnn.hpp"

#include <algorithm>
#include <cmath>

#include "windguard/error.hpp"

namespace windguard::fnn {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t layer_inputs(const FnnConfig& c, std::size_t layer) { return layer == 0 ? c.input_dim : c.neurons; }

FnnLayer make_layer(std::size_t inputs, std::size_t neurons, std::size_t grid) {
  return {Tensor::matrix(inputs * grid, neurons * grid), Tensor::matrix(1, neurons * grid)};
}

// Row vector repeating the trapezoid weights once per input curve.
Tensor repeated_weights(std::span<const double> q, std::size_t copies) {
  Tensor row = Tensor::matrix(1, q.size() * copies);
  for (std::size_t c = 0; c < copies; ++c)
    for (std::size_t k = 0; k < q.size(); ++k) row[c * q.size() + k] = q[k];
  return row;
}

}  // namespace

double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }

void FnnConfig::validate() const {
  if (input_dim == 0 || neurons == 0 || hidden_layers == 0) throw ValidationError("fnn: sizes must be positive");
  if (window < 2 || grid < 2) throw ValidationError("fnn: window and grid need at least 2 points");
  if (!(rated_power > 0.0)) throw ValidationError("fnn: rated_power must be positive");
}

Tensor FnnLayer::weight_function(std::size_t r, std::size_t j, std::size_t grid) const {
  Tensor w = Tensor::matrix(grid, grid);
  for (std::size_t k = 0; k < grid; ++k)
    for (std::size_t m = 0; m < grid; ++m) w(k, m) = weight(j * grid + m, r * grid + k);
  return w;
}

std::vector<double> FnnLayer::intercept_function(std::size_t r, std::size_t grid) const {
  std::vector<double> b(grid);
  for (std::size_t k = 0; k < grid; ++k) b[k] = intercept[r * grid + k];
  return b;
}

std::vector<Tensor*> FnnParams::tensors() {
  std::vector<Tensor*> out;
  for (FnnLayer& l : hidden) {
    out.push_back(&l.weight);
    out.push_back(&l.intercept);
  }
  out.push_back(&output.weight);
  out.push_back(&output.intercept);
  return out;
}

std::vector<const Tensor*> FnnParams::tensors() const {
  std::vector<const Tensor*> out;
  for (const FnnLayer& l : hidden) {
    out.push_back(&l.weight);
    out.push_back(&l.intercept);
  }
  out.push_back(&output.weight);
  out.push_back(&output.intercept);
  return out;
}

FnnParams zero_params(const FnnConfig& config) {
  config.validate();
  FnnParams p;
  p.config = config;
  for (std::size_t l = 0; l < config.hidden_layers; ++l)
    p.hidden.push_back(make_layer(layer_inputs(config, l), config.neurons, config.grid));
  p.output = make_layer(config.neurons, 1, config.grid);
  return p;
}

FnnParams init_params(const FnnConfig& config, Rng& rng) {
  FnnParams p = zero_params(config);
  const double bound = 1.0 / static_cast<double>(config.grid);
  for (Tensor* t : p.tensors()) {
    if (t->rows() == 1) continue;  // intercepts stay 0
    for (double& w : t->values()) w = rng.uniform(-bound, bound);
  }
  return p;
}

FnnParams from_functions(const FnnConfig& config, const WeightFn& weight, const InterceptFn& intercept) {
  FnnParams p = zero_params(config);
  const std::vector<double> grid = make_grid(config.window, config.grid);
  const std::size_t s = config.grid;
  auto fill = [&](FnnLayer& layer, std::size_t index, std::size_t inputs, std::size_t neurons) {
    for (std::size_t r = 0; r < neurons; ++r)
      for (std::size_t k = 0; k < s; ++k) {
        layer.intercept[r * s + k] = intercept(index, r, grid[k]);
        for (std::size_t j = 0; j < inputs; ++j)
          for (std::size_t m = 0; m < s; ++m) layer.weight(j * s + m, r * s + k) = weight(index, r, j, grid[k], grid[m]);
      }
  };
  for (std::size_t l = 0; l < config.hidden_layers; ++l) fill(p.hidden[l], l, layer_inputs(config, l), config.neurons);
  fill(p.output, config.hidden_layers, config.neurons, 1);
  return p;
}

std::vector<double> make_grid(std::size_t window, std::size_t points) {
  if (window < 2 || points < 2) throw ValidationError("make_grid: need at least 2 hours and 2 points");
  std::vector<double> g(points);
  const double span = static_cast<double>(window - 1);
  for (std::size_t k = 0; k < points; ++k) g[k] = span * static_cast<double>(k) / static_cast<double>(points - 1);
  return g;
}

Tensor to_grid_matrix(std::size_t hours, std::size_t points) {
  const std::vector<double> grid = make_grid(hours, points);
  Tensor m = Tensor::matrix(hours, points);
  for (std::size_t k = 0; k < points; ++k) {
    const double s = grid[k];
    auto lo = static_cast<std::size_t>(std::floor(s));
    if (lo >= hours - 1) lo = hours - 2;
    const double frac = s - static_cast<double>(lo);
    m(lo, k) += 1.0 - frac;
    m(lo + 1, k) += frac;
  }
  return m;
}

Tensor from_grid_matrix(std::size_t points, std::size_t hours) {
  const std::vector<double> grid = make_grid(hours, points);
  const double step = grid[1] - grid[0];
  Tensor m = Tensor::matrix(points, hours);
  for (std::size_t t = 0; t < hours; ++t) {
    const double x = static_cast<double>(t);
    auto lo = static_cast<std::size_t>(std::floor(x / step));
    if (lo >= points - 1) lo = points - 2;
    const double frac = std::clamp((x - grid[lo]) / step, 0.0, 1.0);
    m(lo, t) += 1.0 - frac;
    m(lo + 1, t) += frac;
  }
  return m;
}

std::vector<double> resample_to_grid(std::span<const double> hourly, std::size_t points) {
  const Tensor m = to_grid_matrix(hourly.size(), points);
  std::vector<double> out(points, 0.0);
  for (std::size_t h = 0; h < hourly.size(); ++h)
    for (std::size_t k = 0; k < points; ++k) out[k] += hourly[h] * m(h, k);
  return out;
}

std::vector<double> resample_from_grid(std::span<const double> grid_values, std::size_t hours) {
  const Tensor m = from_grid_matrix(grid_values.size(), hours);
  std::vector<double> out(hours, 0.0);
  for (std::size_t k = 0; k < grid_values.size(); ++k)
    for (std::size_t t = 0; t < hours; ++t) out[t] += grid_values[k] * m(k, t);
  return out;
}

std::vector<double> trapezoid_weights(std::span<const double> grid) {
  if (grid.size() < 2) throw ValidationError("quadrature: need at least 2 grid points");
  std::vector<double> q(grid.size(), 0.0);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double half = 0.5 * (grid[k + 1] - grid[k]);
    q[k] += half;
    q[k + 1] += half;
  }
  return q;
}

double quadrature(std::span<const double> values, std::span<const double> grid) {
  if (values.size() != grid.size()) throw ValidationError("quadrature: values and grid differ in length");
  const std::vector<double> q = trapezoid_weights(grid);
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) acc += q[k] * values[k];
  return acc;
}

std::vector<double> continuous_neuron(std::span<const std::vector<double>> inputs, std::span<const Tensor> weights,
                                      std::span<const double> intercept, std::span<const double> grid,
                                      const std::function<double(double)>& activation) {
  const std::size_t s = grid.size();
  if (inputs.size() != weights.size() || intercept.size() != s)
    throw ValidationError("continuous_neuron: shape mismatch");
  std::vector<double> out(s);
  std::vector<double> integrand(s);
  for (std::size_t k = 0; k < s; ++k) {
    double acc = intercept[k];
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      if (inputs[j].size() != s || weights[j].rows() != s || weights[j].cols() != s)
        throw ValidationError("continuous_neuron: shape mismatch");
      for (std::size_t m = 0; m < s; ++m) integrand[m] = weights[j](k, m) * inputs[j][m];
      acc += quadrature(integrand, grid);
    }
    out[k] = activation(acc);
    if (!std::isfinite(out[k])) throw NumericalError("continuous_neuron: non-finite output");
  }
  return out;
}

ad::Var forward(ad::Tape& tape, const FnnConfig& config, std::span<const ad::Var> params, const Batch& batch) {
  if (params.size() != 2 * config.hidden_layers + 2) throw ValidationError("fnn forward: wrong parameter count");
  if (batch.features != config.input_dim) throw ValidationError("fnn forward: feature count mismatch");
  if (batch.hours != config.window) throw ValidationError("fnn forward: window length mismatch");
  const std::size_t s = config.grid;
  const std::size_t w = config.window;
  const std::vector<double> grid = make_grid(w, s);
  const std::vector<double> q = trapezoid_weights(grid);
  const Tensor to_grid = to_grid_matrix(w, s);

  // Inputs on the grid, pre-multiplied by the quadrature weights.
  Tensor x = Tensor::matrix(batch.size, config.input_dim * s);
  for (std::size_t b = 0; b < batch.size; ++b)
    for (std::size_t j = 0; j < config.input_dim; ++j)
      for (std::size_t h = 0; h < w; ++h) {
        const double v = batch.input(b, j, h);
        if (v == 0.0) continue;
        for (std::size_t k = 0; k < s; ++k) x(b, j * s + k) += v * to_grid(h, k);
      }
  for (std::size_t b = 0; b < batch.size; ++b)
    for (std::size_t c = 0; c < config.input_dim * s; ++c) x(b, c) *= q[c % s];

  ad::Var layer_in = tape.constant(std::move(x));
  const ad::Var q_neurons = tape.constant(repeated_weights(q, config.neurons));
  for (std::size_t l = 0; l < config.hidden_layers; ++l) {
    if (l > 0) layer_in = tape.mul_row(layer_in, q_neurons);
    const ad::Var pre = tape.add_row(tape.matmul(layer_in, params[2 * l]), params[2 * l + 1]);
    layer_in = tape.elu(pre);
  }
  const ad::Var weighted = tape.mul_row(layer_in, q_neurons);
  const std::size_t out_at = 2 * config.hidden_layers;
  const ad::Var pre_out = tape.add_row(tape.matmul(weighted, params[out_at]), params[out_at + 1]);
  const ad::Var on_grid = tape.scale(tape.sigmoid(pre_out), config.rated_power);
  return tape.matmul(on_grid, tape.constant(from_grid_matrix(s, w)));
}

std::vector<double> forward_reference(const FnnParams& params, const scada::WindowSample& sample) {
  const FnnConfig& cfg = params.config;
  if (sample.features != cfg.input_dim || sample.hours != cfg.window)
    throw ValidationError("fnn forward: sample shape mismatch");
  const std::size_t s = cfg.grid;
  const std::vector<double> grid = make_grid(cfg.window, s);

  std::vector<std::vector<double>> curves;
  for (std::size_t j = 0; j < cfg.input_dim; ++j) {
    std::vector<double> hourly(cfg.window);
    for (std::size_t t = 0; t < cfg.window; ++t) hourly[t] = sample.input(j, t);
    curves.push_back(resample_to_grid(hourly, s));
  }
  auto apply_layer = [&](const FnnLayer& layer, std::size_t neurons, const std::function<double(double)>& act) {
    std::vector<std::vector<double>> next;
    for (std::size_t r = 0; r < neurons; ++r) {
      std::vector<Tensor> w;
      for (std::size_t j = 0; j < curves.size(); ++j) w.push_back(layer.weight_function(r, j, s));
      next.push_back(continuous_neuron(curves, w, layer.intercept_function(r, s), grid, act));
    }
    return next;
  };
  for (const FnnLayer& layer : params.hidden) curves = apply_layer(layer, cfg.neurons, elu);
  const auto out = apply_layer(params.output, 1, [&](double v) { return cfg.rated_power * sigmoid(v); });
  return resample_from_grid(out.front(), cfg.window);
}

}  // namespace windguard::fnn
