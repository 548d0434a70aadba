#pragma once

#include <functional>
#include <span>
#include <vector>

#include "windguard/batch.hpp"
#include "windguard/rng.hpp"
#include "windguard/tape.hpp"
#include "windguard/tensor.hpp"

// Functional neural network. Every layer maps curves to curves:
//
//   H_r(s) = σ( b_r(s) + Σ_j ∫ w_rj(s, t) H_j(t) dt )
//
// Functions are represented by their values on a uniform grid of S points
// spanning the window's hours, and the integral is the trapezoidal rule on
// that grid. Hidden layers use ELU; the output neuron is identity followed by
// a rated-power-scaled sigmoid.
namespace windguard::fnn {

struct FnnConfig {
  std::size_t input_dim = 4;
  std::size_t window = 24;
  std::size_t grid = 40;
  std::size_t neurons = 20;
  std::size_t hidden_layers = 1;
  double rated_power = 2000.0;

  void validate() const;
};

/// Dense block form of a layer's weight functions: the value w_rj(s_k, t_m)
/// sits at weight(j·S + m, r·S + k). intercept(0, r·S + k) = b_r(s_k).
struct FnnLayer {
  Tensor weight;
  Tensor intercept;

  /// w_rj as an S×S matrix indexed [k][m].
  Tensor weight_function(std::size_t r, std::size_t j, std::size_t grid) const;
  std::vector<double> intercept_function(std::size_t r, std::size_t grid) const;
};

struct FnnParams {
  FnnConfig config;
  std::vector<FnnLayer> hidden;
  FnnLayer output;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

FnnParams zero_params(const FnnConfig& config);
/// Weights uniform ±1/S, intercepts 0.
FnnParams init_params(const FnnConfig& config, Rng& rng);

using WeightFn = std::function<double(std::size_t layer, std::size_t r, std::size_t j, double s, double t)>;
using InterceptFn = std::function<double(std::size_t layer, std::size_t r, double s)>;
/// Samples continuous weight and intercept functions on the configured grid.
/// The output layer has index hidden_layers.
FnnParams from_functions(const FnnConfig& config, const WeightFn& weight, const InterceptFn& intercept);

/// Uniform grid over [0, window − 1] hours.
std::vector<double> make_grid(std::size_t window, std::size_t points);

/// Linear interpolation of an hourly curve onto `points` grid points.
std::vector<double> resample_to_grid(std::span<const double> hourly, std::size_t points);
/// Linear interpolation of a grid curve back onto `hours` hourly points.
std::vector<double> resample_from_grid(std::span<const double> grid_values, std::size_t hours);

/// Interpolation as a matrix: hourly(1×W) · M(W×S) = grid curve.
Tensor to_grid_matrix(std::size_t hours, std::size_t points);
/// grid(1×S) · M(S×W) = hourly curve.
Tensor from_grid_matrix(std::size_t points, std::size_t hours);

/// Trapezoidal rule.
double quadrature(std::span<const double> values, std::span<const double> grid);
std::vector<double> trapezoid_weights(std::span<const double> grid);

/// One continuous neuron evaluated on the grid. `weights[j]` is S×S indexed [k][m].
std::vector<double> continuous_neuron(std::span<const std::vector<double>> inputs, std::span<const Tensor> weights,
                                      std::span<const double> intercept, std::span<const double> grid,
                                      const std::function<double(double)>& activation);

double elu(double x);

/// Batched forward on a tape; returns batch × window predictions in kW.
ad::Var forward(ad::Tape& tape, const FnnConfig& config, std::span<const ad::Var> params, const Batch& batch);

/// Neuron-by-neuron forward for one window via continuous_neuron.
std::vector<double> forward_reference(const FnnParams& params, const scada::WindowSample& sample);

}  // namespace windguard::fnn
