#pragma once

#include <span>
#include <vector>

#include "windguard/batch.hpp"
#include "windguard/rng.hpp"
#include "windguard/tape.hpp"
#include "windguard/tensor.hpp"

// Stacked LSTM regressor: a window of input features to a power curve of the
// same length. Each timestep's top hidden state goes through a linear head
// (in units of rated power), then ReLU, then a hard cutoff at [0, rated].
namespace windguard::lstm {

struct LstmConfig {
  std::size_t input_dim = 4;
  std::size_t hidden = 24;
  std::size_t layers = 2;
  double rated_power = 2000.0;

  void validate() const;
};

/// Gate blocks are laid out column-wise as [forget | input | output | candidate].
struct LayerParams {
  Tensor weight;  // (hidden + layer input) × 4·hidden, rows ordered [h_prev; x_t]
  Tensor bias;    // 1 × 4·hidden
};

struct LstmParams {
  LstmConfig config;
  std::vector<LayerParams> layers;
  Tensor head_weight;  // hidden × 1
  Tensor head_bias;    // 1 × 1

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

LstmParams zero_params(const LstmConfig& config);

/// Uniform ±1/√fan_in, forget-gate bias +1, head bias 0.5 so the ReLU starts active.
LstmParams init_params(const LstmConfig& config, Rng& rng);

struct CellOutput {
  std::vector<double> h;
  std::vector<double> c;
};

/// One step of one layer on plain vectors.
CellOutput cell_step(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev,
                     const LayerParams& layer, std::size_t hidden);

/// Batched forward on a tape. `params` are the tape handles of tensors() in order.
/// Returns batch × hours predictions in kW.
ad::Var forward(ad::Tape& tape, const LstmConfig& config, std::span<const ad::Var> params, const Batch& batch);

/// Single-window forward through cell_step with no tape.
std::vector<double> forward_reference(const LstmParams& params, const scada::WindowSample& sample);

}  // namespace windguard::lstm
