#pragma once

#include <span>
#include <variant>
#include <vector>

#include "windguard/batch.hpp"
#include "windguard/fnn.hpp"
#include "windguard/lstm.hpp"
#include "windguard/model_kind.hpp"

namespace windguard {

/// Parameters of either network kind.
struct ModelParams {
  std::variant<lstm::LstmParams, fnn::FnnParams> net;

  ModelKind kind() const { return net.index() == 0 ? ModelKind::lstm : ModelKind::fnn; }
  double rated_power() const;
  std::size_t input_dim() const;
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::size_t parameter_count() const;
};

/// Batched forward on a tape, dispatching on kind.
ad::Var forward(ad::Tape& tape, const ModelParams& model, std::span<const ad::Var> params, const Batch& batch);

/// Predictions for already-normalized windows, OpenMP-parallel over chunks of windows.
std::vector<std::vector<double>> predict(const ModelParams& model, std::span<const scada::WindowSample> windows,
                                         std::size_t chunk = 64);

namespace serial {
/// Same as windguard::predict, one chunk after another on the calling thread.
std::vector<std::vector<double>> predict(const ModelParams& model, std::span<const scada::WindowSample> windows,
                                         std::size_t chunk = 64);
}  // namespace serial

}  // namespace windguard
