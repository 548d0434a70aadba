#include "windguard/model.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>

#include "windguard/error.hpp"

namespace windguard {

Batch make_batch(std::span<const scada::WindowSample> samples, std::span<const std::size_t> indices) {
  Batch batch;
  batch.size = indices.empty() ? samples.size() : indices.size();
  if (batch.size == 0) return batch;
  const scada::WindowSample& first = samples[indices.empty() ? 0 : indices[0]];
  batch.features = first.features;
  batch.hours = first.hours;
  batch.inputs.reserve(batch.size * batch.features * batch.hours);
  batch.targets.reserve(batch.size * batch.hours);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const scada::WindowSample& s = samples[indices.empty() ? b : indices[b]];
    if (s.features != batch.features || s.hours != batch.hours) throw ValidationError("make_batch: ragged windows");
    batch.inputs.insert(batch.inputs.end(), s.inputs.begin(), s.inputs.end());
    if (s.target.size() == s.hours) {
      batch.targets.insert(batch.targets.end(), s.target.begin(), s.target.end());
    } else {
      batch.targets.insert(batch.targets.end(), s.hours, 0.0);
    }
  }
  return batch;
}

double ModelParams::rated_power() const {
  return std::visit([](const auto& p) { return p.config.rated_power; }, net);
}

std::size_t ModelParams::input_dim() const {
  return std::visit([](const auto& p) { return p.config.input_dim; }, net);
}

std::vector<Tensor*> ModelParams::tensors() {
  return std::visit([](auto& p) { return p.tensors(); }, net);
}

std::vector<const Tensor*> ModelParams::tensors() const {
  return std::visit([](const auto& p) { return p.tensors(); }, net);
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

ad::Var forward(ad::Tape& tape, const ModelParams& model, std::span<const ad::Var> params, const Batch& batch) {
  if (const auto* l = std::get_if<lstm::LstmParams>(&model.net)) return lstm::forward(tape, l->config, params, batch);
  return fnn::forward(tape, std::get<fnn::FnnParams>(model.net).config, params, batch);
}

namespace {

void predict_chunk(const ModelParams& model, std::span<const scada::WindowSample> windows, std::size_t begin,
                   std::size_t end, std::vector<std::vector<double>>& out) {
  std::vector<std::size_t> idx;
  for (std::size_t i = begin; i < end; ++i) idx.push_back(i);
  const Batch batch = make_batch(windows, idx);
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Tensor* t : model.tensors()) vars.push_back(tape.constant(*t));
  const Tensor& y = tape.value(forward(tape, model, vars, batch));
  for (std::size_t b = 0; b < idx.size(); ++b) {
    out[begin + b].assign(y.values().begin() + static_cast<std::ptrdiff_t>(b * y.cols()),
                          y.values().begin() + static_cast<std::ptrdiff_t>((b + 1) * y.cols()));
  }
}

}  // namespace

std::vector<std::vector<double>> predict(const ModelParams& model, std::span<const scada::WindowSample> windows,
                                         std::size_t chunk) {
  std::vector<std::vector<double>> out(windows.size());
  if (windows.empty()) return out;
  if (chunk == 0) chunk = 1;
  const auto chunks = static_cast<std::int64_t>((windows.size() + chunk - 1) / chunk);
  // Per-thread exceptions cannot cross the parallel region.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * chunk;
    const std::size_t end = std::min(windows.size(), begin + chunk);
    try {
      predict_chunk(model, windows, begin, end, out);
    } catch (...) {
#pragma omp critical(windguard_predict_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

namespace serial {

std::vector<std::vector<double>> predict(const ModelParams& model, std::span<const scada::WindowSample> windows,
                                         std::size_t chunk) {
  std::vector<std::vector<double>> out(windows.size());
  if (chunk == 0) chunk = 1;
  for (std::size_t begin = 0; begin < windows.size(); begin += chunk)
    predict_chunk(model, windows, begin, std::min(windows.size(), begin + chunk), out);
  return out;
}

}  // namespace serial
}  // namespace windguard
