#pragma once

#include <filesystem>

#include <json.hpp>

#include "windguard/training.hpp"

// Parameter files for trained models. One JSON document per model holding the
// kind, architecture, every tensor with its shape, the normalizer and the
// training history.
namespace windguard::model_io {

inline constexpr int kFormatVersion = 1;

nlohmann::ordered_json train_config_to_json(const training::TrainConfig& config);
/// Missing keys keep the defaults of the given kind.
training::TrainConfig train_config_from_json(const nlohmann::json& j, ModelKind kind);

/// Tensor names in ModelParams::tensors() order.
std::vector<std::string> tensor_names(const ModelParams& params);

void save_model(const training::TrainedModel& model, const std::filesystem::path& path);
training::TrainedModel load_model(const std::filesystem::path& path);

/// epoch, train_loss, val_loss, best
void write_history_csv(const training::TrainedModel& model, const std::filesystem::path& path);

}  // namespace windguard::model_io
