#pragma once

#include <string>
#include <string_view>

#include "windguard/error.hpp"

namespace windguard {

enum class ModelKind { lstm, fnn };

inline std::string_view to_string(ModelKind kind) { return kind == ModelKind::lstm ? "lstm" : "fnn"; }

inline ModelKind parse_model_kind(std::string_view text) {
  if (text == "lstm") return ModelKind::lstm;
  if (text == "fnn") return ModelKind::fnn;
  throw ValidationError("unknown model kind '" + std::string(text) + "'");
}

}  // namespace windguard
