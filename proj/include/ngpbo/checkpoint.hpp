#pragma once

#include <string>

#include <json.hpp>

#include "ngpbo/ngp.hpp"

namespace ngpbo {

/// 16-hex-digit FNV-1a digest of a file's bytes.
std::string file_digest(const std::string& path);
std::string bytes_digest(const std::string& bytes);

nlohmann::json params_to_json(const MlpParams& p);
MlpParams params_from_json(const nlohmann::json& j);

/// Model checkpoint: one JSON document {config, mean_params, embed_params,
/// kernel_params, log_noise_variance, training_meta}; arrays row-major.
nlohmann::json model_to_json(const NgpModel& model, const nlohmann::json& training_meta = {});
NgpModel model_from_json(const nlohmann::json& j, nlohmann::json* training_meta = nullptr);

void save_model(const NgpModel& model, const std::string& path,
                const nlohmann::json& training_meta = {});
NgpModel load_model(const std::string& path, nlohmann::json* training_meta = nullptr);

} // namespace ngpbo
