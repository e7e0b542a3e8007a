#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmtfeat/classify.hpp"

namespace rmtfeat {

inline constexpr int kModelFormatVersion = 1;

// A trained model together with what is needed to apply it to a feature
// table: column names and the scaler fitted on the training rows.
struct ModelDocument {
  TrainedModel model;
  std::vector<std::string> feature_names;
  std::optional<FeatureScaler> scaler;
};

// {"format": "rmtfeat-model", "version": 1, "kind": ..., "dim": ...,
//  "features": [...], "scaler": {...} | null, "parameters": {...}}
nlohmann::json model_to_json(const ModelDocument& doc);
ModelDocument model_from_json(const nlohmann::json& j);

}  // namespace rmtfeat
