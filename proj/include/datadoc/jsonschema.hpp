#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace datadoc::jsonschema {

/// Structural validator for the subset of JSON Schema the published
/// schemas use: type, required, properties, items, enum,
/// additionalProperties (boolean form). Returns one message per
/// violation, empty when the instance validates.
std::vector<std::string> validate(const nlohmann::json& schema,
                                  const nlohmann::json& instance);

nlohmann::json load_schema(const std::filesystem::path& path);

}  // namespace datadoc::jsonschema
