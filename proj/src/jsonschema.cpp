#include "datadoc/jsonschema.hpp"

#include <fstream>
#include <stdexcept>

namespace datadoc::jsonschema {

using nlohmann::json;

namespace {

std::string type_name(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "boolean";
    case json::value_t::string: return "string";
    case json::value_t::array: return "array";
    case json::value_t::object: return "object";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return "integer";
    case json::value_t::number_float: return "number";
    default: return "unknown";
  }
}

bool type_matches(const std::string& want, const json& j) {
  const std::string have = type_name(j);
  if (want == have) return true;
  // integers satisfy "number"
  return want == "number" && have == "integer";
}

void check(const json& schema, const json& instance, const std::string& path,
           std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    const json& t = schema.at("type");
    bool ok = false;
    if (t.is_array()) {
      for (const auto& alt : t) ok = ok || type_matches(alt.get<std::string>(), instance);
    } else {
      ok = type_matches(t.get<std::string>(), instance);
    }
    if (!ok) {
      errors.push_back(path + ": expected type " + t.dump() + ", got " +
                       type_name(instance));
      return;
    }
  }
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& allowed : schema.at("enum")) ok = ok || allowed == instance;
    if (!ok) {
      errors.push_back(path + ": value " + instance.dump() + " not in enum " +
                       schema.at("enum").dump());
    }
  }
  if (instance.is_object()) {
    if (schema.contains("required")) {
      for (const auto& name : schema.at("required")) {
        if (!instance.contains(name.get<std::string>())) {
          errors.push_back(path + ": missing required property '" +
                           name.get<std::string>() + "'");
        }
      }
    }
    const json props =
        schema.contains("properties") ? schema.at("properties") : json::object();
    for (const auto& [key, value] : instance.items()) {
      if (props.contains(key)) {
        check(props.at(key), value, path + "/" + key, errors);
      } else if (schema.value("additionalProperties", json(true)) == json(false)) {
        errors.push_back(path + ": unexpected property '" + key + "'");
      }
    }
  }
  if (instance.is_array() && schema.contains("items")) {
    for (size_t i = 0; i < instance.size(); ++i) {
      check(schema.at("items"), instance[i], path + "/" + std::to_string(i), errors);
    }
  }
}

}  // namespace

std::vector<std::string> validate(const json& schema, const json& instance) {
  std::vector<std::string> errors;
  check(schema, instance, "$", errors);
  return errors;
}

json load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema: " + path.string());
  return json::parse(in);
}

}  // namespace datadoc::jsonschema
