#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace delayscape::detail {

/// Serializes with the document's key order and every float printed with 17 significant digits.
std::string canonical_dump(const nlohmann::ordered_json& doc, int indent = 1);

}  // namespace delayscape::detail

namespace delayscape::detail {

using Json = nlohmann::ordered_json;

// Schema readers; failures throw ParseError naming the JSON pointer.
const Json& field(const Json& object, std::string_view key, const std::string& pointer);
const Json& array_at(const Json& value, const std::string& pointer);
double number_at(const Json& value, const std::string& pointer);
std::optional<double> optional_number_at(const Json& value, const std::string& pointer);
std::string string_at(const Json& value, const std::string& pointer);
bool bool_at(const Json& value, const std::string& pointer);
std::int64_t integer_at(const Json& value, const std::string& pointer);

inline std::string child(const std::string& pointer, std::string_view key) { return pointer + "/" + std::string(key); }
inline std::string child(const std::string& pointer, std::size_t index) { return pointer + "/" + std::to_string(index); }

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace delayscape::detail
