#include "json_canonical.hpp"

#include "delayscape/error.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>

namespace delayscape::detail {

namespace {

void write_number(std::string& out, double v) {
    if (!std::isfinite(v)) throw ValidationError("cannot serialize a non-finite number");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
    // Keep floats distinguishable from integers on re-parse.
    const std::string_view text(buf);
    if (text.find_first_of(".eEn") == std::string_view::npos) out += ".0";
}

void write(std::string& out, const nlohmann::ordered_json& j, int indent, int depth) {
    auto newline = [&](int d) {
        if (indent <= 0) return;
        out += '\n';
        out.append(static_cast<std::size_t>(d * indent), ' ');
    };
    switch (j.type()) {
        case nlohmann::ordered_json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                newline(depth + 1);
                out += nlohmann::ordered_json(it.key()).dump();
                out += indent > 0 ? ": " : ":";
                write(out, it.value(), indent, depth + 1);
            }
            newline(depth);
            out += '}';
            return;
        }
        case nlohmann::ordered_json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            // Arrays of scalars stay on one line.
            const bool flat = std::none_of(j.begin(), j.end(), [](const auto& e) { return e.is_structured(); });
            out += '[';
            bool first = true;
            for (const auto& e : j) {
                if (!first) out += flat && indent > 0 ? ", " : ",";
                first = false;
                if (!flat) newline(depth + 1);
                write(out, e, indent, depth + 1);
            }
            if (!flat) newline(depth);
            out += ']';
            return;
        }
        case nlohmann::ordered_json::value_t::number_float:
            write_number(out, j.get<double>());
            return;
        default:
            out += j.dump();
            return;
    }
}

}  // namespace

std::string canonical_dump(const nlohmann::ordered_json& doc, int indent) {
    std::string out;
    write(out, doc, indent, 0);
    out += '\n';
    return out;
}

}  // namespace delayscape::detail

namespace delayscape::detail {

namespace {

[[noreturn]] void schema_error(const std::string& pointer, const std::string& what) {
    throw ParseError("schema error at '" + (pointer.empty() ? std::string("/") : pointer) + "': " + what);
}

}  // namespace

const Json& field(const Json& object, std::string_view key, const std::string& pointer) {
    if (!object.is_object()) schema_error(pointer, "expected an object");
    const auto it = object.find(std::string(key));
    if (it == object.end()) schema_error(child(pointer, key), "missing field");
    return *it;
}

const Json& array_at(const Json& value, const std::string& pointer) {
    if (!value.is_array()) schema_error(pointer, "expected an array");
    return value;
}

double number_at(const Json& value, const std::string& pointer) {
    if (!value.is_number()) schema_error(pointer, "expected a number");
    const double v = value.get<double>();
    if (!std::isfinite(v)) schema_error(pointer, "expected a finite number");
    return v;
}

std::optional<double> optional_number_at(const Json& value, const std::string& pointer) {
    if (value.is_null()) return std::nullopt;
    return number_at(value, pointer);
}

std::string string_at(const Json& value, const std::string& pointer) {
    if (!value.is_string()) schema_error(pointer, "expected a string");
    return value.get<std::string>();
}

bool bool_at(const Json& value, const std::string& pointer) {
    if (!value.is_boolean()) schema_error(pointer, "expected a boolean");
    return value.get<bool>();
}

std::int64_t integer_at(const Json& value, const std::string& pointer) {
    if (!value.is_number_integer()) schema_error(pointer, "expected an integer");
    return value.get<std::int64_t>();
}

}  // namespace delayscape::detail
