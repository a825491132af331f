#pragma once

// Typed field access on parsed JSON with dotted field paths in errors.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "theramon/errors.hpp"

namespace theramon::io {

using json = nlohmann::json;

/// Invalid value at a specific field, e.g. "chain.thin" or "cycles[2].dose_std".
struct FieldError : ConfigError {
    FieldError(std::string path, const std::string& what)
        : ConfigError((path.empty() ? std::string("body") : path) + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

inline std::string field_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw FieldError(path, "expected an object");
}

inline void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
    require_object(j, path);
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* a : keys) known = known || k == a;
        if (!known) throw FieldError(field_path(path, k), "unknown field");
    }
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw FieldError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw FieldError(path, "expected a finite number");
    return d;
}

inline std::uint64_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw FieldError(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw FieldError(path, "expected a string");
    return v.get<std::string>();
}

inline std::vector<double> as_numbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw FieldError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], index_path(path, i)));
    return out;
}

inline const json& required(const json& obj, const char* key, const std::string& path) {
    require_object(obj, path);
    auto it = obj.find(key);
    if (it == obj.end()) throw FieldError(field_path(path, key), "missing field");
    return *it;
}

inline const json* optional(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline json parse_json(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(source + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

}  // namespace theramon::io
