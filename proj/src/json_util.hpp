#pragma once

// Internal helpers for schema parsing: required-field access that throws
// SpecError carrying a JSON-path-style location. Not part of the public API.

#include <string>
#include <vector>

#include "json.hpp"

#include "affest/common.hpp"

namespace affest::detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw SpecError(path + ": " + what);
}

inline const json& need(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing required field");
    return *it;
}

inline double need_number(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

inline int need_int(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<int>();
}

inline bool need_bool(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

inline std::string need_string(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline Vector need_vector(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    const std::string p = path + "." + key;
    if (!v.is_array() || v.empty()) fail(p, "expected a non-empty array of numbers");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) fail(p + "[" + std::to_string(i) + "]", "expected a number");
        out[static_cast<int>(i)] = v[i].get<double>();
    }
    return out;
}

inline Matrix need_matrix(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    const std::string p = path + "." + key;
    if (!v.is_array() || v.empty()) fail(p, "expected a non-empty array of rows");
    const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
    if (cols == 0) fail(p + "[0]", "expected a non-empty array of numbers");
    Matrix out(v.size(), cols);
    for (std::size_t r = 0; r < v.size(); ++r) {
        const std::string pr = p + "[" + std::to_string(r) + "]";
        if (!v[r].is_array() || v[r].size() != cols) fail(pr, "rows must all have the same length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!v[r][c].is_number()) fail(pr + "[" + std::to_string(c) + "]", "expected a number");
            out(static_cast<int>(r), static_cast<int>(c)) = v[r][c].get<double>();
        }
    }
    return out;
}

inline json to_array(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline json to_rows(const Matrix& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace affest::detail
