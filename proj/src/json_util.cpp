#include "dr/json_util.hpp"

#include <algorithm>

#include "dr/errors.hpp"

namespace dr::jsonu {

json parse(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
}

void require_keys(const json& obj, std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
    for (const char* key : required) {
        if (!obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
    }
    for (const auto& [key, value] : obj.items()) {
        auto name_is = [&key](const char* k) { return key == k; };
        if (std::any_of(required.begin(), required.end(), name_is)) continue;
        if (std::any_of(optional.begin(), optional.end(), name_is)) continue;
        throw ParseError(where + ": unknown key '" + key + "'");
    }
}

const json& get_member(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw ParseError(where + ": missing key '" + std::string(key) + "'");
    }
    return obj.at(key);
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
    const json& v = get_member(obj, key, where);
    if (!v.is_string()) throw ParseError(where + ": key '" + std::string(key) + "' must be a string");
    return v.get<std::string>();
}

std::int64_t get_int(const json& obj, const char* key, const std::string& where) {
    const json& v = get_member(obj, key, where);
    if (!v.is_number_integer()) {
        throw ParseError(where + ": key '" + std::string(key) + "' must be an integer");
    }
    return v.get<std::int64_t>();
}

bool get_bool(const json& obj, const char* key, const std::string& where) {
    const json& v = get_member(obj, key, where);
    if (!v.is_boolean()) throw ParseError(where + ": key '" + std::string(key) + "' must be a boolean");
    return v.get<bool>();
}

}  // namespace dr::jsonu
