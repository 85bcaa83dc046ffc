#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

namespace dr::jsonu {

using json = nlohmann::ordered_json;

/// Parses `text`, rethrowing nlohmann errors as dr::ParseError prefixed with
/// `where` (a file name or "file:line" label).
json parse(const std::string& text, const std::string& where);

/// Requires `obj` to be a JSON object whose keys are exactly `required` plus
/// any subset of `optional`; throws dr::ParseError naming the offending key.
void require_keys(const json& obj, std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional, const std::string& where);

std::string get_string(const json& obj, const char* key, const std::string& where);
std::int64_t get_int(const json& obj, const char* key, const std::string& where);
bool get_bool(const json& obj, const char* key, const std::string& where);
const json& get_member(const json& obj, const char* key, const std::string& where);

}  // namespace dr::jsonu
