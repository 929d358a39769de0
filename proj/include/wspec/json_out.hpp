#pragma once

#include <string>

#include <json.hpp>

namespace wspec {

/// Serializes JSON with every floating-point number written using 17 significant
/// digits, so files round-trip losslessly and are byte-stable across runs.
/// Non-finite numbers are written as null. Object keys keep nlohmann's sorted order.
std::string dump_json(const nlohmann::json& value, int indent = 1);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace wspec
