#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace tai {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Parse errors name the file kind and 1-based line number.
nlohmann::json parse_json_line(std::string_view line, std::size_t line_no, const std::string& what);

}  // namespace tai
