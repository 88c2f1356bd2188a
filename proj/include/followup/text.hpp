#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace followup::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_whitespace(std::string_view s);
bool is_blank(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// "1) a\n2) b" formatting used inside prompts.
std::string format_numbered_list(const std::vector<std::string>& items);

}  // namespace followup::text
