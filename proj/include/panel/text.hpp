#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace panel::text {

std::string_view trim(std::string_view s);

// ASCII case-insensitive search. npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0);
std::size_t ifind_last(std::string_view haystack, std::string_view needle);

bool icontains(std::string_view haystack, std::string_view needle);

std::string to_upper(std::string_view s);

// Replaces every "{key}" with its value. Unknown braces are left alone, so
// templates may contain literal JSON.
std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string_view, std::string_view>>& vars);

}  // namespace panel::text
