#include "panel/text.hpp"

#include <algorithm>
#include <cctype>

namespace panel::text {

namespace {

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool iequal_at(std::string_view haystack, std::size_t pos, std::string_view needle) {
  for (std::size_t i = 0; i < needle.size(); ++i) {
    if (lower(haystack[pos + i]) != lower(needle[i])) return false;
  }
  return true;
}

}  // namespace

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from) {
  if (needle.size() > haystack.size()) return std::string_view::npos;
  for (std::size_t pos = from; pos + needle.size() <= haystack.size(); ++pos) {
    if (iequal_at(haystack, pos, needle)) return pos;
  }
  return std::string_view::npos;
}

std::size_t ifind_last(std::string_view haystack, std::string_view needle) {
  if (needle.size() > haystack.size()) return std::string_view::npos;
  for (std::size_t pos = haystack.size() - needle.size() + 1; pos-- > 0;) {
    if (iequal_at(haystack, pos, needle)) return pos;
  }
  return std::string_view::npos;
}

bool icontains(std::string_view haystack, std::string_view needle) {
  return ifind(haystack, needle) != std::string_view::npos;
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string_view, std::string_view>>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    if (tmpl[pos] == '{') {
      bool matched = false;
      for (const auto& [key, value] : vars) {
        if (tmpl.size() - pos >= key.size() + 2 && tmpl.compare(pos + 1, key.size(), key) == 0 &&
            tmpl[pos + 1 + key.size()] == '}') {
          out.append(value);
          pos += key.size() + 2;
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    out.push_back(tmpl[pos++]);
  }
  return out;
}

}  // namespace panel::text
