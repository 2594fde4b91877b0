#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "linkring/error.hpp"

namespace linkring {

using json = nlohmann::ordered_json;

// Parses JSON text, reporting failures as ParseError with 1-based line/column.
inline json parse_json_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ", column " + std::to_string(column) +
                                           ": " + e.what());
  }
}

// Rejects keys outside `allowed`; `where` names the object in messages.
inline void require_known_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                               std::string_view where) {
  if (!obj.is_object()) throw Error(ErrorKind::ValidationError, std::string(where) + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorKind::ValidationError, "unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
T get_or(const json& obj, std::string_view key, T fallback, std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::ValidationError, "'" + std::string(key) + "' in " + std::string(where) +
                                                " has the wrong type");
  }
}

}  // namespace linkring
