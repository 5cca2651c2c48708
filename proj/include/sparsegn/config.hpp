// Flat key/value configuration documents: one `key = value` entry per line,
// dot-separated key paths, `#` comments. Values are quoted strings, numbers,
// booleans, or bracketed lists of those.
#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace sparsegn {

struct ConfigValue {
  std::variant<std::string, double, bool, std::vector<double>, std::vector<std::string>> data;

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_number_list() const { return std::holds_alternative<std::vector<double>>(data); }
  bool is_string_list() const { return std::holds_alternative<std::vector<std::string>>(data); }
};

namespace detail {

inline std::string trim(const std::string& text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

inline bool parse_number(const std::string& text, double& out) {
  if (text.empty()) return false;
  std::size_t consumed = 0;
  try {
    out = std::stod(text, &consumed);
  } catch (const std::exception&) {
    return false;
  }
  return consumed == text.size();
}

inline ConfigValue parse_scalar(const std::string& raw, const std::string& key, int line) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    return {raw.substr(1, raw.size() - 2)};
  }
  if (raw == "true") return {true};
  if (raw == "false") return {false};
  double number = 0.0;
  if (parse_number(raw, number)) return {number};
  if (raw.empty()) {
    throw std::invalid_argument("config line " + std::to_string(line) + ": key '" + key +
                                "' has an empty value");
  }
  return {raw};  // bare word, treated as a string
}

}  // namespace detail

/// Parsed configuration document. Keys are stored sorted, so serialization
/// (and the provenance headers built from it) is deterministic.
class ConfigDoc {
 public:
  static ConfigDoc parse(const std::string& text) {
    ConfigDoc doc;
    std::istringstream stream(text);
    std::string line;
    int line_number = 0;
    while (std::getline(stream, line)) {
      ++line_number;
      const std::size_t comment = line.find('#');
      if (comment != std::string::npos && line.find('"') == std::string::npos) {
        line = line.substr(0, comment);
      }
      line = detail::trim(line);
      if (line.empty()) continue;
      const std::size_t equals = line.find('=');
      if (equals == std::string::npos) {
        throw std::invalid_argument("config line " + std::to_string(line_number) +
                                    ": expected 'key = value'");
      }
      const std::string key = detail::trim(line.substr(0, equals));
      const std::string raw = detail::trim(line.substr(equals + 1));
      if (key.empty()) {
        throw std::invalid_argument("config line " + std::to_string(line_number) +
                                    ": empty key");
      }
      if (!raw.empty() && raw.front() == '[') {
        if (raw.back() != ']') {
          throw std::invalid_argument("config line " + std::to_string(line_number) +
                                      ": unterminated list");
        }
        doc.values_[key] = parse_list(raw.substr(1, raw.size() - 2), key, line_number);
      } else {
        doc.values_[key] = detail::parse_scalar(raw, key, line_number);
      }
    }
    return doc;
  }

  static ConfigDoc load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
      throw std::runtime_error("ConfigDoc::load: cannot open " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const ConfigValue& at(const std::string& key) const {
    auto found = values_.find(key);
    if (found == values_.end()) {
      throw std::invalid_argument("config: missing key '" + key + "'");
    }
    return found->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& value = at(key);
    if (!value.is_string()) throw type_error(key, "string");
    return std::get<std::string>(value.data);
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& value = at(key);
    if (!value.is_number()) throw type_error(key, "number");
    return std::get<double>(value.data);
  }

  int get_int(const std::string& key, int fallback) const {
    const double value = get_double(key, static_cast<double>(fallback));
    const int rounded = static_cast<int>(value);
    if (static_cast<double>(rounded) != value) throw type_error(key, "integer");
    return rounded;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& value = at(key);
    if (!value.is_bool()) throw type_error(key, "boolean");
    return std::get<bool>(value.data);
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& value = at(key);
    if (value.is_number()) return {std::get<double>(value.data)};
    if (!value.is_number_list()) throw type_error(key, "number list");
    return std::get<std::vector<double>>(value.data);
  }

  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& value = at(key);
    if (value.is_string()) return {std::get<std::string>(value.data)};
    if (!value.is_string_list()) throw type_error(key, "string list");
    return std::get<std::vector<std::string>>(value.data);
  }

  void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }

  std::vector<std::string> keys() const {
    std::vector<std::string> result;
    for (const auto& [key, value] : values_) result.push_back(key);
    return result;
  }

  nlohmann::json to_json() const {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [key, value] : values_) {
      std::visit([&doc, &key](const auto& v) { doc[key] = v; }, value.data);
    }
    return doc;
  }

 private:
  static std::invalid_argument type_error(const std::string& key, const std::string& expected) {
    return std::invalid_argument("config: key '" + key + "' is not a " + expected);
  }

  static ConfigValue parse_list(const std::string& inner, const std::string& key, int line) {
    std::vector<std::string> items;
    std::string current;
    for (char c : inner) {
      if (c == ',') {
        items.push_back(detail::trim(current));
        current.clear();
      } else {
        current += c;
      }
    }
    const std::string last = detail::trim(current);
    if (!last.empty()) items.push_back(last);
    if (items.empty()) {
      return {std::vector<double>{}};
    }
    bool all_numbers = true;
    std::vector<double> numbers;
    for (const auto& item : items) {
      double value = 0.0;
      if (detail::parse_number(item, value)) {
        numbers.push_back(value);
      } else {
        all_numbers = false;
        break;
      }
    }
    if (all_numbers) {
      return {numbers};
    }
    std::vector<std::string> strings;
    for (const auto& item : items) {
      const ConfigValue scalar = detail::parse_scalar(item, key, line);
      if (scalar.is_string()) {
        strings.push_back(std::get<std::string>(scalar.data));
      } else {
        throw std::invalid_argument("config line " + std::to_string(line) + ": key '" + key +
                                    "' mixes numbers and strings in one list");
      }
    }
    return {strings};
  }

  std::map<std::string, ConfigValue> values_;
};

}  // namespace sparsegn
