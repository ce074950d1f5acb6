// Copyright 2026 The psd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "psd/config_file.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "psd/error.hpp"

namespace psd {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing comment that is not inside quotes.
std::string strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

bool is_quoted(const std::string& v) {
  return v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front();
}

std::string unquote(const std::string& v) { return is_quoted(v) ? v.substr(1, v.size() - 2) : v; }

double to_double(const std::string& text, const std::string& key) {
  double value = 0.0;
  const auto t = unquote(trim(text));
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value))
    throw UsageError("config key '" + key + "': expected a number, got '" + text + "'");
  return value;
}

}  // namespace

ConfigDocument ConfigDocument::parse(std::istream& in, const std::string& source_name) {
  ConfigDocument doc;
  std::string line, section;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto where = source_name + ":" + std::to_string(number);
    const auto text = trim(strip_comment(line));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw UsageError(where + ": malformed section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const auto key = trim(std::string_view(text).substr(0, eq));
    const auto value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty() || value.empty()) throw UsageError(where + ": empty key or value");
    const auto full = section.empty() ? key : section + "." + key;
    if (doc.values_.count(full)) throw UsageError(where + ": duplicate key '" + full + "'");
    doc.values_[full] = value;
  }
  return doc;
}

ConfigDocument ConfigDocument::parse(std::string_view text, const std::string& source_name) {
  std::istringstream in{std::string(text)};
  return parse(in, source_name);
}

ConfigDocument ConfigDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  return parse(in, path);
}

void ConfigDocument::set(const std::string& key, const std::string& raw_value) { values_[key] = trim(raw_value); }

void ConfigDocument::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw UsageError("--set expects key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
}

std::optional<std::string> ConfigDocument::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return unquote(it->second);
}

std::optional<double> ConfigDocument::get_double(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return to_double(it->second, key);
}

std::optional<long long> ConfigDocument::get_int(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  long long value = 0;
  const auto t = unquote(it->second);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw UsageError("config key '" + key + "': expected an integer, got '" + it->second + "'");
  return value;
}

std::optional<bool> ConfigDocument::get_bool(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  const auto v = unquote(it->second);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config key '" + key + "': expected true or false, got '" + it->second + "'");
}

std::optional<std::vector<double>> ConfigDocument::get_double_list(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  std::string v = trim(it->second);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<double> out;
  std::stringstream items(v);
  std::string item;
  while (std::getline(items, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(to_double(item, key));
  }
  return out;
}

std::vector<std::string> ConfigDocument::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

std::vector<std::string> ConfigDocument::unknown_keys(const std::vector<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
  return out;
}

}  // namespace psd
