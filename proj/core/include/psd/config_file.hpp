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

#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace psd {

/// Flat key/value document in a TOML subset.
///
/// Supported: `key = value` lines, `[section]` headers (keys become
/// `section.key`), `#` comments, double- or single-quoted strings, integers,
/// floats, booleans and one-line arrays of those. Values keep their source
/// text; typed getters convert on access.
class ConfigDocument {
 public:
  static ConfigDocument parse(std::istream& in, const std::string& source_name);
  static ConfigDocument parse(std::string_view text, const std::string& source_name = "<config>");
  static ConfigDocument load(const std::string& path);

  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  // Raw assignment, e.g. from a `--set key=value` flag.
  void set(const std::string& key, const std::string& raw_value);
  void set_assignment(std::string_view assignment);

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<double>> get_double_list(const std::string& key) const;

  std::vector<std::string> keys() const;
  // Keys not in `known`; used to reject typos.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace psd
