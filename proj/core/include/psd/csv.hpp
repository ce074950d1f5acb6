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
#include <string>
#include <string_view>
#include <vector>

namespace psd::csv {

// Minimal RFC 4180 subset: comma separated, optional double-quoted fields
// with "" escapes, no embedded newlines.
std::vector<std::string> split_line(std::string_view line);

// Quotes a field only when it contains a comma or a quote.
std::string escape(std::string_view field);

// Reads the next non-empty line, stripping a trailing '\r'. Returns false at EOF.
bool read_line(std::istream& in, std::string& line, std::size_t& line_number);

}  // namespace psd::csv
