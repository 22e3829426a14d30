// Copyright 2026 The qsynth Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qsynth {

// Decodes UTF-8 into Unicode scalar values. Malformed sequences decode to
// U+FFFD, one replacement per offending byte.
std::u32string DecodeUtf8(std::string_view text);

// Returns false if `text` contains a malformed sequence.
bool IsValidUtf8(std::string_view text);

void AppendUtf8(std::string& out, char32_t scalar);
std::string EncodeUtf8(std::u32string_view scalars);

// Splits into one UTF-8 string per scalar value.
std::vector<std::string> SplitScalars(std::string_view text);

std::string_view TrimWhitespace(std::string_view text);

// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> SplitWhitespace(std::string_view text);

}  // namespace qsynth
