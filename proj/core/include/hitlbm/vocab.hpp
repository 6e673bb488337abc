// Copyright 2026 The hitlbm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hitlbm::vocab {

/// Synthetic category tokens are "cat_00", "cat_01", ...
std::string category_token(std::size_t index);

/// Index of a category token, or nullopt if `token` is not one.
std::optional<std::size_t> category_index(std::string_view token);

/// Category tokens appearing in `text`, in order of first appearance, without
/// duplicates.
std::vector<std::string> extract_category_tokens(std::string_view text);

}  // namespace hitlbm::vocab
