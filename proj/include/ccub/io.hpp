// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace ccub {

using json = nlohmann::json;

std::string read_text_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Canonical document form: sorted keys, two-space indent, LF, trailing newline.
std::string canonical_dump(const json& doc);

json parse_json_file(const std::filesystem::path& path);

}  // namespace ccub
