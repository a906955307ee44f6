// SPDX-License-Identifier: Apache-2.0

#include "ccub/io.hpp"

#include <fstream>
#include <sstream>

#include "ccub/error.hpp"

namespace ccub {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw RuntimeFailure("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        throw RuntimeFailure("read failed: " + path.string());
    }
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw RuntimeFailure("cannot write " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw RuntimeFailure("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string canonical_dump(const json& doc) {
    return doc.dump(2, ' ', false, json::error_handler_t::strict) + "\n";
}

json parse_json_file(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("parse failure in " + path.string() + ": " + e.what());
    }
}

}  // namespace ccub
