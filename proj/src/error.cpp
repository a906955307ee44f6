// SPDX-License-Identifier: Apache-2.0

#include "ccub/error.hpp"

namespace ccub {

std::string Violation::to_string() const {
    std::string out;
    if (index >= 0) {
        out += "record " + std::to_string(index) + ": ";
    }
    out += field + ": " + rule;
    return out;
}

namespace {

std::string summarize(const std::string& what, const std::vector<Violation>& violations) {
    std::string out = what;
    for (const auto& v : violations) {
        out += "\n  " + v.to_string();
    }
    return out;
}

}  // namespace

ValidationError::ValidationError(const std::string& what, std::vector<Violation> violations)
    : Error(summarize(what, violations)), m_violations(std::move(violations)) {}

}  // namespace ccub
