// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ccub {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad command line or malformed request.
class UsageError : public Error {
public:
    using Error::Error;
};

/// One broken rule on one field. `index` is the record position when the
/// violation comes from a manifest, otherwise -1.
struct Violation {
    long index = -1;
    std::string field;
    std::string rule;

    std::string to_string() const;
    bool operator==(const Violation&) const = default;
};

/// Input data breaks a documented invariant.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what, std::vector<Violation> violations = {});

    const std::vector<Violation>& violations() const noexcept { return m_violations; }

private:
    std::vector<Violation> m_violations;
};

/// A pipeline step failed at run time (I/O, model failure, non-finite numbers).
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

}  // namespace ccub
