// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace webpilot {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value failed one of its type invariants.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

/// Input text could not be parsed at all (as opposed to parsing into an invalid value).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

} // namespace webpilot
