#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fstdeg {

// All library failures derive from Error so callers can separate domain
// errors from genuine logic bugs (which use assertions / std::logic_error).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed textual input (fst files, seq-specs, weight files, dp files).
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_no(line) {}
    std::size_t line_no;
};

// Structural problems in a machine: missing transitions, unknown states.
struct ValidationError : Error {
    using Error::Error;
};

// An operation was called outside its stated precondition.
struct PreconditionError : Error {
    using Error::Error;
};

// Demand past the end of a provably finite stream.
struct OutputExhaustedError : Error {
    using Error::Error;
};

// A look-ahead run reached a position where no rule applies.
struct StuckError : Error {
    explicit StuckError(std::size_t pos)
        : Error("look-ahead run stuck at input position " + std::to_string(pos)), position(pos) {}
    std::size_t position;
};

// A double product demanded an exponent that is not a natural number.
struct NonNaturalExponentError : Error {
    using Error::Error;
};

// A bounded search (state repetition, period search) ran out of budget.
struct HorizonExhaustedError : Error {
    using Error::Error;
};

// Block decoding hit input that is not of block shape.
struct BlockDecodeError : Error {
    using Error::Error;
};

// No modular period could be exhibited within the search horizon.
struct NotSpirallingError : Error {
    using Error::Error;
};

}  // namespace fstdeg
