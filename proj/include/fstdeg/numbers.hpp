#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fstdeg {

// Exact arbitrary-precision arithmetic. Block lengths and weighted-product
// values routinely exceed 64 bits, so everything numeric in the library goes
// through these aliases; no floating point anywhere.
using Int = boost::multiprecision::cpp_int;
using Nat = boost::multiprecision::cpp_int;  // non-negative by convention
using Rat = boost::multiprecision::cpp_rational;

inline Int int_gcd(const Int& a, const Int& b) { return boost::multiprecision::gcd(a, b); }
inline Int int_lcm(const Int& a, const Int& b) { return boost::multiprecision::lcm(a, b); }

inline bool is_integer(const Rat& r) { return denominator(r) == 1; }

inline Int rat_floor(const Rat& r) {
    Int q = numerator(r) / denominator(r);
    if (numerator(r) < 0 && q * denominator(r) != numerator(r)) --q;
    return q;
}

// Narrowing helper for counts that must fit in memory (word lengths, state
// counts, loop bounds). Throws instead of silently truncating.
inline std::size_t to_size(const Nat& n, const char* what = "value") {
    if (n < 0 || n > Nat(1) << 48)
        throw std::overflow_error(std::string(what) + " out of addressable range: " + n.str());
    return static_cast<std::size_t>(n);
}

inline std::string rat_str(const Rat& r) {
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

// Accepts "p/q" or a plain integer, with optional sign on the numerator.
inline Rat parse_rat(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rat(Int(s));
        Int num(s.substr(0, slash));
        Int den(s.substr(slash + 1));
        if (den <= 0) throw std::invalid_argument("denominator must be positive");
        return Rat(num, den);
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed rational: '" + s + "'");
    }
}

}  // namespace fstdeg
