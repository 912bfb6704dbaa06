#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>

#include "fstdeg/error.hpp"
#include "fstdeg/numbers.hpp"

namespace fstdeg {

// The binary alphabet. Bits are plain 0/1 integers; Word is the strong type.
using Bit = std::uint8_t;

// A finite word over {0,1}. Stored as '0'/'1' characters so words print and
// parse directly in the textual formats.
class Word {
public:
    Word() = default;
    explicit Word(std::string bits) : bits_(std::move(bits)) {
        for (char c : bits_)
            if (c != '0' && c != '1') throw ParseError("word contains non-bit character: '" + bits_ + "'");
    }

    static Word single(Bit b) { return Word(std::string(1, b ? '1' : '0')); }
    static Word zeros(std::size_t n) { return Word(std::string(n, '0')); }

    std::size_t size() const { return bits_.size(); }
    bool empty() const { return bits_.empty(); }
    Bit operator[](std::size_t i) const { return bits_[i] == '1' ? 1 : 0; }

    void push_back(Bit b) { bits_.push_back(b ? '1' : '0'); }
    void append(const Word& w) { bits_ += w.bits_; }

    Word operator+(const Word& w) const {
        Word r = *this;
        r.append(w);
        return r;
    }

    Word repeated(std::size_t k) const {
        Word r;
        r.bits_.reserve(bits_.size() * k);
        for (std::size_t i = 0; i < k; ++i) r.bits_ += bits_;
        return r;
    }

    Word prefix(std::size_t n) const { return Word(bits_.substr(0, n)); }
    Word suffix_of_length(std::size_t n) const { return Word(bits_.substr(bits_.size() - n)); }
    Word drop(std::size_t n) const { return Word(bits_.substr(std::min(n, bits_.size()))); }

    bool is_prefix_of(const Word& w) const {
        return bits_.size() <= w.bits_.size() && w.bits_.compare(0, bits_.size(), bits_) == 0;
    }

    bool all(Bit b) const {
        char c = b ? '1' : '0';
        return bits_.find_first_not_of(c) == std::string::npos;
    }

    // Bit at position i of this word continued as the periodic word v^omega.
    // Used by ultimately-periodic comparisons.
    Bit up_bit(const Word& v, const Nat& i) const {
        if (i < Nat(bits_.size())) return (*this)[to_size(i)];
        Nat off = (i - Nat(bits_.size())) % Nat(v.size());
        return v[to_size(off)];
    }

    const std::string& str() const { return bits_; }

    bool operator==(const Word&) const = default;
    auto operator<=>(const Word&) const = default;

private:
    std::string bits_;
};

inline std::ostream& operator<<(std::ostream& os, const Word& w) { return os << w.str(); }

// Textual formats print the empty word as "-".
inline std::string word_or_dash(const Word& w) { return w.empty() ? "-" : w.str(); }
inline Word parse_word_or_dash(const std::string& s) { return s == "-" ? Word() : Word(s); }

}  // namespace fstdeg
