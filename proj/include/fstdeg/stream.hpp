#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fstdeg/blockfun.hpp"
#include "fstdeg/error.hpp"
#include "fstdeg/numbers.hpp"
#include "fstdeg/word.hpp"

namespace fstdeg {

// A chunk of identical bits. len == nullopt marks a run that never ends
// (e.g. the tail of u.0^omega). Chunks need not be maximal; consumers
// coalesce. Counting bits in bulk instead of materializing them is what
// keeps blocks like 1 0^(2^56) tractable.
struct Run {
    Bit bit;
    std::optional<Nat> len;  // nullopt = infinite

    bool infinite() const { return !len.has_value(); }
};

// Stateful one-way reader over an infinite (or finite derived) sequence.
// next_run() returns nullopt once a provably finite stream is exhausted.
class Cursor {
public:
    virtual ~Cursor() = default;
    virtual std::optional<Run> next_run() = 0;
};

// Queue of repeated word chunks, drained as runs. rep == nullopt repeats the
// word forever. Both machine runs and double products emit through this, so
// c^k for astronomically large k never materializes.
class SegmentQueue {
public:
    void push(Word w, std::optional<Nat> rep = Nat(1)) {
        if (w.empty() || (rep && *rep == 0)) return;
        segs_.push_back({std::move(w), std::move(rep)});
    }

    bool empty() const { return segs_.empty(); }

    // nullopt if the queue is empty; an infinite Run if the front segment is
    // a uniform word repeating forever.
    std::optional<Run> next_run() {
        if (segs_.empty()) return std::nullopt;
        Segment& seg = segs_.front();
        const Word& w = seg.word;
        if (pos_ == 0 && w.all(w[0])) {
            Bit b = w[0];
            if (!seg.rep) return Run{b, std::nullopt};  // constant forever
            Nat total = Nat(w.size()) * *seg.rep;
            segs_.pop_front();
            return Run{b, total};
        }
        Bit b = w[pos_];
        std::size_t end = pos_;
        while (end < w.size() && w[end] == b) ++end;
        Nat len = Nat(end - pos_);
        pos_ = end;
        if (pos_ == w.size()) {
            pos_ = 0;
            if (seg.rep && --*seg.rep == 0) segs_.pop_front();
        }
        return Run{b, len};
    }

private:
    struct Segment {
        Word word;
        std::optional<Nat> rep;
    };
    std::deque<Segment> segs_;
    std::size_t pos_ = 0;
};

struct FamilyUltimatelyPeriodic {
    Word u, v;  // u . v^omega, v nonempty
};
struct FamilyBlocks {
    BlockFun f;
};
struct FamilyBuiltin {
    std::string name;
};
struct FamilyDerived {};

using Family = std::variant<FamilyUltimatelyPeriodic, FamilyBlocks, FamilyBuiltin, FamilyDerived>;

// An immutable description of an infinite binary sequence. Evaluation is
// pure: every cursor() starts an independent read from position 0, so
// streams are safe to share across threads read-only.
class Stream {
public:
    using CursorFactory = std::function<std::unique_ptr<Cursor>()>;

    Stream() = default;
    Stream(Family family, CursorFactory make)
        : family_(std::make_shared<Family>(std::move(family))), make_(std::move(make)) {}

    std::unique_ptr<Cursor> cursor() const { return make_(); }
    const Family& family() const { return *family_; }

    template <typename F>
    const F* family_as() const {
        return std::get_if<F>(family_.get());
    }

private:
    std::shared_ptr<Family> family_;
    CursorFactory make_;
};

namespace detail {

class UpCursor : public Cursor {
public:
    UpCursor(Word u, Word v) : u_(std::move(u)), v_(std::move(v)) {}

    std::optional<Run> next_run() override {
        Bit b = bit_at(pos_);
        if (pos_ >= Nat(u_.size()) && v_.all(b)) return Run{b, std::nullopt};
        Nat n = 1;
        while (true) {
            Bit nb = bit_at(pos_ + n);
            if (nb != b) break;
            ++n;
            // a maximal run inside u.v^omega is bounded unless v is uniform
            if (pos_ + n >= Nat(u_.size()) && v_.all(nb)) return finish(b, std::nullopt);
        }
        return finish(b, n);
    }

private:
    std::optional<Run> finish(Bit b, std::optional<Nat> n) {
        if (n) pos_ += *n;
        return Run{b, std::move(n)};
    }
    Bit bit_at(const Nat& i) const { return u_.up_bit(v_, i); }

    Word u_, v_;
    Nat pos_ = 0;
};

class BlocksCursor : public Cursor {
public:
    explicit BlocksCursor(BlockFun f) : f_(std::move(f)) {}

    std::optional<Run> next_run() override {
        if (ones_pending_) {
            // the 1 of the current block plus one per following empty block;
            // capped so a tail of empty blocks still makes progress
            Nat ones = 1;
            while (ones < (1u << 16) && f_(block_ + ones - 1) == 0) ++ones;
            if (ones == (1u << 16)) {  // emit only the confirmed-empty blocks
                block_ += ones - 1;
                return Run{1, ones - 1};
            }
            block_ += ones - 1;
            ones_pending_ = false;
            return Run{1, ones};
        }
        Nat z = f_(block_);  // nonzero: empty blocks were folded above
        ++block_;
        ones_pending_ = true;
        return Run{0, z};
    }

private:
    BlockFun f_;
    Nat block_ = 0;
    bool ones_pending_ = true;
};

class FnBitCursor : public Cursor {
public:
    explicit FnBitCursor(std::function<Bit(const Nat&)> f) : f_(std::move(f)) {}

    std::optional<Run> next_run() override {
        Bit b = f_(pos_);
        Nat n = 1;
        while (n < 64 && f_(pos_ + n) == b) ++n;
        pos_ += n;
        return Run{b, n};
    }

private:
    std::function<Bit(const Nat&)> f_;
    Nat pos_ = 0;
};

class SkipCursor : public Cursor {
public:
    SkipCursor(std::unique_ptr<Cursor> inner, Nat skip)
        : inner_(std::move(inner)), skip_(std::move(skip)) {}

    std::optional<Run> next_run() override {
        while (skip_ > 0) {
            auto r = inner_->next_run();
            if (!r) return std::nullopt;
            if (r->infinite()) return Run{r->bit, std::nullopt};
            if (*r->len > skip_) {
                Run rest{r->bit, *r->len - skip_};
                skip_ = 0;
                return rest;
            }
            skip_ -= *r->len;
        }
        return inner_->next_run();
    }

private:
    std::unique_ptr<Cursor> inner_;
    Nat skip_;
};

}  // namespace detail

inline Bit thue_morse_bit(const Nat& n) {
    Nat m = n;
    int parity = 0;
    while (m > 0) {
        m &= m - 1;
        parity ^= 1;
    }
    return static_cast<Bit>(parity);
}

inline Bit period_doubling_bit(const Nat& n) {
    Nat r = n + 1;
    unsigned tz = boost::multiprecision::lsb(r);  // 2-adic valuation of n+1
    return static_cast<Bit>((tz + 1) & 1);
}

inline Stream up_stream(Word u, Word v) {
    if (v.empty()) throw PreconditionError("ultimately periodic stream needs a nonempty period");
    FamilyUltimatelyPeriodic fam{u, v};
    return Stream(fam, [u = std::move(u), v = std::move(v)] {
        return std::make_unique<detail::UpCursor>(u, v);
    });
}

// The block encoding <f> = 1 0^f(0) 1 0^f(1) ...
inline Stream blocks_encode(BlockFun f) {
    FamilyBlocks fam{f};
    return Stream(fam, [f = std::move(f)] { return std::make_unique<detail::BlocksCursor>(f); });
}

inline Stream builtin_stream(const std::string& name) {
    std::function<Bit(const Nat&)> gen;
    if (name == "thue-morse")
        gen = thue_morse_bit;
    else if (name == "period-doubling")
        gen = period_doubling_bit;
    else
        throw ParseError("unknown builtin sequence: '" + name + "'");
    return Stream(FamilyBuiltin{name},
                  [gen = std::move(gen)] { return std::make_unique<detail::FnBitCursor>(gen); });
}

inline Stream derived_stream(Stream::CursorFactory make) {
    return Stream(FamilyDerived{}, std::move(make));
}

// result(n) = s(n + k), at the bit level. Ultimately periodic metadata is
// closed under shifting and is recomputed; other families become Derived.
inline Stream shift_stream(const Stream& s, const Nat& k) {
    if (k == 0) return s;
    if (const auto* up = s.family_as<FamilyUltimatelyPeriodic>()) {
        if (k < Nat(up->u.size())) return up_stream(up->u.drop(to_size(k)), up->v);
        Nat off = (k - Nat(up->u.size())) % Nat(up->v.size());
        std::size_t o = to_size(off);
        Word rot = up->v.drop(o) + up->v.prefix(o);
        return up_stream(Word(), rot);
    }
    return derived_stream([s, k] { return std::make_unique<detail::SkipCursor>(s.cursor(), k); });
}

// First n bits. Throws OutputExhaustedError if the stream ends first.
inline Word prefix(const Stream& s, std::size_t n) {
    Word out;
    auto cur = s.cursor();
    while (out.size() < n) {
        auto r = cur->next_run();
        if (!r) throw OutputExhaustedError("stream ended after " + std::to_string(out.size()) +
                                           " bits, " + std::to_string(n) + " demanded");
        Nat want = Nat(n - out.size());
        Nat take = r->infinite() ? want : (*r->len < want ? *r->len : want);
        std::size_t t = to_size(take);
        for (std::size_t i = 0; i < t; ++i) out.push_back(r->bit);
    }
    return out;
}

// Position of the first difference within the first n bits, if any.
// Run-aware, so comparing streams with astronomically long runs is cheap.
inline std::optional<Nat> first_difference(const Stream& a, const Stream& b, const Nat& n) {
    auto ca = a.cursor();
    auto cb = b.cursor();
    Nat pos = 0;
    std::optional<Run> ra, rb;
    while (pos < n) {
        if (!ra || (!ra->infinite() && *ra->len == 0)) {
            ra = ca->next_run();
            if (!ra) throw OutputExhaustedError("left stream ended at bit " + pos.str());
        }
        if (!rb || (!rb->infinite() && *rb->len == 0)) {
            rb = cb->next_run();
            if (!rb) throw OutputExhaustedError("right stream ended at bit " + pos.str());
        }
        if (ra->bit != rb->bit) return pos;
        if (ra->infinite() && rb->infinite()) return std::nullopt;  // both constant forever
        Nat remaining = n - pos;
        Nat step = remaining;
        if (!ra->infinite() && *ra->len < step) step = *ra->len;
        if (!rb->infinite() && *rb->len < step) step = *rb->len;
        if (!ra->infinite()) *ra->len -= step;
        if (!rb->infinite()) *rb->len -= step;
        pos += step;
    }
    return std::nullopt;
}

inline bool streams_equal(const Stream& a, const Stream& b, const Nat& nbits) {
    return !first_difference(a, b, nbits).has_value();
}

// Inverse of blocks_encode on a prefix: the first n_blocks block lengths.
// A block value is reported only once the following 1 has been seen.
inline std::vector<Nat> blocks_decode(const Stream& s, std::size_t n_blocks) {
    std::vector<Nat> out;
    if (n_blocks == 0) return out;
    auto cur = s.cursor();
    bool open = false;  // a block's leading 1 has been read
    Nat zeros = 0;
    while (out.size() < n_blocks) {
        auto r = cur->next_run();
        if (!r)
            throw BlockDecodeError("insufficient input: stream ended inside block " +
                                   std::to_string(out.size()));
        if (r->bit == 0) {
            if (!open) throw BlockDecodeError("malformed prefix: block stream must start with 1");
            if (r->infinite())
                throw BlockDecodeError("insufficient input: block " + std::to_string(out.size()) +
                                       " never terminates (all zeros from here)");
            zeros += *r->len;
        } else {
            // L ones terminate the open block (if any) and then L-1 empty
            // blocks; the last 1 leaves a block open
            Nat ones = r->infinite() ? Nat(n_blocks - out.size() + 2) : *r->len;
            if (open) {
                out.push_back(zeros);
                zeros = 0;
            }
            for (Nat k = 1; k < ones && out.size() < n_blocks; ++k) out.push_back(0);
            open = true;
        }
    }
    out.resize(n_blocks);
    return out;
}

// Decides u1.v1^omega = u2.v2^omega by comparing prefixes of length
// max(|u1|,|u2|) + lcm(|v1|,|v2|), which is sound for periodic tails.
inline bool up_equal(const Word& u1, const Word& v1, const Word& u2, const Word& v2) {
    if (v1.empty() || v2.empty()) throw PreconditionError("up_equal: periods must be nonempty");
    Nat bound = Nat(std::max(u1.size(), u2.size())) +
                int_lcm(Nat(v1.size()), Nat(v2.size()));
    for (Nat i = 0; i < bound; ++i)
        if (u1.up_bit(v1, i) != u2.up_bit(v2, i)) return false;
    return true;
}

// --- sequence-spec mini-language ------------------------------------------
//
//   up <u> <v> | blocks poly <c0> <c1> ... | blocks exp <base> [scale]
//   | blocks floordiv <d> | builtin thue-morse | builtin period-doubling
// with optional trailing "shift <k>". For blocks the shift applies to the
// function (S^k f); for up/builtin it shifts bits.

inline std::vector<std::string> split_tokens(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> toks;
    std::string t;
    while (is >> t) {
        if (t[0] == '#') break;
        toks.push_back(t);
    }
    return toks;
}

inline Nat parse_nat(const std::string& s, const char* what = "number") {
    try {
        Nat n(s);
        if (n < 0) throw std::invalid_argument("negative");
        return n;
    } catch (const std::exception&) {
        throw ParseError(std::string("malformed ") + what + ": '" + s + "'");
    }
}

inline Stream parse_seq_spec(const std::string& spec) {
    auto toks = split_tokens(spec);
    if (toks.empty()) throw ParseError("empty sequence spec");

    Nat shift = 0;
    if (toks.size() >= 2 && toks[toks.size() - 2] == "shift") {
        shift = parse_nat(toks.back(), "shift");
        toks.resize(toks.size() - 2);
    }
    if (toks.empty()) throw ParseError("empty sequence spec");

    if (toks[0] == "up") {
        if (toks.size() != 3) throw ParseError("usage: up <u> <v>");
        Stream s = up_stream(parse_word_or_dash(toks[1]), Word(toks[2]));
        return shift_stream(s, shift);
    }
    if (toks[0] == "builtin") {
        if (toks.size() != 2) throw ParseError("usage: builtin <name>");
        return shift_stream(builtin_stream(toks[1]), shift);
    }
    if (toks[0] == "blocks") {
        if (toks.size() < 2) throw ParseError("usage: blocks <family> ...");
        BlockFun f = [&] {
            if (toks[1] == "poly") {
                if (toks.size() < 3) throw ParseError("blocks poly needs coefficients");
                std::vector<Nat> cs;
                for (std::size_t i = 2; i < toks.size(); ++i)
                    cs.push_back(parse_nat(toks[i], "coefficient"));
                return BlockFun::polynomial(std::move(cs));
            }
            if (toks[1] == "exp") {
                if (toks.size() == 3) return BlockFun::exponential(parse_nat(toks[2], "base"));
                if (toks.size() == 4)
                    return BlockFun::exponential(parse_nat(toks[2], "base"),
                                                 parse_nat(toks[3], "scale"));
                throw ParseError("usage: blocks exp <base> [scale]");
            }
            if (toks[1] == "floordiv") {
                if (toks.size() != 3) throw ParseError("usage: blocks floordiv <d>");
                return BlockFun::floor_div(parse_nat(toks[2], "divisor"));
            }
            throw ParseError("unknown blocks family: '" + toks[1] + "'");
        }();
        return blocks_encode(f.shifted(shift));
    }
    throw ParseError("unknown sequence spec: '" + toks[0] + "'");
}

// The BlockFun behind a "blocks ..." spec; errors for other families.
inline BlockFun parse_blockfun_spec(const std::string& spec) {
    Stream s = parse_seq_spec(spec);
    if (const auto* b = s.family_as<FamilyBlocks>()) return b->f;
    throw ParseError("spec does not describe a block-encoded sequence: '" + spec + "'");
}

}  // namespace fstdeg
