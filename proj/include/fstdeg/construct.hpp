#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fstdeg/error.hpp"
#include "fstdeg/fst.hpp"
#include "fstdeg/numbers.hpp"
#include "fstdeg/weights.hpp"
#include "fstdeg/word.hpp"

namespace fstdeg {

// The block-level operations that do not change (i-iii) or may lower (iv-v)
// the degree of <f>, each realised by an explicit machine.
struct ScaleUp {
    Nat a;  // <f> -> <a f>, a > 0
};
struct ScaleDown {
    Nat a;  // <a f> -> <f>, a > 0
};
struct XShiftDrop {
    Nat a;  // <f> -> <S^a f>: remove the first a blocks
};
struct XShiftPrepend {
    std::vector<Nat> lengths;  // <f> -> <table lengths, then f>
};
struct YShiftAdd {
    Nat a;  // <f> -> <f + a>: append 0^a to every block
};
struct YShiftSub {
    Nat a;  // <f + a> -> <f>: remove 0^a from every block; underflow traps
};
struct SubsampleBlocks {
    Nat a;  // <f> -> <f(an)>, a > 0
};
struct MergePair {
    Nat a, b;  // <f> -> <a f(2n) + b f(2n+1)>
};

using BasicOp = std::variant<ScaleUp, ScaleDown, XShiftDrop, XShiftPrepend, YShiftAdd, YShiftSub,
                             SubsampleBlocks, MergePair>;

// The weighted-product transducer: reads <f>, writes <alphas (.) f> whenever
// the weighted product is natural. States q_{i,j}^h track the current
// weight i, the coefficient j being applied, and a zero debt/credit h
// against the common denominator d_i; each input zero pays in a_{i,j} and
// every full d_i buys one output zero. Weights must be normalized to
// a_{i,j}/d_i, b_i/d_i with natural a_{i,j}; each weight needs arity >= 1.
inline Fst build_wprod_fst(const WeightTuple& alphas, std::size_t word_guard = (1u << 20)) {
    std::size_t m = alphas.size();
    std::vector<Int> d(m), b(m);
    std::vector<std::vector<Nat>> a(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Weight& w = alphas[i];
        if (w.arity() == 0)
            throw PreconditionError("weighted-product machine needs arity >= 1 in every weight");
        Int di = 1;
        for (const Rat& c : w.coeffs()) di = int_lcm(di, denominator(c));
        di = int_lcm(di, denominator(w.offset()));
        d[i] = di;
        for (const Rat& c : w.coeffs()) {
            Int ai = numerator(c) * (di / denominator(c));
            if (ai < 0) throw PreconditionError("weight coefficients must be non-negative");
            a[i].push_back(ai);
        }
        b[i] = numerator(w.offset()) * (di / denominator(w.offset()));
    }

    Fst fst;
    fst.set_name("wprod");
    // state q_{i,j}^h with min(0, b_i) <= h < d_i
    auto lo = [&](std::size_t i) { return b[i] < 0 ? b[i] : Int(0); };
    std::vector<std::vector<StateId>> base(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            base[i].push_back(static_cast<StateId>(fst.state_count()));
            for (Int h = lo(i); h < d[i]; ++h)
                fst.add_state("q" + std::to_string(i) + "." + std::to_string(j) + ".h" + h.str());
        }
    auto id = [&](std::size_t i, std::size_t j, const Int& h) {
        return static_cast<StateId>(base[i][j] + to_size(Nat(h - lo(i))));
    };
    auto clamped_div = [](const Int& x, const Int& den) { return x >= 0 ? x / den : Int(0); };

    for (std::size_t i = 0; i < m; ++i) {
        std::size_t k = a[i].size();
        for (std::size_t j = 0; j < k; ++j)
            for (Int h = lo(i); h < d[i]; ++h) {
                StateId q = id(i, j, h);
                // zero: pay a_{i,j} into the debt, emit every full d_i
                Int e0 = clamped_div(h + a[i][j], d[i]);
                Int h0 = h + a[i][j] - e0 * d[i];
                if (e0 > Int(word_guard))
                    throw HorizonExhaustedError("weighted-product machine output word too large");
                fst.set_transition(q, 0, id(i, j, h0), Word::zeros(to_size(Nat(e0))));
                // one: next coefficient, or close the block and open the next
                if (j + 1 < k) {
                    fst.set_transition(q, 1, id(i, j + 1, h), Word());
                } else {
                    std::size_t ni = (i + 1) % m;
                    Int e1 = clamped_div(b[ni], d[ni]);
                    Int h1 = b[ni] - e1 * d[ni];
                    if (e1 > Int(word_guard))
                        throw HorizonExhaustedError("weighted-product machine output word too large");
                    fst.set_transition(q, 1, id(ni, 0, h1),
                                       Word("1") + Word::zeros(to_size(Nat(e1))));
                }
            }
    }
    fst.set_initial(id(m - 1, a[m - 1].size() - 1, Int(0)));
    validate(fst);
    return fst;
}

// The m-state cyclic machine that expands blocks into patterns: reading the
// double product of exponents as 1 0^e blocks, state e_j turns each zero
// into c_j and each block boundary into the next p.
inline Fst build_block_expander(const std::vector<Word>& ps, const std::vector<Word>& cs) {
    if (ps.size() != cs.size() || ps.empty())
        throw PreconditionError("expander needs matching nonempty p and c tuples");
    std::size_t m = ps.size();
    Fst fst;
    fst.set_name("expander");
    for (std::size_t j = 0; j < m; ++j) fst.add_state("e" + std::to_string(j));
    for (std::size_t j = 0; j < m; ++j) {
        fst.set_transition(static_cast<StateId>(j), 0, static_cast<StateId>(j), cs[j]);
        std::size_t nj = (j + 1) % m;
        fst.set_transition(static_cast<StateId>(j), 1, static_cast<StateId>(nj), ps[nj]);
    }
    fst.set_initial(static_cast<StateId>(m - 1));
    validate(fst);
    return fst;
}

namespace detail {

inline Fst build_scale_up(const Nat& a) {
    if (a < 1) throw PreconditionError("scale-up needs a > 0");
    Fst m;
    m.set_name("scale-up-" + a.str());
    StateId q = m.add_state("q0");
    m.set_initial(q);
    m.set_transition(q, 0, q, Word::zeros(to_size(a)));
    m.set_transition(q, 1, q, Word("1"));
    return m;
}

inline Fst build_scale_down(const Nat& a) {
    if (a < 1) throw PreconditionError("scale-down needs a > 0");
    std::size_t n = to_size(a);
    Fst m;
    m.set_name("scale-down-" + a.str());
    for (std::size_t j = 0; j < n; ++j) m.add_state("z" + std::to_string(j));
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t nj = (j + 1) % n;
        m.set_transition(static_cast<StateId>(j), 0, static_cast<StateId>(nj),
                         nj == 0 ? Word("0") : Word());
        m.set_transition(static_cast<StateId>(j), 1, 0, Word("1"));
    }
    m.set_initial(0);
    return m;
}

inline Fst build_xshift_drop(const Nat& a) {
    std::size_t n = to_size(a);
    Fst m;
    m.set_name("xshift-drop-" + a.str());
    for (std::size_t j = 0; j <= n; ++j) m.add_state("w" + std::to_string(j));
    StateId copy = m.add_state("copy");
    for (std::size_t j = 0; j <= n; ++j) {
        StateId q = static_cast<StateId>(j);
        m.set_transition(q, 0, q, Word());
        if (j < n)
            m.set_transition(q, 1, static_cast<StateId>(j + 1), Word());
        else
            m.set_transition(q, 1, copy, Word("1"));
    }
    m.set_transition(copy, 0, copy, Word("0"));
    m.set_transition(copy, 1, copy, Word("1"));
    m.set_initial(0);
    return m;
}

inline Fst build_xshift_prepend(const std::vector<Nat>& lengths, std::size_t word_guard) {
    Word pre;
    for (const Nat& l : lengths) {
        if (Nat(pre.size()) + l + 1 > Nat(word_guard))
            throw HorizonExhaustedError("prepend prefix too large to materialize");
        pre.push_back(1);
        pre.append(Word::zeros(to_size(l)));
    }
    Fst m;
    m.set_name("xshift-prepend-" + std::to_string(lengths.size()));
    StateId start = m.add_state("start");
    StateId copy = m.add_state("copy");
    m.set_transition(start, 0, copy, pre + Word("0"));
    m.set_transition(start, 1, copy, pre + Word("1"));
    m.set_transition(copy, 0, copy, Word("0"));
    m.set_transition(copy, 1, copy, Word("1"));
    m.set_initial(start);
    return m;
}

inline Fst build_yshift_add(const Nat& a) {
    Fst m;
    m.set_name("yshift-add-" + a.str());
    StateId q = m.add_state("q0");
    m.set_initial(q);
    m.set_transition(q, 0, q, Word("0"));
    // pad at the front of the zero run: 1 0^a 0^f(n) = 1 0^(f(n)+a)
    m.set_transition(q, 1, q, Word("1") + Word::zeros(to_size(a)));
    return m;
}

inline Fst build_yshift_sub(const Nat& a) {
    std::size_t n = to_size(a);
    Fst m;
    m.set_name("yshift-sub-" + a.str());
    for (std::size_t j = 0; j <= n; ++j) m.add_state("s" + std::to_string(j));
    StateId copy = static_cast<StateId>(n);
    m.set_initial(copy);
    m.set_transition(copy, 0, copy, Word("0"));
    m.set_transition(copy, 1, static_cast<StateId>(0), Word("1"));
    if (n > 0) {
        // a block with fewer than a zeros falls into the silent trap; runs
        // then surface it as exhausted output
        StateId trap = m.add_state("underflow");
        m.set_transition(trap, 0, trap, Word());
        m.set_transition(trap, 1, trap, Word());
        for (std::size_t j = 0; j < n; ++j) {
            m.set_transition(static_cast<StateId>(j), 0, static_cast<StateId>(j + 1), Word());
            m.set_transition(static_cast<StateId>(j), 1, trap, Word());
        }
    }
    return m;
}

inline Fst build_subsample(const Nat& a) {
    if (a < 1) throw PreconditionError("subsample needs a > 0");
    std::size_t n = to_size(a);
    Fst m;
    m.set_name("subsample-" + a.str());
    for (std::size_t j = 0; j < n; ++j) m.add_state("c" + std::to_string(j));
    for (std::size_t j = 0; j < n; ++j) {
        StateId q = static_cast<StateId>(j);
        m.set_transition(q, 0, q, j == 0 ? Word("0") : Word());
        std::size_t nj = (j + 1) % n;
        m.set_transition(q, 1, static_cast<StateId>(nj), nj == 0 ? Word("1") : Word());
    }
    m.set_initial(static_cast<StateId>(n - 1));
    return m;
}

}  // namespace detail

inline Fst build_basic(const BasicOp& op, std::size_t word_guard = (1u << 20)) {
    Fst m = std::visit(
        [&](const auto& o) -> Fst {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, ScaleUp>) return detail::build_scale_up(o.a);
            if constexpr (std::is_same_v<T, ScaleDown>) return detail::build_scale_down(o.a);
            if constexpr (std::is_same_v<T, XShiftDrop>) return detail::build_xshift_drop(o.a);
            if constexpr (std::is_same_v<T, XShiftPrepend>)
                return detail::build_xshift_prepend(o.lengths, word_guard);
            if constexpr (std::is_same_v<T, YShiftAdd>) return detail::build_yshift_add(o.a);
            if constexpr (std::is_same_v<T, YShiftSub>) return detail::build_yshift_sub(o.a);
            if constexpr (std::is_same_v<T, SubsampleBlocks>) return detail::build_subsample(o.a);
            if constexpr (std::is_same_v<T, MergePair>) {
                Fst w = build_wprod_fst(
                    WeightTuple({Weight({Rat(o.a), Rat(o.b)}, Rat(0))}), word_guard);
                w.set_name("merge-pair-" + o.a.str() + "-" + o.b.str());
                return w;
            }
        },
        op);
    validate(m);
    return m;
}

// Parses "scale-up 2", "xshift-prepend 0 1 4", "merge-pair 1 2", ...
inline BasicOp parse_basic_op(const std::vector<std::string>& toks) {
    if (toks.empty()) throw ParseError("empty basic-op spec");
    const std::string& kind = toks[0];
    auto need = [&](std::size_t n) {
        if (toks.size() != n + 1)
            throw ParseError("basic op '" + kind + "' takes " + std::to_string(n) + " argument(s)");
    };
    if (kind == "scale-up") {
        need(1);
        return ScaleUp{parse_nat(toks[1])};
    }
    if (kind == "scale-down") {
        need(1);
        return ScaleDown{parse_nat(toks[1])};
    }
    if (kind == "xshift-drop") {
        need(1);
        return XShiftDrop{parse_nat(toks[1])};
    }
    if (kind == "xshift-prepend") {
        std::vector<Nat> ls;
        for (std::size_t i = 1; i < toks.size(); ++i) ls.push_back(parse_nat(toks[i]));
        return XShiftPrepend{std::move(ls)};
    }
    if (kind == "yshift-add") {
        need(1);
        return YShiftAdd{parse_nat(toks[1])};
    }
    if (kind == "yshift-sub") {
        need(1);
        return YShiftSub{parse_nat(toks[1])};
    }
    if (kind == "subsample") {
        need(1);
        return SubsampleBlocks{parse_nat(toks[1])};
    }
    if (kind == "merge-pair") {
        need(2);
        return MergePair{parse_nat(toks[1]), parse_nat(toks[2])};
    }
    throw ParseError("unknown basic op: '" + kind + "'");
}

}  // namespace fstdeg
