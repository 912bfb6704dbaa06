#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fstdeg/blockfun.hpp"
#include "fstdeg/construct.hpp"
#include "fstdeg/error.hpp"
#include "fstdeg/fst.hpp"
#include "fstdeg/numbers.hpp"
#include "fstdeg/stream.hpp"
#include "fstdeg/weights.hpp"

namespace fstdeg {

// Exact rational-coefficient polynomials, for the symbolic side of the
// degree pipelines (affine composition, sums, scaling).
class Polynomial {
public:
    explicit Polynomial(std::vector<Rat> cs) : cs_(std::move(cs)) {
        while (cs_.size() > 1 && cs_.back() == 0) cs_.pop_back();
        if (cs_.empty()) cs_.push_back(Rat(0));
    }

    std::size_t degree() const { return cs_.size() - 1; }
    const std::vector<Rat>& coeffs() const { return cs_; }
    const Rat& leading() const { return cs_.back(); }

    Rat eval(const Rat& x) const {
        Rat acc = 0;
        for (auto it = cs_.rbegin(); it != cs_.rend(); ++it) acc = acc * x + *it;
        return acc;
    }

    // p(a x + b), expanded
    Polynomial compose_affine(const Rat& a, const Rat& b) const {
        std::vector<Rat> acc{Rat(0)};
        for (auto it = cs_.rbegin(); it != cs_.rend(); ++it) {
            std::vector<Rat> next(acc.size() + 1, Rat(0));
            for (std::size_t i = 0; i < acc.size(); ++i) {
                next[i + 1] += acc[i] * a;
                next[i] += acc[i] * b;
            }
            next[0] += *it;
            while (next.size() > 1 && next.back() == 0) next.pop_back();
            acc = std::move(next);
        }
        return Polynomial(std::move(acc));
    }

    Polynomial operator+(const Polynomial& o) const {
        std::vector<Rat> cs(std::max(cs_.size(), o.cs_.size()), Rat(0));
        for (std::size_t i = 0; i < cs_.size(); ++i) cs[i] += cs_[i];
        for (std::size_t i = 0; i < o.cs_.size(); ++i) cs[i] += o.cs_[i];
        return Polynomial(std::move(cs));
    }

    Polynomial scaled(const Rat& s) const {
        std::vector<Rat> cs = cs_;
        for (Rat& c : cs) c *= s;
        return Polynomial(std::move(cs));
    }

    bool natural_coeffs() const {
        for (const Rat& c : cs_)
            if (!is_integer(c) || c < 0) return false;
        return true;
    }

    BlockFun to_blockfun() const {
        if (!natural_coeffs())
            throw PreconditionError("polynomial has non-natural coefficients: " + str());
        std::vector<Nat> cs;
        for (const Rat& c : cs_) cs.push_back(numerator(c));
        return BlockFun::polynomial(std::move(cs));
    }

    std::string str() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < cs_.size(); ++i) {
            if (i) os << " + ";
            os << rat_str(cs_[i]) << "*n^" << i;
        }
        return os.str();
    }

    bool operator==(const Polynomial&) const = default;

private:
    std::vector<Rat> cs_;
};

// The polynomial q with <beta (.) S^n0 p> = <q>: q(n) = b + sum_j a_j *
// p(n0 + nk + j). Degree is preserved (non-negative a_j, one positive).
inline Polynomial poly_transduct_normalize(const Polynomial& p, const Weight& alpha,
                                           const Nat& n0) {
    if (!weight_nonconstant(alpha))
        throw PreconditionError("poly_transduct_normalize needs a non-constant weight");
    Rat k(Nat(alpha.arity()));
    Polynomial q(std::vector<Rat>{alpha.offset()});
    for (std::size_t j = 0; j < alpha.arity(); ++j) {
        if (alpha.coeffs()[j] == 0) continue;
        q = q + p.compose_affine(k, Rat(n0 + Nat(j))).scaled(alpha.coeffs()[j]);
    }
    if (q.degree() != p.degree())
        throw std::logic_error("degree not preserved in polynomial transduct normalization");
    return q;
}

// Single-weight projection: sigma >= <<beta> (.) S^n0 f> where beta pads the
// first non-constant weight into the full window and the machine selects
// every m-th block at that offset.
struct OneWeightProjection {
    Weight beta;
    Nat shift;          // passthrough n0
    std::size_t index;  // which weight was projected
    Fst machine;
};

inline OneWeightProjection one_weight_project(const WeightTuple& alphas, const Nat& n0) {
    std::optional<std::size_t> idx;
    for (std::size_t i = 0; i < alphas.size() && !idx; ++i)
        if (weight_nonconstant(alphas[i])) idx = i;
    if (!idx) throw PreconditionError("all weights constant: nothing to project");
    Weight beta = wprod_unzip(alphas)[*idx];
    Fst machine = compose(build_basic(SubsampleBlocks{Nat(alphas.size())}),
                          build_basic(XShiftDrop{Nat(*idx)}));
    machine.set_name("project-" + std::to_string(*idx) + "-of-" + std::to_string(alphas.size()));
    return {std::move(beta), n0, *idx, std::move(machine)};
}

// --- reduction chains ---------------------------------------------------------

struct ChainStep {
    std::string desc;
    Fst machine;
    BlockFun expected;  // the block function after this step
};

struct StepReport {
    std::string desc;
    std::size_t states;
    bool ok;
    std::vector<Nat> blocks;
};

struct ChainReport {
    std::vector<StepReport> steps;
    std::vector<Nat> final_blocks;
    bool ok = true;
};

// A sequence of machines carrying a source block sequence to a target, with
// the exact intermediate function recorded at every step so each stage is
// verifiable by decoding.
struct ReductionChain {
    std::string description;
    BlockFun source;
    std::vector<ChainStep> steps;

    Fst composed(std::size_t state_budget = (1u << 21)) const {
        if (steps.empty()) return identity_fst();
        Fst acc = steps[0].machine;
        for (std::size_t i = 1; i < steps.size(); ++i)
            acc = compose(steps[i].machine, acc, state_budget);
        acc.set_name(description);
        return acc;
    }

    // Runs the pipeline stage by stage, decoding n_blocks after each machine
    // and comparing against the recorded intermediate function.
    ChainReport verify(std::size_t n_blocks) const {
        ChainReport rep;
        Stream s = blocks_encode(source);
        for (const ChainStep& st : steps) {
            s = run_stream(st.machine, s);
            StepReport sr{st.desc, st.machine.state_count(), true, blocks_decode(s, n_blocks)};
            for (std::size_t n = 0; n < n_blocks && sr.ok; ++n)
                if (sr.blocks[n] != st.expected(Nat(n))) sr.ok = false;
            rep.ok = rep.ok && sr.ok;
            rep.final_blocks = sr.blocks;
            rep.steps.push_back(std::move(sr));
        }
        return rep;
    }
};

// The constructive squares reduction: a machine pipeline carrying
// <a n^2 + b n + c> back to <n^2>. Constants are derived symbolically from
// (a, b); when 2a < b a preliminary subsample by the least d with 2ad >= b
// brings the coefficients into range.
inline ReductionChain squares_chain(const Nat& a, const Nat& b, const Nat& c) {
    if (a < 1) throw PreconditionError("squares_chain needs a >= 1");
    ReductionChain ch{"squares-chain(" + a.str() + "," + b.str() + "," + c.str() + ")",
                      BlockFun::polynomial({c, b, a}),
                      {}};
    Polynomial p({Rat(c), Rat(b), Rat(a)});

    auto push = [&ch](std::string desc, const BasicOp& op, const Polynomial& expect) {
        ch.steps.push_back({std::move(desc), build_basic(op), expect.to_blockfun()});
    };

    p = Polynomial({Rat(0), Rat(b), Rat(a)});
    push("yshift-sub " + c.str(), YShiftSub{c}, p);

    Nat aa = a, bb = b;
    if (2 * aa < bb) {
        Nat d = (bb + 2 * aa - 1) / (2 * aa);  // least d with 2ad >= b
        p = p.compose_affine(Rat(d), Rat(0));
        push("subsample " + d.str(), SubsampleBlocks{d}, p);
        aa *= d * d;
        bb *= d;
    }

    p = p.compose_affine(Rat(1), Rat(1));  // drop one block: P(n+1)
    push("xshift-drop 1", XShiftDrop{1}, p);

    Nat y1 = aa + bb;  // constant coefficient a+b
    p = p + Polynomial({Rat(-Int(y1))});
    push("yshift-sub " + y1.str(), YShiftSub{y1}, p);

    // merge: bb * f(2n) + (2aa - bb) * f(2n+1)
    Nat w2 = 2 * aa - bb;
    Polynomial merged = p.compose_affine(Rat(2), Rat(0)).scaled(Rat(bb)) +
                        p.compose_affine(Rat(2), Rat(1)).scaled(Rat(w2));
    p = merged;
    push("merge-pair " + bb.str() + " " + w2.str(), MergePair{bb, w2}, p);

    Rat y2 = p.coeffs()[0];
    p = p + Polynomial({-y2});
    push("yshift-sub " + rat_str(y2), YShiftSub{numerator(y2)}, p);

    Rat lead = p.leading();  // 8 a^2
    p = p + Polynomial({lead});
    push("yshift-add " + rat_str(lead), YShiftAdd{numerator(lead)}, p);

    p = p.scaled(Rat(1) / lead);  // (n+1)^2
    push("scale-down " + rat_str(lead), ScaleDown{numerator(lead)}, p);

    p = Polynomial({Rat(0), Rat(0), Rat(1)});  // prepend block 0: n^2
    push("xshift-prepend 0", XShiftPrepend{{Nat(0)}}, p);
    return ch;
}

// <2^(nk)> >= <2^(2nk)> by selecting every second block.
inline ReductionChain exp_chain(const Nat& k) {
    if (k < 1) throw PreconditionError("exp_chain needs k >= 1");
    Nat base = Nat(1) << to_size(k);
    ReductionChain ch{"exp-chain(" + k.str() + ")", BlockFun::exponential(base), {}};
    ch.steps.push_back(
        {"subsample 2", build_basic(SubsampleBlocks{2}), BlockFun::exponential(base * base)});
    return ch;
}

// --- growth comparison --------------------------------------------------------

namespace detail {

struct GrowthClass {
    bool exponential;
    Nat key;  // polynomial degree, or exponential base
};

inline GrowthClass growth_of(const BlockFun& f) {
    switch (f.kind()) {
        case BlockFun::Kind::Polynomial:
            return {false, Nat(f.poly_degree())};
        case BlockFun::Kind::Exponential:
            return {true, f.base()};
        case BlockFun::Kind::FloorDiv:
            return {false, 1};
        case BlockFun::Kind::TableThenTail:
            return growth_of(f.tail());
    }
    throw std::logic_error("unreachable");
}

}  // namespace detail

// True iff g grows strictly slower than f (g in o(f)), decided symbolically
// per family pair. This is the hypothesis of the growth criterion only; the
// non-transducibility conclusion is cited, never tested.
inline bool growth_dominates(const BlockFun& f, const BlockFun& g) {
    auto gf = detail::growth_of(f);
    auto gg = detail::growth_of(g);
    if (gf.exponential && !gg.exponential) return true;
    if (!gf.exponential && gg.exponential) return false;
    return gg.key < gf.key;
}

// Semi-decision used to filter pipeline inputs: does the scanned prefix look
// ultimately periodic with some period <= max_period? A candidate counts
// only if its periodic tail covers at least half the prefix to scanning end.
inline bool prefix_looks_ultimately_periodic(const Word& w, std::size_t max_period = 256) {
    for (std::size_t p = 1; p <= max_period && 2 * p < w.size(); ++p) {
        std::size_t bad_end = 0;
        for (std::size_t n = 0; n + p < w.size(); ++n)
            if (w[n] != w[n + p]) bad_end = n + 1;
        if (bad_end <= w.size() / 2) return true;
    }
    return false;
}

}  // namespace fstdeg
