#pragma once

#include <algorithm>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fstdeg/construct.hpp"
#include "fstdeg/error.hpp"
#include "fstdeg/fst.hpp"
#include "fstdeg/lookahead.hpp"
#include "fstdeg/numbers.hpp"
#include "fstdeg/stream.hpp"
#include "fstdeg/weights.hpp"
#include "fstdeg/word.hpp"

namespace fstdeg {

// The double-product representation of a transduct of a spiralling <f>:
//
//     w . prod_i prod_j  p_j c_j^psi(i,j),   psi(i,j) = (alphas (.) S^n0 f)(mi+j)
//
// Every FST image of <f> has this shape, and after disambiguation it pins
// down the degree of the transduct.
struct DoubleProduct {
    BlockFun f;
    Nat n0;  // shift applied to f
    Word w;  // finite prefix
    WeightTuple alphas;
    std::vector<Word> ps, cs;

    std::size_t m() const { return alphas.size(); }
};

inline void check_shape(const DoubleProduct& dp) {
    if (dp.ps.size() != dp.m() || dp.cs.size() != dp.m() || dp.m() == 0)
        throw PreconditionError("double product needs |alphas| = |p| = |c| >= 1");
}

// psi at flat block index n (n = m*i + j).
inline Rat dp_exponent(const DoubleProduct& dp, const Nat& n) {
    return wprod(dp.alphas, dp.f.shifted(dp.n0), n);
}

inline Nat dp_exponent_nat(const DoubleProduct& dp, const Nat& n) {
    Rat e = dp_exponent(dp, n);
    if (!is_integer(e) || e < 0)
        throw NonNaturalExponentError("non-natural exponent " + rat_str(e) + " at block (" +
                                      (n / Nat(dp.m())).str() + ", " + (n % Nat(dp.m())).str() +
                                      ")");
    return numerator(e);
}

namespace detail {

class DpCursor : public Cursor {
public:
    explicit DpCursor(DoubleProduct dp) : dp_(std::move(dp)) {}

    std::optional<Run> next_run() override {
        std::size_t silent = 0;
        while (true) {
            if (auto r = pending_.next_run()) return r;
            std::size_t j = to_size(n_ % Nat(dp_.m()));
            Nat e = dp_exponent_nat(dp_, n_);
            pending_.push(dp_.ps[j]);
            if (!dp_.cs[j].empty() && e > 0) pending_.push(dp_.cs[j], e);
            ++n_;
            if (dp_.ps[j].empty() && (dp_.cs[j].empty() || e == 0)) {
                if (++silent > (1u << 20))
                    throw HorizonExhaustedError("double product emits nothing over 2^20 blocks");
            } else {
                silent = 0;
            }
        }
    }

private:
    DoubleProduct dp_;
    SegmentQueue pending_;
    Nat n_ = 0;
};

}  // namespace detail

// Lazily emits w . prod p_j c_j^psi(i,j); exponents are demanded on the fly
// and must be natural.
inline Stream dp_emit(const DoubleProduct& dp) {
    check_shape(dp);
    struct WithPrefix : Cursor {
        explicit WithPrefix(const DoubleProduct& d) : w(d.w), inner(d) {}
        std::optional<Run> next_run() override {
            if (pos < w.size()) {
                Bit b = w[pos];
                std::size_t end = pos;
                while (end < w.size() && w[end] == b) ++end;
                Nat len(end - pos);
                pos = end;
                return Run{b, len};
            }
            return inner.next_run();
        }
        Word w;
        std::size_t pos = 0;
        detail::DpCursor inner;
    };
    return derived_stream([dp] { return std::make_unique<WithPrefix>(dp); });
}

// Rotation: peel the first inner factor into w and rotate the tuples.
// dp_emit is unchanged; the f-shift grows by |alpha_0| - 1.
inline DoubleProduct dp_rotate(const DoubleProduct& dp, std::size_t word_guard = (1u << 22)) {
    check_shape(dp);
    Nat e = dp_exponent_nat(dp, 0);
    if (Nat(dp.w.size()) + Nat(dp.ps[0].size()) + e * Nat(dp.cs[0].size()) > Nat(word_guard))
        throw HorizonExhaustedError("rotation prefix too large to materialize");
    DoubleProduct r = dp;
    r.w = dp.w + dp.ps[0] + dp.cs[0].repeated(to_size(e));
    r.n0 = dp.n0 + Nat(dp.alphas[0].arity());
    std::vector<Weight> ws(dp.alphas.weights().begin() + 1, dp.alphas.weights().end());
    ws.push_back(dp.alphas[0]);
    r.alphas = WeightTuple(std::move(ws));
    std::rotate(r.ps.begin(), r.ps.begin() + 1, r.ps.end());
    std::rotate(r.cs.begin(), r.cs.begin() + 1, r.cs.end());
    return r;
}

// gcd merging: from u^omega = v w^omega produce x with u^M v w^N = v x^(aM+bN).
struct MergeResult {
    Word x;
    Nat a, b;
};

inline MergeResult merge_words(const Word& u, const Word& v, const Word& w) {
    if (u.empty() || w.empty()) throw PreconditionError("merge_words needs nonempty u and w");
    if (!up_equal(Word(), u, v, w))
        throw PreconditionError("merge_words precondition violated: u^omega != v w^omega");
    std::size_t d = to_size(int_gcd(Nat(u.size()), Nat(w.size())));
    return {w.suffix_of_length(d), Nat(u.size() / d), Nat(w.size() / d)};
}

// Smallest j (cyclically; j = m-1 wraps to compare against p_0 c_0^omega)
// with c_j^omega = p_{j+1} c_{j+1}^omega. Such a transition ambiguity makes
// block boundaries invisible to an FST.
inline std::optional<std::size_t> find_ambiguity(const DoubleProduct& dp) {
    check_shape(dp);
    for (std::size_t j = 0; j < dp.m(); ++j)
        if (dp.cs[j].empty())
            throw PreconditionError("find_ambiguity requires nonempty cycle words");
    for (std::size_t j = 0; j < dp.m(); ++j) {
        std::size_t nj = (j + 1) % dp.m();
        if (up_equal(Word(), dp.cs[j], dp.ps[nj], dp.cs[nj])) return j;
    }
    return std::nullopt;
}

struct UltimatelyPeriodicVerdict {
    std::string reason;
};

using DisambiguateResult = std::variant<DoubleProduct, UltimatelyPeriodicVerdict>;

// The normalization loop: remove empty cycles, fold constant weights, merge
// transition ambiguities (rotating first when the offending pair wraps
// around), until the representation satisfies
//   (2)  c_j^omega != p_{j+1} c_{j+1}^omega  for all j (cyclically), and
//   (3)  c_j != epsilon and alpha_j non-constant for all j.
// If the factor count reaches 1 with a condition still violated the emitted
// sequence is ultimately periodic and a verdict is returned instead.
// The emitted stream is preserved exactly; prefix-checked before returning.
inline DisambiguateResult disambiguate(const DoubleProduct& input, std::size_t check_bits = 2048) {
    check_shape(input);
    DoubleProduct cur = input;
    std::size_t fuel = 12 * cur.m() + 64;
    while (true) {
        if (fuel-- == 0) throw std::logic_error("disambiguate failed to terminate");
        std::size_t m = cur.m();

        // (a) empty cycle words: the exponent is irrelevant, zero the weight
        bool zeroed = false;
        for (std::size_t h = 0; h < m; ++h)
            if (cur.cs[h].empty() &&
                (weight_nonconstant(cur.alphas[h]) || cur.alphas[h].offset() != 0)) {
                std::vector<Weight> ws = cur.alphas.weights();
                ws[h] = Weight(std::vector<Rat>(ws[h].arity(), Rat(0)), Rat(0));
                cur.alphas = WeightTuple(std::move(ws));
                zeroed = true;
            }
        if (zeroed) continue;

        // (b) constant weight: its block expansion is fixed, fold it into
        // the following factor's p
        std::optional<std::size_t> consth;
        for (std::size_t h = 0; h < m && !consth; ++h)
            if (!weight_nonconstant(cur.alphas[h])) consth = h;
        if (consth) {
            if (m == 1)
                return UltimatelyPeriodicVerdict{"single factor with constant weight"};
            if (*consth == m - 1) {
                cur = dp_rotate(cur);
                continue;
            }
            std::size_t h = *consth;
            Nat e = 0;
            if (!cur.cs[h].empty()) {
                const Rat& off = cur.alphas[h].offset();
                if (!is_integer(off) || off < 0)
                    throw NonNaturalExponentError("constant weight with non-natural expansion " +
                                                  rat_str(off));
                e = numerator(off);
            }
            std::vector<Weight> ws = cur.alphas.weights();
            std::vector<Rat> cs(ws[h].arity(), Rat(0));
            for (const Rat& c : ws[h + 1].coeffs()) cs.push_back(c);
            Weight merged(std::move(cs), ws[h + 1].offset());
            Word newp = cur.ps[h] + cur.cs[h].repeated(to_size(e)) + cur.ps[h + 1];
            Word newc = cur.cs[h + 1];
            ws[h] = std::move(merged);
            ws.erase(ws.begin() + h + 1);
            cur.alphas = WeightTuple(std::move(ws));
            cur.ps[h] = std::move(newp);
            cur.ps.erase(cur.ps.begin() + h + 1);
            cur.cs[h] = std::move(newc);
            cur.cs.erase(cur.cs.begin() + h + 1);
            continue;
        }

        // (c) transition ambiguity: merge the pair via the gcd word
        auto amb = find_ambiguity(cur);
        if (amb) {
            if (m == 1)
                return UltimatelyPeriodicVerdict{"p_0 c_0^omega coincides with c_0^omega"};
            if (*amb == m - 1) {
                cur = dp_rotate(cur);
                continue;
            }
            std::size_t h = *amb;
            MergeResult mr = merge_words(cur.cs[h], cur.ps[h + 1], cur.cs[h + 1]);
            std::vector<Weight> ws = cur.alphas.weights();
            std::vector<Rat> cs;
            for (const Rat& c : ws[h].coeffs()) cs.push_back(Rat(mr.a) * c);
            for (const Rat& c : ws[h + 1].coeffs()) cs.push_back(Rat(mr.b) * c);
            Weight merged(std::move(cs),
                          Rat(mr.a) * ws[h].offset() + Rat(mr.b) * ws[h + 1].offset());
            Word newp = cur.ps[h] + cur.ps[h + 1];
            ws[h] = std::move(merged);
            ws.erase(ws.begin() + h + 1);
            cur.alphas = WeightTuple(std::move(ws));
            cur.ps[h] = std::move(newp);
            cur.ps.erase(cur.ps.begin() + h + 1);
            cur.cs[h] = mr.x;
            cur.cs.erase(cur.cs.begin() + h + 1);
            continue;
        }
        break;
    }
    if (check_bits > 0 && !streams_equal(dp_emit(input), dp_emit(cur), Nat(check_bits)))
        throw std::logic_error("disambiguate changed the emitted stream");
    return cur;
}

// --- extraction of a double product from a machine ---------------------------

struct TransductExtraction {
    DoubleProduct dp;
    std::vector<StateId> state_trace;  // state before each block, 0..n0+m
    Nat z;                             // Z(T)
    Nat n0;
    Nat m;
};

// Runs T over <f> block by block, finds a state repetition compatible with
// the modular period of f, and assembles the double product using the
// pumping decomposition at each position. cert must cover modulus Z(T).
inline TransductExtraction extract_transduct(const Fst& t, const BlockFun& f,
                                             const SpirallingCertificate& cert,
                                             std::size_t safety = 4) {
    validate(t);
    Nat q_count(t.state_count());
    ZeroLoopReport zl = zero_loops(t);
    const Nat& z = zl.z;
    auto [ell0, p] = cert.period_for(z);

    // ell1: blocks are >= |Q| from here on (f is nondecreasing past
    // monotone_from, so one witness suffices)
    Nat ell1 = f.monotone_from();
    {
        Nat guard = ell1 + 65536;
        while (f(ell1) < q_count) {
            ++ell1;
            if (ell1 > guard)
                throw HorizonExhaustedError("blocks of " + f.describe() +
                                            " never reach the state count on the search horizon");
        }
    }

    Nat base = (ell0 > ell1 ? ell0 : ell1) + 1;
    Nat bound = q_count * p * Nat(safety);
    std::size_t need = to_size(base + 2 * bound + p, "state trace length");

    std::vector<StateId> trace;
    trace.reserve(need + 1);
    trace.push_back(t.initial());
    for (std::size_t n = 0; n < need; ++n) {
        StateId q = trace.back();
        q = t.next(q, 1);
        trace.push_back(state_after_run(t, q, 0, f(Nat(n))));
    }

    std::optional<std::pair<Nat, Nat>> found;  // (n0, m)
    for (Nat n0 = base; n0 <= base + bound && !found; ++n0)
        for (Nat mm = p; mm <= bound; mm += p)
            if (trace[to_size(n0)] == trace[to_size(n0 + mm)]) {
                found = {n0, mm};
                break;
            }
    if (!found)
        throw HorizonExhaustedError("no state/residue repetition found within bound " +
                                    bound.str());
    auto [n0, mm] = *found;
    std::size_t m = to_size(mm);

    // a_j: sampled minimum, then clamped down to the least value >= |Q| in
    // the same residue class mod z, so every exponent stays natural
    std::vector<Word> ps, cs;
    std::vector<Weight> ws;
    for (std::size_t j = 0; j < m; ++j) {
        Nat mn = f(n0 + Nat(j));
        for (int i = 1; i < 8; ++i) {
            Nat v = f(n0 + mm * i + Nat(j));
            if (v < mn) mn = v;
        }
        Nat aj = q_count + (mn - q_count) % z;
        PumpDecomposition pd = pump(t, trace[to_size(n0 + Nat(j))], aj);
        ps.push_back(pd.p);
        cs.push_back(pd.c);
        ws.emplace_back(std::vector<Rat>{Rat(Int(1), Int(z))}, Rat(-Int(aj), Int(z)));
    }

    Word w;
    {
        StateId q = t.initial();
        for (Nat n = 0; n < n0; ++n) {
            auto [nq, out] = run_block(t, q, f(n));
            q = nq;
            w.append(out);
        }
    }

    TransductExtraction ex{DoubleProduct{f, n0, std::move(w),
                                         WeightTuple(std::move(ws)), std::move(ps), std::move(cs)},
                           {}, z, n0, mm};
    ex.state_trace.assign(trace.begin(), trace.begin() + to_size(n0 + mm) + 1);
    for (Nat n = 0; n < Nat(4 * m); ++n) dp_exponent_nat(ex.dp, n);  // spot-check naturalness
    return ex;
}

// --- canonical form -----------------------------------------------------------

// The constructive content of the transduct characterisation: an
// ambiguity-free double product sigma is equivalent to <g'> where
// g' = alphas (.) S^shift f. `back` transduces <g'> to sigma' (the suffix of
// sigma past w and n2 inner products); `forth` is the discriminating
// look-ahead machine for the converse.
struct CanonicalForm {
    WeightTuple alphas;
    Nat shift;                 // total shift: g' = alphas (.) S^shift f
    Fst back;                  // <g'> -> sigma'
    LookaheadFst forth;        // sigma' -> <g'>
    DoubleProduct sigma_prime; // dp emitting sigma' (w = empty, shifted)
    std::vector<Nat> t_dis;    // minimal disagreement positions t_j
    std::vector<Nat> ell_stay, ell_adv;
    Nat n2;
};

inline CanonicalForm dp_to_canonical(const DoubleProduct& dp, std::size_t scan_guard = 100000) {
    check_shape(dp);
    std::size_t m = dp.m();
    for (std::size_t j = 0; j < m; ++j) {
        if (dp.cs[j].empty() || !weight_nonconstant(dp.alphas[j]))
            throw PreconditionError("dp_to_canonical requires a disambiguated double product");
    }
    if (find_ambiguity(dp))
        throw PreconditionError("dp_to_canonical requires an ambiguity-free double product");

    std::vector<Nat> t_dis(m), ell_stay(m), ell_adv(m);
    for (std::size_t j = 0; j < m; ++j) {
        std::size_t nj = (j + 1) % m;
        Nat bound = Nat(dp.ps[nj].size()) +
                    int_lcm(Nat(dp.cs[j].size()), Nat(dp.cs[nj].size())) + 1;
        std::optional<Nat> t;
        for (Nat i = 0; i < bound && !t; ++i)
            if (Word().up_bit(dp.cs[j], i) != dp.ps[nj].up_bit(dp.cs[nj], i)) t = i;
        if (!t) throw std::logic_error("no disagreement position despite ambiguity-freeness");
        t_dis[j] = *t;
        ell_stay[j] = *t / Nat(dp.cs[j].size());
        Nat pj = Nat(dp.ps[nj].size());
        ell_adv[j] = *t + 1 > pj
                         ? (*t + 1 - pj + Nat(dp.cs[nj].size()) - 1) / Nat(dp.cs[nj].size())
                         : Nat(0);
    }
    Nat t_max = 0;
    for (const Nat& t : t_dis)
        if (t > t_max) t_max = t;

    // n2: all exponents of the suffix exceed t_max. Per residue class the
    // exponent is nondecreasing once f's arguments are past its monotone
    // threshold, so a single witness per class suffices.
    BlockFun fs = dp.f.shifted(dp.n0);
    Nat x0 = fs.monotone_from();
    Nat sm = dp.alphas.window();
    Nat n2 = 0;
    for (std::size_t r = 0; r < m; ++r) {
        Nat sr = 0;
        for (std::size_t i = 0; i < r; ++i) sr += Nat(dp.alphas[i].arity());
        bool ok = false;
        for (Nat q = 0; q < Nat(scan_guard); ++q) {
            if (q * sm + sr >= x0 && dp_exponent_nat(dp, q * Nat(m) + Nat(r)) > t_max) {
                if (q > n2) n2 = q;
                ok = true;
                break;
            }
        }
        if (!ok)
            throw NotSpirallingError("exponents did not exceed " + t_max.str() +
                                     " within the scan guard");
    }

    CanonicalForm cf{dp.alphas, dp.n0 + n2 * sm, build_block_expander(dp.ps, dp.cs),
                     LookaheadFst{}, DoubleProduct{dp.f, dp.n0 + n2 * sm, Word(), dp.alphas,
                                                   dp.ps, dp.cs},
                     t_dis, ell_stay, ell_adv, n2};

    LookaheadFst& fo = cf.forth;
    fo.set_name("discriminator");
    for (std::size_t j = 0; j < m; ++j) fo.add_state("q" + std::to_string(j));
    for (std::size_t j = 0; j < m; ++j) {
        StateId qj = static_cast<StateId>(j);
        std::size_t nj = (j + 1) % m;
        StateId qn = static_cast<StateId>(nj);
        fo.add_rule({qj, dp.cs[j], dp.cs[j].repeated(to_size(ell_stay[j])), qj, Word("0")});
        if (!dp.ps[nj].empty()) {
            fo.add_rule({qj, dp.ps[nj], dp.cs[nj].repeated(to_size(ell_adv[j])), qn, Word("1")});
        } else {
            // empty p: the boundary rule consumes one c of the next factor
            // instead (its exponents all exceed t_max >= 0, so one exists)
            fo.add_rule({qj, dp.cs[nj], dp.cs[nj].repeated(to_size(ell_adv[j] - 1)), qn,
                         Word("10")});
        }
    }
    fo.set_initial(static_cast<StateId>(m - 1));
    la_validate(fo);
    return cf;
}

// --- textual format ----------------------------------------------------------
//
//   dp
//   f <blocks seq-spec>
//   n0 <k>
//   w <bits-or-->
//   weights m=<m>
//   (<a0> ... | <b>)     x m
//   p <w0> <w1> ...
//   c <w0> <w1> ...

inline DoubleProduct parse_dp(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    std::optional<BlockFun> f;
    std::optional<Nat> n0;
    std::optional<Word> w;
    std::optional<WeightTuple> alphas;
    std::optional<std::vector<Word>> ps, cs;
    std::optional<std::size_t> weights_expected;
    std::vector<Weight> ws;

    while (std::getline(in, line)) {
        ++line_no;
        auto toks = split_tokens(line);
        if (toks.empty()) continue;
        try {
            if (!header) {
                if (toks[0] != "dp") throw ParseError("expected 'dp' header");
                header = true;
            } else if (weights_expected && ws.size() < *weights_expected) {
                std::istringstream one(line);
                std::string all;
                std::getline(one, all);
                std::istringstream wrapped("weights m=1\n" + all + "\n");
                ws.push_back(parse_weight_tuple(wrapped)[0]);
                if (ws.size() == *weights_expected) alphas = WeightTuple(ws);
            } else if (toks[0] == "f") {
                std::string spec;
                for (std::size_t i = 1; i < toks.size(); ++i) spec += toks[i] + " ";
                f = parse_blockfun_spec(spec);
            } else if (toks[0] == "n0" && toks.size() == 2) {
                n0 = parse_nat(toks[1], "n0");
            } else if (toks[0] == "w" && toks.size() == 2) {
                w = parse_word_or_dash(toks[1]);
            } else if (toks[0] == "weights" && toks.size() == 2 && toks[1].rfind("m=", 0) == 0) {
                weights_expected = to_size(parse_nat(toks[1].substr(2), "tuple size"));
                if (*weights_expected == 0) throw ParseError("tuple size must be >= 1");
            } else if (toks[0] == "p") {
                ps = std::vector<Word>{};
                for (std::size_t i = 1; i < toks.size(); ++i)
                    ps->push_back(parse_word_or_dash(toks[i]));
            } else if (toks[0] == "c") {
                cs = std::vector<Word>{};
                for (std::size_t i = 1; i < toks.size(); ++i)
                    cs->push_back(parse_word_or_dash(toks[i]));
            } else {
                throw ParseError("unexpected line in dp file: '" + line + "'");
            }
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!header) throw ParseError("missing 'dp' header");
    if (!f || !n0 || !w || !alphas || !ps || !cs)
        throw ParseError("dp file needs f, n0, w, weights, p and c entries");
    DoubleProduct dp{*f, *n0, *w, *alphas, *ps, *cs};
    check_shape(dp);
    return dp;
}

inline DoubleProduct parse_dp(const std::string& text) {
    std::istringstream is(text);
    return parse_dp(is);
}

inline std::string format_dp(const DoubleProduct& dp) {
    std::ostringstream os;
    os << "dp\n";
    os << "f blocks " << dp.f.describe() << "\n";
    os << "n0 " << dp.n0.str() << "\n";
    os << "w " << word_or_dash(dp.w) << "\n";
    os << format_weight_tuple(dp.alphas);
    os << "p";
    for (const Word& p : dp.ps) os << ' ' << word_or_dash(p);
    os << "\nc";
    for (const Word& c : dp.cs) os << ' ' << word_or_dash(c);
    os << "\n";
    return os.str();
}

}  // namespace fstdeg
