#pragma once

#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fstdeg/blockfun.hpp"
#include "fstdeg/error.hpp"
#include "fstdeg/numbers.hpp"
#include "fstdeg/stream.hpp"

namespace fstdeg {

// A weight <a_0,...,a_{k-1}, b>: the affine form a_0 f(0) + ... + a_{k-1}
// f(k-1) + b with non-negative rational coefficients (the offset b may be
// negative). Weighted products apply a rotating tuple of weights along
// successive windows of f; they are exactly what FSTs can do to block
// lengths.
class Weight {
public:
    Weight(std::vector<Rat> coeffs, Rat offset)
        : coeffs_(std::move(coeffs)), offset_(std::move(offset)) {
        for (const Rat& a : coeffs_)
            if (a < 0) throw PreconditionError("weight coefficients must be non-negative");
    }

    std::size_t arity() const { return coeffs_.size(); }  // k = |alpha| - 1
    const std::vector<Rat>& coeffs() const { return coeffs_; }
    const Rat& offset() const { return offset_; }

    std::string str() const {
        std::ostringstream os;
        os << '(';
        for (const Rat& a : coeffs_) os << rat_str(a) << ' ';
        os << "| " << rat_str(offset_) << ')';
        return os.str();
    }

    bool operator==(const Weight&) const = default;

private:
    std::vector<Rat> coeffs_;
    Rat offset_;
};

inline bool weight_nonconstant(const Weight& a) {
    for (const Rat& c : a.coeffs())
        if (c != 0) return true;
    return false;
}

class WeightTuple {
public:
    explicit WeightTuple(std::vector<Weight> ws) : ws_(std::move(ws)) {
        if (ws_.empty()) throw PreconditionError("weight tuple must be nonempty");
    }

    std::size_t size() const { return ws_.size(); }
    const Weight& operator[](std::size_t i) const { return ws_[i]; }
    const std::vector<Weight>& weights() const { return ws_; }

    // Sum of arities: the window of f consumed by one full rotation.
    Nat window() const {
        Nat s = 0;
        for (const Weight& w : ws_) s += Nat(w.arity());
        return s;
    }

    bool operator==(const WeightTuple&) const = default;

private:
    std::vector<Weight> ws_;
};

// alpha . S^shift f  =  a_0 f(shift) + ... + a_{k-1} f(shift+k-1) + b
inline Rat wapply(const Weight& alpha, const BlockFun& f, const Nat& shift = 0) {
    Rat acc = alpha.offset();
    for (std::size_t j = 0; j < alpha.arity(); ++j)
        acc += alpha.coeffs()[j] * Rat(f(shift + Nat(j)));
    return acc;
}

// (alphas (.) f)(n), by the closed form: with n = q m + r, the value is
// alpha_r applied to f shifted by q * s_m + s_r where s_i sums the arities.
inline Rat wprod(const WeightTuple& alphas, const BlockFun& f, const Nat& n) {
    Nat m = Nat(alphas.size());
    Nat q = n / m;
    std::size_t r = to_size(n % m);
    Nat t = q * alphas.window();
    for (std::size_t i = 0; i < r; ++i) t += Nat(alphas[i].arity());
    return wapply(alphas[r], f, t);
}

struct NaturalnessReport {
    bool natural = true;
    std::optional<std::pair<Nat, Rat>> violation;  // first offending (n, value)

    explicit operator bool() const { return natural; }
};

// Checks (alphas (.) f)(n) in N for n < horizon. For polynomial f the
// integrality side is additionally decided symbolically: on each residue
// class the product is a rational-coefficient polynomial, and a polynomial
// integer-valued at deg+1 consecutive points is integer-valued everywhere.
inline NaturalnessReport wprod_natural(const WeightTuple& alphas, const BlockFun& f,
                                       const Nat& horizon) {
    NaturalnessReport rep;
    for (Nat n = 0; n < horizon; ++n) {
        Rat v = wprod(alphas, f, n);
        if (!is_integer(v) || v < 0) {
            rep.natural = false;
            rep.violation = {n, v};
            return rep;
        }
    }
    if (f.kind() == BlockFun::Kind::Polynomial) {
        std::size_t checks = f.poly_degree() + 1;
        for (std::size_t r = 0; r < alphas.size(); ++r)
            for (std::size_t i = 0; i < checks; ++i) {
                Rat v = wprod(alphas, f, Nat(alphas.size()) * Nat(i) + Nat(r));
                if (!is_integer(v)) {
                    rep.natural = false;
                    rep.violation = {Nat(alphas.size()) * Nat(i) + Nat(r), v};
                    return rep;
                }
            }
    }
    return rep;
}

// zip_k(f_0,...,f_{k-1})(kn+i) = f_i(n); the perfect shuffle.
inline std::function<Nat(const Nat&)> zip(std::vector<BlockFun> fs) {
    if (fs.empty()) throw PreconditionError("zip needs at least one function");
    return [fs = std::move(fs)](const Nat& n) {
        Nat k = Nat(fs.size());
        return fs[to_size(n % k)](n / k);
    };
}

// The m single weights beta_i with (alphas (.) f)(mn+i) = (<beta_i> (.) f)(n):
// beta_i is alpha_i's coefficients placed in their own window slot, zeros
// elsewhere, with alpha_i's offset.
inline std::vector<Weight> wprod_unzip(const WeightTuple& alphas) {
    std::size_t sm = to_size(alphas.window());
    std::vector<Weight> betas;
    std::size_t start = 0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        std::vector<Rat> cs(sm, Rat(0));
        for (std::size_t h = 0; h < alphas[i].arity(); ++h) cs[start + h] = alphas[i].coeffs()[h];
        betas.emplace_back(std::move(cs), alphas[i].offset());
        start += alphas[i].arity();
    }
    return betas;
}

// --- spiralling certificates -------------------------------------------------

// Witnesses that f(n) mod m is ultimately periodic for the stored moduli:
// per modulus a pair (n0, p) with f(n+p) = f(n) (mod m) for n >= n0.
// ByFamily certificates are backed by a family argument and hold for all n;
// Empirical ones only record what a bounded search saw and are non-proofs.
struct SpirallingCertificate {
    enum class Kind { ByFamily, Empirical };
    BlockFun subject;
    Kind kind;
    std::string reason;
    std::map<Nat, std::pair<Nat, Nat>> periods;  // modulus -> (n0, p)
    Nat horizon;

    const std::pair<Nat, Nat>& period_for(const Nat& modulus) const {
        auto it = periods.find(modulus);
        if (it == periods.end())
            throw PreconditionError("certificate does not cover modulus " + modulus.str());
        return it->second;
    }
};

namespace detail {

// Coefficients of f as a polynomial in n with the shift expanded, lowest
// degree first. Only valid for the Polynomial family.
inline std::vector<Nat> poly_coeffs_expanded(const BlockFun& f) {
    const std::vector<Nat>& base = f.coeffs();
    const Nat& s = f.shift();
    // p(n + s) via Horner: repeatedly multiply by (n + s)
    std::vector<Nat> acc{0};
    for (auto it = base.rbegin(); it != base.rend(); ++it) {
        std::vector<Nat> shifted(acc.size() + 1, Nat(0));
        for (std::size_t i = 0; i < acc.size(); ++i) {
            shifted[i + 1] += acc[i];      // * n
            shifted[i] += acc[i] * s;      // * s
        }
        shifted[0] += *it;
        while (shifted.size() > 1 && shifted.back() == 0) shifted.pop_back();
        acc = std::move(shifted);
    }
    return acc;
}

// True period of a polynomial mod m, certified by coefficient divisibility
// of f(n+p) - f(n): every coefficient divisible by m is sufficient, and
// p = m always qualifies by the binomial theorem.
inline bool poly_period_certified(const std::vector<Nat>& coeffs, const Nat& p, const Nat& m) {
    // expand sum_k c_k ((n+p)^k - n^k) and check each power's coefficient
    std::size_t deg = coeffs.size() - 1;
    std::vector<Nat> diff(deg + 1, Nat(0));
    std::vector<std::vector<Nat>> binom(deg + 1, std::vector<Nat>(deg + 1, Nat(0)));
    for (std::size_t i = 0; i <= deg; ++i) {
        binom[i][0] = 1;
        for (std::size_t j = 1; j <= i; ++j)
            binom[i][j] = binom[i - 1][j - 1] + (j <= i - 1 ? binom[i - 1][j] : Nat(0));
    }
    for (std::size_t k = 1; k <= deg; ++k) {
        if (coeffs[k] == 0) continue;
        Nat pw = 1;
        for (std::size_t j = 1; j <= k; ++j) {
            pw *= p;  // p^j
            diff[k - j] += coeffs[k] * binom[k][j] * pw;
        }
    }
    for (const Nat& d : diff)
        if (d % m != 0) return false;
    return true;
}

}  // namespace detail

// Certificate construction. Polynomial (non-constant) and Exponential
// families get analytically backed periods; everything else gets a bounded
// empirical search that fails with a witness when no period fits.
inline SpirallingCertificate certify_spiralling(const BlockFun& f, const std::vector<Nat>& moduli,
                                                const Nat& horizon) {
    SpirallingCertificate cert{f, SpirallingCertificate::Kind::Empirical, "", {}, horizon};

    bool by_family = false;
    if (f.kind() == BlockFun::Kind::Polynomial && !f.is_constant()) {
        by_family = true;
        cert.reason = "non-constant polynomial with non-negative coefficients";
    } else if (f.kind() == BlockFun::Kind::Exponential) {
        by_family = true;
        cert.reason = "exponential";
    }
    cert.kind = by_family ? SpirallingCertificate::Kind::ByFamily
                          : SpirallingCertificate::Kind::Empirical;

    for (const Nat& m : moduli) {
        if (m < 1) throw PreconditionError("modulus must be >= 1");
        std::optional<std::pair<Nat, Nat>> found;
        if (by_family && f.kind() == BlockFun::Kind::Polynomial) {
            auto coeffs = detail::poly_coeffs_expanded(f);
            for (Nat p = 1; p <= m; ++p)
                if (detail::poly_period_certified(coeffs, p, m)) {
                    found = {Nat(0), p};
                    break;
                }
        } else if (by_family) {  // Exponential: iterate the residue map until it repeats
            Nat mod = m;
            Nat start = (f.scale() * [&] {
                            Nat r = 1, b = f.base() % mod, e = f.shift();
                            while (e > 0) {
                                if (boost::multiprecision::bit_test(e, 0)) r = r * b % mod;
                                e >>= 1;
                                b = b * b % mod;
                            }
                            return r;
                        }()) % mod;
            std::map<Nat, Nat> seen;  // residue -> first index
            Nat r = start, idx = 0;
            Nat bb = f.base() % mod;
            while (!seen.count(r)) {
                seen[r] = idx;
                r = r * bb % mod;
                ++idx;
            }
            found = {seen[r], idx - seen[r]};
        } else {
            // empirical: residues on the horizon, smallest (p, n0) that fits
            std::size_t h = to_size(horizon, "horizon");
            std::vector<Nat> res(h);
            for (std::size_t n = 0; n < h; ++n) res[n] = f(Nat(n)) % m;
            for (std::size_t p = 1; p * 5 <= h && !found; ++p) {
                std::size_t bad_end = 0;
                for (std::size_t n = 0; n + p < h; ++n)
                    if (res[n] != res[n + p]) bad_end = n + 1;
                if (bad_end + 4 * p <= h) found = {Nat(bad_end), Nat(p)};
            }
            if (!found)
                throw NotSpirallingError("no period found for modulus " + m.str() +
                                         " within horizon " + horizon.str() + " for " +
                                         f.describe());
        }
        // every stored (n0, p) must re-verify on [n0, n0 + 4p]
        const auto& [n0, p] = *found;
        for (Nat n = n0; n <= n0 + 4 * p; ++n)
            if (f(n) % m != f(n + p) % m)
                throw std::logic_error("spiralling certificate failed its own re-verification");
        cert.periods[m] = *found;
    }
    return cert;
}

// --- textual format ----------------------------------------------------------
//
//   weights m=<m>
//   (<a0> <a1> ... | <b>)     one line per weight, rationals as p/q

inline WeightTuple parse_weight_tuple(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> m;
    std::vector<Weight> ws;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream probe(line);
        std::string first;
        if (!(probe >> first)) continue;
        if (!m) {
            if (first.rfind("weights", 0) != 0)
                throw ParseError("expected 'weights m=<m>' header", line_no);
            std::string marg;
            if (!(probe >> marg) || marg.rfind("m=", 0) != 0)
                throw ParseError("expected 'weights m=<m>' header", line_no);
            m = to_size(parse_nat(marg.substr(2), "tuple size"));
            continue;
        }
        auto open = line.find('(');
        auto close = line.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close < open)
            throw ParseError("expected '(<a0> ... | <b>)'", line_no);
        std::string body = line.substr(open + 1, close - open - 1);
        auto bar = body.find('|');
        if (bar == std::string::npos) throw ParseError("weight needs '| <offset>'", line_no);
        std::vector<Rat> cs;
        try {
            std::istringstream cis(body.substr(0, bar));
            std::string tok;
            while (cis >> tok) cs.push_back(parse_rat(tok));
            std::istringstream ois(body.substr(bar + 1));
            std::string off;
            if (!(ois >> off)) throw ParseError("weight needs an offset", line_no);
            std::string extra;
            if (ois >> extra) throw ParseError("trailing tokens after offset", line_no);
            ws.emplace_back(std::move(cs), parse_rat(off));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!m) throw ParseError("missing 'weights m=<m>' header");
    if (ws.size() != *m)
        throw ParseError("weight tuple header says m=" + std::to_string(*m) + " but " +
                         std::to_string(ws.size()) + " weights follow");
    return WeightTuple(std::move(ws));
}

inline WeightTuple parse_weight_tuple(const std::string& text) {
    std::istringstream is(text);
    return parse_weight_tuple(is);
}

inline std::string format_weight_tuple(const WeightTuple& ws) {
    std::ostringstream os;
    os << "weights m=" << ws.size() << "\n";
    for (const Weight& w : ws.weights()) os << w.str() << "\n";
    return os.str();
}

}  // namespace fstdeg
