#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fstdeg/error.hpp"
#include "fstdeg/numbers.hpp"

namespace fstdeg {

// A function N -> N in a closed-form family, evaluated exactly at arbitrary
// precision. These are the f of block-encoded sequences <f>; the closed
// forms are what make modular-periodicity and growth questions decidable.
class BlockFun {
public:
    enum class Kind { Polynomial, Exponential, FloorDiv, TableThenTail };

    // coeffs lowest degree first, all non-negative
    static BlockFun polynomial(std::vector<Nat> coeffs) {
        for (const Nat& c : coeffs)
            if (c < 0) throw PreconditionError("polynomial coefficients must be non-negative");
        while (coeffs.size() > 1 && coeffs.back() == 0) coeffs.pop_back();
        if (coeffs.empty()) coeffs.push_back(0);
        auto n = std::make_shared<Node>();
        n->kind = Kind::Polynomial;
        n->coeffs = std::move(coeffs);
        return BlockFun(std::move(n), 0);
    }

    // n |-> scale * base^n
    static BlockFun exponential(Nat base, Nat scale = 1) {
        if (base < 2) throw PreconditionError("exponential base must be >= 2");
        if (scale < 1) throw PreconditionError("exponential scale must be >= 1");
        auto n = std::make_shared<Node>();
        n->kind = Kind::Exponential;
        n->base = std::move(base);
        n->scale = std::move(scale);
        return BlockFun(std::move(n), 0);
    }

    // n |-> floor(n / divisor)
    static BlockFun floor_div(Nat divisor) {
        if (divisor < 1) throw PreconditionError("floor_div divisor must be >= 1");
        auto n = std::make_shared<Node>();
        n->kind = Kind::FloorDiv;
        n->divisor = std::move(divisor);
        return BlockFun(std::move(n), 0);
    }

    // Finitely many explicit values, then the tail function indexed from 0.
    static BlockFun table_then_tail(std::vector<Nat> table, BlockFun tail) {
        for (const Nat& v : table)
            if (v < 0) throw PreconditionError("table values must be non-negative");
        auto n = std::make_shared<Node>();
        n->kind = Kind::TableThenTail;
        n->table = std::move(table);
        n->tail = std::make_shared<BlockFun>(std::move(tail));
        return BlockFun(std::move(n), 0);
    }

    // S^k f, the x-shift: result(n) = f(n + k).
    BlockFun shifted(const Nat& k) const {
        BlockFun r = *this;
        r.shift_ += k;
        return r;
    }

    Nat operator()(const Nat& n) const { return eval_node(*node_, n + shift_); }

    Kind kind() const { return node_->kind; }
    const Nat& shift() const { return shift_; }
    const std::vector<Nat>& coeffs() const { return node_->coeffs; }
    const Nat& base() const { return node_->base; }
    const Nat& scale() const { return node_->scale; }
    const Nat& divisor() const { return node_->divisor; }
    const std::vector<Nat>& table() const { return node_->table; }
    const BlockFun& tail() const { return *node_->tail; }

    std::size_t poly_degree() const { return node_->coeffs.size() - 1; }

    bool is_constant() const {
        return node_->kind == Kind::Polynomial && node_->coeffs.size() == 1;
    }

    // Index from which the function is guaranteed nondecreasing. All four
    // families are eventually monotone; this is what lets bounded searches
    // ("find n with f(n) >= B for all later n") conclude soundly.
    Nat monotone_from() const {
        Nat t = monotone_from_node(*node_);
        t -= shift_;
        if (t < 0) t = 0;
        return t;
    }

    std::string describe() const {
        std::ostringstream os;
        describe_node(*node_, os);
        if (shift_ > 0) os << " shift " << shift_.str();
        return os.str();
    }

private:
    struct Node {
        Kind kind{};
        std::vector<Nat> coeffs;       // Polynomial
        Nat base, scale;               // Exponential
        Nat divisor;                   // FloorDiv
        std::vector<Nat> table;        // TableThenTail
        std::shared_ptr<BlockFun> tail;
    };

    BlockFun(std::shared_ptr<const Node> node, Nat shift)
        : node_(std::move(node)), shift_(std::move(shift)) {}

    static Nat eval_node(const Node& n, const Nat& x) {
        switch (n.kind) {
            case Kind::Polynomial: {
                Nat acc = 0;
                for (auto it = n.coeffs.rbegin(); it != n.coeffs.rend(); ++it) acc = acc * x + *it;
                return acc;
            }
            case Kind::Exponential: {
                Nat p = 1;
                Nat e = x;
                Nat b = n.base;
                // square-and-multiply so <2^n> at block 10^4 stays cheap
                while (e > 0) {
                    if (boost::multiprecision::bit_test(e, 0)) p *= b;
                    e >>= 1;
                    if (e > 0) b *= b;
                }
                return n.scale * p;
            }
            case Kind::FloorDiv:
                return x / n.divisor;
            case Kind::TableThenTail:
                if (x < Nat(n.table.size())) return n.table[to_size(x)];
                return (*n.tail)(x - Nat(n.table.size()));
        }
        throw std::logic_error("unreachable");
    }

    static Nat monotone_from_node(const Node& n) {
        if (n.kind == Kind::TableThenTail)
            return Nat(n.table.size()) + n.tail->monotone_from();
        return 0;
    }

    static void describe_node(const Node& n, std::ostringstream& os) {
        switch (n.kind) {
            case Kind::Polynomial:
                os << "poly";
                for (const Nat& c : n.coeffs) os << ' ' << c.str();
                return;
            case Kind::Exponential:
                os << "exp " << n.base.str();
                if (n.scale != 1) os << ' ' << n.scale.str();
                return;
            case Kind::FloorDiv:
                os << "floordiv " << n.divisor.str();
                return;
            case Kind::TableThenTail:
                os << "table";
                for (const Nat& v : n.table) os << ' ' << v.str();
                os << " then " << n.tail->describe();
                return;
        }
    }

    std::shared_ptr<const Node> node_;
    Nat shift_ = 0;
};

}  // namespace fstdeg
