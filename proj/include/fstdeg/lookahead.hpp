#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fstdeg/error.hpp"
#include "fstdeg/fst.hpp"
#include "fstdeg/stream.hpp"
#include "fstdeg/word.hpp"

namespace fstdeg {

// FSTs with look-ahead: a rule at state q consumes a nonempty word while
// requiring a further peek word to be present, emits an output word and
// moves on. The realised function is partial; compilation to a plain FST
// preserves it wherever it is defined.
struct LaRule {
    StateId state;
    Word consume;  // nonempty
    Word peek;
    StateId next;
    Word output;
};

class LookaheadFst {
public:
    const std::string& name() const { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }

    StateId add_state(const std::string& name) {
        if (by_name_.count(name)) throw ValidationError("duplicate state id: '" + name + "'");
        StateId id = static_cast<StateId>(names_.size());
        names_.push_back(name);
        by_name_.emplace(name, id);
        return id;
    }

    StateId state(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw ValidationError("unknown state reference: '" + name + "'");
        return it->second;
    }
    std::optional<StateId> find_state(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) return std::nullopt;
        return it->second;
    }

    void set_initial(StateId q) { initial_ = q; }
    StateId initial() const { return initial_; }

    void add_rule(LaRule r) {
        if (r.consume.empty()) throw ValidationError("rule consume word must be nonempty");
        rules_.push_back(std::move(r));
    }

    std::size_t state_count() const { return names_.size(); }
    const std::string& state_name(StateId q) const { return names_[q]; }
    const std::vector<LaRule>& rules() const { return rules_; }

private:
    std::string name_ = "lfst";
    std::vector<std::string> names_;
    std::unordered_map<std::string, StateId> by_name_;
    StateId initial_ = kNoState;
    std::vector<LaRule> rules_;
};

// Determinism condition: two rules of one state whose full look-ahead words
// are prefix-comparable must be the same rule. This makes at most one rule
// applicable at any input position.
inline void la_validate(const LookaheadFst& t) {
    if (t.state_count() == 0) throw ValidationError("look-ahead machine has no states");
    if (t.initial() == kNoState) throw ValidationError("initial state missing");
    const auto& rules = t.rules();
    for (std::size_t i = 0; i < rules.size(); ++i)
        for (std::size_t j = i + 1; j < rules.size(); ++j) {
            if (rules[i].state != rules[j].state) continue;
            Word wi = rules[i].consume + rules[i].peek;
            Word wj = rules[j].consume + rules[j].peek;
            if (wi.is_prefix_of(wj) || wj.is_prefix_of(wi)) {
                if (rules[i].consume == rules[j].consume && rules[i].peek == rules[j].peek)
                    throw ValidationError("duplicate rule at state " + t.state_name(rules[i].state));
                throw ValidationError(
                    "overlapping rules at state " + t.state_name(rules[i].state) + ": (" +
                    rules[i].consume.str() + ", " + word_or_dash(rules[i].peek) + ") vs (" +
                    rules[j].consume.str() + ", " + word_or_dash(rules[j].peek) + ")");
            }
        }
}

namespace detail {

// Serves single bits out of a run cursor, with unbounded lookahead into a
// small window. Infinite runs serve bits forever.
class BitWindow {
public:
    explicit BitWindow(std::unique_ptr<Cursor> in) : in_(std::move(in)) {}

    // Bit at offset i from the current position; nullopt past end of input.
    std::optional<Bit> peek(std::size_t i) {
        while (window_.size() <= i) {
            if (constant_) {
                window_.push_back(*constant_);
                continue;
            }
            auto r = in_->next_run();
            if (!r) return i < window_.size() ? std::optional<Bit>(window_[i]) : std::nullopt;
            if (r->infinite()) {
                constant_ = r->bit;
                continue;
            }
            std::size_t n = to_size(*r->len);
            for (std::size_t k = 0; k < n; ++k) window_.push_back(r->bit);
        }
        return window_[i];
    }

    bool has_word_at(const Word& w) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            auto b = peek(i);
            if (!b || *b != w[i]) return false;
        }
        return true;
    }

    void drop(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) peek(i);
        window_.erase(window_.begin(), window_.begin() + std::min(n, window_.size()));
        consumed_ += n;
    }

    std::size_t consumed() const { return consumed_; }

private:
    std::unique_ptr<Cursor> in_;
    std::vector<Bit> window_;
    std::optional<Bit> constant_;
    std::size_t consumed_ = 0;
};

class LaRunCursor : public Cursor {
public:
    LaRunCursor(std::shared_ptr<const LookaheadFst> t, std::unique_ptr<Cursor> in)
        : t_(std::move(t)), win_(std::move(in)), q_(t_->initial()) {}

    std::optional<Run> next_run() override {
        while (true) {
            if (auto r = pending_.next_run()) return r;
            if (done_) return std::nullopt;
            const LaRule* hit = nullptr;
            for (const LaRule& r : t_->rules()) {
                if (r.state != q_) continue;
                if (win_.has_word_at(r.consume + r.peek)) {
                    if (hit) throw std::logic_error("two look-ahead rules apply at one position");
                    hit = &r;
                }
            }
            if (!hit) {
                // end of a finite input with nothing buffered ends the run
                // cleanly; anything else is a stuck position
                if (!win_.peek(0)) {
                    done_ = true;
                    continue;
                }
                throw StuckError(win_.consumed());
            }
            pending_.push(hit->output);
            win_.drop(hit->consume.size());
            q_ = hit->next;
        }
    }

private:
    std::shared_ptr<const LookaheadFst> t_;
    BitWindow win_;
    StateId q_;
    SegmentQueue pending_;
    bool done_ = false;
};

}  // namespace detail

// Partial run: at each position the unique applicable rule fires; if none
// applies the output stream reports the stuck position on demand.
inline Stream la_run(const LookaheadFst& t, const Stream& s) {
    la_validate(t);
    auto shared = std::make_shared<const LookaheadFst>(t);
    return derived_stream([shared, s] {
        return std::make_unique<detail::LaRunCursor>(shared, s.cursor());
    });
}

// Compilation to a plain FST (buffering construction): states are (state,
// buffer) pairs with buffers of length <= L = max rule word length. Short
// buffers absorb input silently; a full buffer either fires its unique
// matching rule or self-loops silently forever (the completion clause, which
// makes the machine total but meaningless past the domain of definition).
// Only reachable pairs are built; the full bound is |Q| * (2^(L+1) - 1).
inline Fst la_compile(const LookaheadFst& t, std::size_t state_budget = (1u << 22)) {
    la_validate(t);
    std::size_t ell = 0;
    for (const LaRule& r : t.rules()) ell = std::max(ell, r.consume.size() + r.peek.size());

    Fst m;
    m.set_name(t.name() + ".compiled");
    std::map<std::pair<StateId, std::string>, StateId> idx;
    std::vector<std::pair<StateId, Word>> order;
    auto intern = [&](StateId q, const Word& buf) {
        auto [it, fresh] = idx.emplace(std::make_pair(q, buf.str()), static_cast<StateId>(idx.size()));
        if (fresh) {
            m.add_state(t.state_name(q) + ":" + (buf.empty() ? "e" : buf.str()));
            order.emplace_back(q, buf);
            if (idx.size() > state_budget)
                throw HorizonExhaustedError("look-ahead compilation exceeds state budget");
        }
        return it->second;
    };
    StateId init = intern(t.initial(), Word());
    m.set_initial(init);
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto [q, buf] = order[i];
        for (Bit a : {Bit{0}, Bit{1}}) {
            if (buf.size() < ell) {
                Word nb = buf;
                nb.push_back(a);
                m.set_transition(static_cast<StateId>(i), a, intern(q, nb), Word());
                continue;
            }
            const LaRule* hit = nullptr;
            for (const LaRule& r : t.rules())
                if (r.state == q && (r.consume + r.peek).is_prefix_of(buf)) {
                    hit = &r;  // unique by the determinism condition
                    break;
                }
            if (!hit) {
                m.set_transition(static_cast<StateId>(i), a, static_cast<StateId>(i), Word());
                continue;
            }
            Word nb = buf.drop(hit->consume.size());
            nb.push_back(a);
            m.set_transition(static_cast<StateId>(i), a, intern(hit->next, nb), hit->output);
        }
    }
    validate(m);
    return m;
}

// --- textual format ----------------------------------------------------------
//
//   lfst <name>
//   initial <state>
//   <state> <consume> [peek <peek>] -> <state> | <output-or-->

inline LookaheadFst parse_lfst(std::istream& in) {
    LookaheadFst t;
    bool have_header = false, have_initial = false;
    std::string line;
    std::size_t line_no = 0;
    auto intern = [&t](const std::string& name) {
        if (auto q = t.find_state(name)) return *q;
        return t.add_state(name);
    };
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = split_tokens(line);
        if (toks.empty()) continue;
        if (!have_header) {
            if (toks.size() != 2 || toks[0] != "lfst")
                throw ParseError("expected 'lfst <name>' header", line_no);
            t.set_name(toks[1]);
            have_header = true;
            continue;
        }
        if (!have_initial) {
            if (toks.size() != 2 || toks[0] != "initial")
                throw ParseError("expected 'initial <state>'", line_no);
            t.set_initial(intern(toks[1]));
            have_initial = true;
            continue;
        }
        LaRule r;
        std::size_t arrow;
        if (toks.size() == 6 && toks[2] == "->" && toks[4] == "|")
            arrow = 2;
        else if (toks.size() == 8 && toks[2] == "peek" && toks[4] == "->" && toks[6] == "|")
            arrow = 4;
        else
            throw ParseError("expected '<state> <consume> [peek <peek>] -> <state> | <output>'",
                             line_no);
        try {
            r.state = intern(toks[0]);
            r.consume = Word(toks[1]);
            if (arrow == 4) r.peek = parse_word_or_dash(toks[3]);
            r.next = intern(toks[arrow + 1]);
            r.output = parse_word_or_dash(toks[arrow + 3]);
            t.add_rule(std::move(r));
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!have_header) throw ParseError("missing 'lfst <name>' header");
    if (!have_initial) throw ParseError("missing 'initial <state>' line");
    la_validate(t);
    return t;
}

inline LookaheadFst parse_lfst(const std::string& text) {
    std::istringstream is(text);
    return parse_lfst(is);
}

inline std::string format_lfst(const LookaheadFst& t) {
    std::ostringstream os;
    os << "lfst " << t.name() << "\n";
    os << "initial " << t.state_name(t.initial()) << "\n";
    for (const LaRule& r : t.rules()) {
        os << t.state_name(r.state) << ' ' << r.consume;
        if (!r.peek.empty()) os << " peek " << r.peek;
        os << " -> " << t.state_name(r.next) << " | " << word_or_dash(r.output) << "\n";
    }
    return os.str();
}

}  // namespace fstdeg
