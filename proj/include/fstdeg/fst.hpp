#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fstdeg/error.hpp"
#include "fstdeg/numbers.hpp"
#include "fstdeg/stream.hpp"
#include "fstdeg/word.hpp"

namespace fstdeg {

using StateId = std::uint32_t;
inline constexpr StateId kNoState = std::numeric_limits<StateId>::max();

// A complete deterministic finite-state transducer over {0,1}: one successor
// state and one output word per (state, bit). Machines are immutable after
// validation; concurrent runs over one machine are safe, a single run owns
// its own cursor state.
class Fst {
public:
    Fst() = default;

    const std::string& name() const { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }

    std::size_t state_count() const { return names_.size(); }
    StateId initial() const { return initial_; }
    const std::string& state_name(StateId q) const { return names_[q]; }

    StateId add_state(const std::string& name) {
        if (by_name_.count(name)) throw ValidationError("duplicate state id: '" + name + "'");
        StateId id = static_cast<StateId>(names_.size());
        names_.push_back(name);
        by_name_.emplace(name, id);
        next_.push_back({kNoState, kNoState});
        out_.emplace_back();
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

    void set_transition(StateId q, Bit b, StateId to, Word out) {
        if (next_[q][b] != kNoState)
            throw ParseError("duplicate transition for (" + names_[q] + ", " + std::to_string(b) + ")");
        next_[q][b] = to;
        out_[q][b] = std::move(out);
    }

    StateId next(StateId q, Bit b) const { return next_[q][b]; }
    const Word& out(StateId q, Bit b) const { return out_[q][b]; }

private:
    std::string name_ = "fst";
    std::vector<std::string> names_;
    std::unordered_map<std::string, StateId> by_name_;
    StateId initial_ = kNoState;
    std::vector<std::array<StateId, 2>> next_;
    std::vector<std::array<Word, 2>> out_;
};

// Completeness check: every (state, bit) pair must have a transition and the
// initial state must exist. Incomplete machines are rejected here rather
// than given implicit dead states.
inline void validate(const Fst& m) {
    if (m.state_count() == 0) throw ValidationError("machine has no states");
    if (m.initial() == kNoState || m.initial() >= m.state_count())
        throw ValidationError("initial state missing or unknown");
    for (StateId q = 0; q < m.state_count(); ++q)
        for (Bit b : {Bit{0}, Bit{1}}) {
            if (m.next(q, b) == kNoState)
                throw ValidationError("missing transition for (" + m.state_name(q) + ", " +
                                      std::to_string(b) + ")");
            if (m.next(q, b) >= m.state_count())
                throw ValidationError("transition target out of range");
        }
}

// Extended transition/output functions: delta(q, u) and lambda(q, u).
inline std::pair<StateId, Word> run_word(const Fst& m, StateId q, const Word& u) {
    Word out;
    for (std::size_t i = 0; i < u.size(); ++i) {
        out.append(m.out(q, u[i]));
        q = m.next(q, u[i]);
    }
    return {q, std::move(out)};
}

// A repeated output chunk. rep == nullopt means the chunk repeats forever.
struct OutSegment {
    Word word;
    std::optional<Nat> rep;
};

namespace detail {

// delta(q, b^count) with the output in closed form: walking the functional
// graph of b-edges enters a cycle within |Q| steps, after which whole cycles
// are skipped arithmetically. This is what makes blocks of 2^56 zeros cheap.
inline StateId advance_run(const Fst& m, StateId q, Bit b, const Nat& count,
                           std::vector<OutSegment>* segs) {
    if (count == 0) return q;
    std::vector<StateId> path{q};
    std::vector<const Word*> outs;
    std::unordered_map<StateId, std::size_t> seen{{q, 0}};
    StateId cur = q;
    std::size_t cycle_start = 0;
    bool cycled = false;
    while (true) {
        outs.push_back(&m.out(cur, b));
        cur = m.next(cur, b);
        path.push_back(cur);
        if (Nat(outs.size()) == count) {
            if (segs) {
                Word all;
                for (const Word* w : outs) all.append(*w);
                if (!all.empty()) segs->push_back({std::move(all), Nat(1)});
            }
            return cur;
        }
        auto [it, fresh] = seen.emplace(cur, outs.size());
        if (!fresh) {
            cycle_start = it->second;
            cycled = true;
            break;
        }
    }
    std::size_t cycle_len = outs.size() - cycle_start;
    (void)cycled;
    Nat rest = count - Nat(cycle_start);
    Nat full = rest / Nat(cycle_len);
    std::size_t tail = to_size(rest % Nat(cycle_len));
    if (segs) {
        Word head;
        for (std::size_t i = 0; i < cycle_start; ++i) head.append(*outs[i]);
        if (!head.empty()) segs->push_back({std::move(head), Nat(1)});
        Word cyc;
        for (std::size_t i = cycle_start; i < outs.size(); ++i) cyc.append(*outs[i]);
        if (!cyc.empty() && full > 0) segs->push_back({std::move(cyc), full});
        Word back;
        for (std::size_t i = cycle_start; i < cycle_start + tail; ++i) back.append(*outs[i]);
        if (!back.empty()) segs->push_back({std::move(back), Nat(1)});
    }
    return path[cycle_start + tail];
}

// Behaviour on b^omega: the finite prefix output plus the cycle's output
// word, which then repeats forever (empty cycle output = the machine falls
// silent).
inline void advance_run_forever(const Fst& m, StateId q, Bit b, std::vector<OutSegment>* segs) {
    std::unordered_map<StateId, std::size_t> seen{{q, 0}};
    std::vector<const Word*> outs;
    StateId cur = q;
    std::size_t cycle_start;
    while (true) {
        outs.push_back(&m.out(cur, b));
        cur = m.next(cur, b);
        auto [it, fresh] = seen.emplace(cur, outs.size());
        if (!fresh) {
            cycle_start = it->second;
            break;
        }
    }
    Word head;
    for (std::size_t i = 0; i < cycle_start; ++i) head.append(*outs[i]);
    if (!head.empty()) segs->push_back({std::move(head), Nat(1)});
    Word cyc;
    for (std::size_t i = cycle_start; i < outs.size(); ++i) cyc.append(*outs[i]);
    if (!cyc.empty()) segs->push_back({std::move(cyc), std::nullopt});
}

// States from which some reachable transition still emits output. Once a
// run leaves this set its output is provably finite.
inline std::vector<bool> can_emit_set(const Fst& m) {
    std::size_t n = m.state_count();
    std::vector<std::vector<StateId>> rev(n);
    std::vector<bool> can(n, false);
    std::vector<StateId> queue;
    for (StateId q = 0; q < n; ++q)
        for (Bit b : {Bit{0}, Bit{1}}) {
            rev[m.next(q, b)].push_back(q);
            if (!m.out(q, b).empty() && !can[q]) {
                can[q] = true;
                queue.push_back(q);
            }
        }
    while (!queue.empty()) {
        StateId q = queue.back();
        queue.pop_back();
        for (StateId p : rev[q])
            if (!can[p]) {
                can[p] = true;
                queue.push_back(p);
            }
    }
    return can;
}

class MachineCursor : public Cursor {
public:
    MachineCursor(std::shared_ptr<const Fst> m, std::unique_ptr<Cursor> in,
                  std::shared_ptr<const std::vector<bool>> can_emit)
        : m_(std::move(m)), in_(std::move(in)), can_emit_(std::move(can_emit)),
          q_(m_->initial()) {}

    std::optional<Run> next_run() override {
        while (true) {
            if (auto r = pending_.next_run()) return r;
            if (input_done_) return std::nullopt;
            if (!(*can_emit_)[q_]) return std::nullopt;  // output provably finite
            auto r = in_->next_run();
            if (!r) {
                input_done_ = true;
                continue;
            }
            std::vector<OutSegment> segs;
            if (r->infinite()) {
                advance_run_forever(*m_, q_, r->bit, &segs);
                input_done_ = true;
            } else {
                q_ = advance_run(*m_, q_, r->bit, *r->len, &segs);
            }
            bool emitted = !segs.empty();
            for (auto& s : segs) pending_.push(std::move(s.word), std::move(s.rep));
            if (!emitted && ++silent_pulls_ > (1u << 24))
                throw HorizonExhaustedError("machine made no output progress over 2^24 input runs");
            if (emitted) silent_pulls_ = 0;
        }
    }

private:
    std::shared_ptr<const Fst> m_;
    std::unique_ptr<Cursor> in_;
    std::shared_ptr<const std::vector<bool>> can_emit_;
    StateId q_;
    SegmentQueue pending_;
    bool input_done_ = false;
    std::uint32_t silent_pulls_ = 0;
};

}  // namespace detail

inline StateId state_after_run(const Fst& m, StateId q, Bit b, const Nat& count) {
    return detail::advance_run(m, q, b, count, nullptr);
}

// lambda(q, 1 0^zeros) materialized, with a guard against runaway sizes.
inline std::pair<StateId, Word> run_block(const Fst& m, StateId q, const Nat& zeros,
                                          std::size_t guard = (1u << 26)) {
    Word out = m.out(q, 1);
    q = m.next(q, 1);
    std::vector<OutSegment> segs;
    q = detail::advance_run(m, q, 0, zeros, &segs);
    for (const auto& s : segs) {
        Nat total = Nat(s.word.size()) * *s.rep;
        if (Nat(out.size()) + total > Nat(guard))
            throw HorizonExhaustedError("block output exceeds materialization guard");
        for (Nat i = 0; i < *s.rep; ++i) out.append(s.word);
    }
    return {q, std::move(out)};
}

// The transduct T(s), evaluated lazily. If the machine can provably emit
// nothing more, the stream ends; demanding past that end raises
// OutputExhaustedError in the consuming helpers.
inline Stream run_stream(const Fst& m, const Stream& s) {
    validate(m);
    auto shared = std::make_shared<const Fst>(m);
    auto can = std::make_shared<const std::vector<bool>>(detail::can_emit_set(m));
    return derived_stream([shared, s, can] {
        return std::make_unique<detail::MachineCursor>(shared, s.cursor(), can);
    });
}

// Wreath product: on each input bit the inner machine steps once and the
// outer machine consumes the inner's whole output word. Only pairs
// reachable from (inner initial, outer initial) are constructed.
inline Fst compose(const Fst& outer, const Fst& inner,
                   std::size_t state_budget = (1u << 21)) {
    validate(outer);
    validate(inner);
    Fst prod;
    prod.set_name(outer.name() + "." + inner.name());
    std::map<std::pair<StateId, StateId>, StateId> idx;
    std::vector<std::pair<StateId, StateId>> order;
    auto intern = [&](StateId p, StateId q) {
        auto [it, fresh] = idx.emplace(std::make_pair(p, q), static_cast<StateId>(idx.size()));
        if (fresh) {
            prod.add_state(inner.state_name(p) + "," + outer.state_name(q));
            order.emplace_back(p, q);
            if (idx.size() > state_budget)
                throw HorizonExhaustedError("composition exceeds state budget");
        }
        return it->second;
    };
    StateId init = intern(inner.initial(), outer.initial());
    prod.set_initial(init);
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto [p, q] = order[i];
        for (Bit b : {Bit{0}, Bit{1}}) {
            const Word& w = inner.out(p, b);
            auto [q2, wout] = run_word(outer, q, w);
            StateId to = intern(inner.next(p, b), q2);
            prod.set_transition(static_cast<StateId>(i), b, to, std::move(wout));
        }
    }
    validate(prod);
    return prod;
}

// --- zero-loop analysis and the pumping decomposition -----------------------

struct ZeroLoop {
    std::vector<StateId> cycle;  // simple 0-transition cycle, start not repeated
    std::size_t length() const { return cycle.size(); }
};

struct ZeroLoopReport {
    std::vector<ZeroLoop> loops;
    Nat z;  // lcm of all loop lengths, >= 1
};

// The 0-transitions form a functional graph (out-degree 1), so its simple
// cycles are disjoint and enumerable in linear time.
inline ZeroLoopReport zero_loops(const Fst& m) {
    validate(m);
    std::size_t n = m.state_count();
    std::vector<int> color(n, 0);  // 0 unvisited, 1 on stack, 2 done
    ZeroLoopReport rep;
    rep.z = 1;
    for (StateId s = 0; s < n; ++s) {
        if (color[s]) continue;
        std::vector<StateId> stack;
        std::unordered_map<StateId, std::size_t> pos;
        StateId cur = s;
        while (color[cur] == 0) {
            color[cur] = 1;
            pos[cur] = stack.size();
            stack.push_back(cur);
            cur = m.next(cur, 0);
        }
        if (color[cur] == 1) {  // fresh cycle
            ZeroLoop loop;
            for (std::size_t i = pos[cur]; i < stack.size(); ++i) loop.cycle.push_back(stack[i]);
            rep.z = int_lcm(rep.z, Nat(loop.length()));
            rep.loops.push_back(std::move(loop));
        }
        for (StateId q : stack) color[q] = 2;
    }
    return rep;
}

struct PumpDecomposition {
    StateId q;
    Nat n;
    Word p;       // lambda(q, 1 0^n)
    Word c;       // lambda(target, 0^Z)
    StateId target;
};

// Pumping decomposition: for n >= |Q|, lambda(q, 1 0^(n + i*Z)) = p c^i with
// delta fixed. Verified here for i = 0..8 before returning.
inline PumpDecomposition pump(const Fst& m, StateId q, const Nat& n) {
    validate(m);
    if (n < Nat(m.state_count()))
        throw PreconditionError("pump requires n >= |Q| (n = " + n.str() + ", |Q| = " +
                                std::to_string(m.state_count()) + ")");
    Nat z = zero_loops(m).z;
    auto [target, p] = run_block(m, q, n);
    std::vector<OutSegment> segs;
    StateId back = detail::advance_run(m, target, 0, z, &segs);
    if (back != target)
        throw std::logic_error("pump: state after 0^Z is not in its zero-loop");
    Word c;
    for (const auto& s : segs)
        for (Nat i = 0; i < *s.rep; ++i) c.append(s.word);
    for (int i = 0; i <= 8; ++i) {
        auto [t2, w2] = run_block(m, q, n + Nat(i) * z);
        if (t2 != target || w2 != p + c.repeated(i))
            throw std::logic_error("pump decomposition failed self-check at i=" + std::to_string(i));
    }
    return {q, n, std::move(p), std::move(c), target};
}

// --- textual format ----------------------------------------------------------
//
//   fst <name>
//   initial <state>
//   <state> <bit> -> <state> | <output-bits-or-->
//
// '#' starts a comment; unlisted (state, bit) pairs fail validation.

inline Fst parse_fst(std::istream& in) {
    Fst m;
    bool have_header = false, have_initial = false;
    std::string line;
    std::size_t line_no = 0;
    auto intern = [&m](const std::string& name) {
        if (auto q = m.find_state(name)) return *q;
        return m.add_state(name);
    };
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = split_tokens(line);
        if (toks.empty()) continue;
        if (!have_header) {
            if (toks.size() != 2 || toks[0] != "fst")
                throw ParseError("expected 'fst <name>' header", line_no);
            m.set_name(toks[1]);
            have_header = true;
            continue;
        }
        if (!have_initial) {
            if (toks.size() != 2 || toks[0] != "initial")
                throw ParseError("expected 'initial <state>'", line_no);
            m.set_initial(intern(toks[1]));
            have_initial = true;
            continue;
        }
        if (toks.size() != 6 || toks[2] != "->" || toks[4] != "|")
            throw ParseError("expected '<state> <bit> -> <state> | <output>'", line_no);
        if (toks[1] != "0" && toks[1] != "1") throw ParseError("bit must be 0 or 1", line_no);
        Bit b = toks[1] == "1" ? 1 : 0;
        StateId src = intern(toks[0]);
        StateId dst = intern(toks[3]);
        try {
            m.set_transition(src, b, dst, parse_word_or_dash(toks[5]));
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!have_header) throw ParseError("missing 'fst <name>' header");
    if (!have_initial) throw ParseError("missing 'initial <state>' line");
    validate(m);
    return m;
}

inline Fst parse_fst(const std::string& text) {
    std::istringstream is(text);
    return parse_fst(is);
}

inline std::string format_fst(const Fst& m) {
    std::ostringstream os;
    os << "fst " << m.name() << "\n";
    os << "initial " << m.state_name(m.initial()) << "\n";
    for (StateId q = 0; q < m.state_count(); ++q)
        for (Bit b : {Bit{0}, Bit{1}})
            os << m.state_name(q) << ' ' << int(b) << " -> " << m.state_name(m.next(q, b))
               << " | " << word_or_dash(m.out(q, b)) << "\n";
    return os.str();
}

// Single-state copier; the identity transduction.
inline Fst identity_fst() {
    Fst m;
    m.set_name("identity");
    StateId q = m.add_state("q0");
    m.set_initial(q);
    m.set_transition(q, 0, q, Word("0"));
    m.set_transition(q, 1, q, Word("1"));
    return m;
}

}  // namespace fstdeg
