#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fstdeg/fst.hpp"
#include "oracles.hpp"

using namespace fstdeg;

namespace {

// Figure-style machine: sum of consecutive bits modulo 2.
Fst fig1() {
    return parse_fst(std::string("fst fig1\n"
                                 "initial q0\n"
                                 "q0 0 -> q1 | -\n"
                                 "q0 1 -> q2 | -\n"
                                 "q1 0 -> q1 | 0\n"
                                 "q1 1 -> q2 | 1\n"
                                 "q2 0 -> q1 | 1\n"
                                 "q2 1 -> q2 | 0\n"));
}

// Two-state machine with 0-self-loops emitting 01 / 10.
Fst ex3() {
    return parse_fst(std::string("fst ex3\n"
                                 "initial q0\n"
                                 "q0 0 -> q0 | 01\n"
                                 "q0 1 -> q1 | 1\n"
                                 "q1 0 -> q1 | 10\n"
                                 "q1 1 -> q0 | 1\n"));
}

// Three-state machine whose 0-transitions form a 3-cycle.
Fst ex2() {
    return parse_fst(std::string("fst ex2\n"
                                 "initial q0\n"
                                 "q0 0 -> q1 | 00\n"
                                 "q0 1 -> q2 | 1\n"
                                 "q1 0 -> q2 | 01\n"
                                 "q1 1 -> q0 | 1\n"
                                 "q2 0 -> q0 | 10\n"
                                 "q2 1 -> q1 | 1\n"));
}

Stream seq_n() { return blocks_encode(BlockFun::polynomial({0, 1})); }

}  // namespace

TEST_CASE("validation accepts complete machines and rejects broken ones") {
    CHECK_NOTHROW(validate(fig1()));
    CHECK_NOTHROW(validate(identity_fst()));

    CHECK_THROWS_AS(parse_fst(std::string("fst broken\ninitial q0\nq0 0 -> q0 | 0\n")),
                    ValidationError);  // missing (q0, 1)
    CHECK_THROWS_AS(parse_fst(std::string("fst dup\ninitial q0\n"
                                          "q0 0 -> q0 | 0\nq0 0 -> q0 | 1\nq0 1 -> q0 | 1\n")),
                    ParseError);  // duplicate transition
    CHECK_THROWS_AS(parse_fst(std::string("initial q0\n")), ParseError);
}

TEST_CASE("run_word goldens") {
    Fst m = fig1();
    auto [q, out] = run_word(m, m.initial(), Word("01101001"));
    CHECK(out == Word("1011101"));
    CHECK(m.state_name(q) == "q2");

    auto [q2, eps] = run_word(m, m.initial(), Word());
    CHECK(q2 == m.initial());
    CHECK(eps.empty());

    Fst e3 = ex3();
    auto [q3, out3] = run_word(e3, e3.initial(), Word("110"));
    CHECK(out3 == Word("1101"));
    CHECK(e3.state_name(q3) == "q0");
}

TEST_CASE("run_stream goldens") {
    CHECK(prefix(run_stream(fig1(), builtin_stream("thue-morse")), 63) ==
          prefix(builtin_stream("period-doubling"), 63));
    CHECK(prefix(run_stream(identity_fst(), seq_n()), 256) == prefix(seq_n(), 256));
    CHECK(prefix(run_stream(ex3(), seq_n()), 16).str() == "1101110101010101");
}

TEST_CASE("run_stream matches the naive bit-at-a-time simulator") {
    std::mt19937_64 rng(1001);
    for (int i = 0; i < 50; ++i) {
        Fst m = oracles::random_fst(rng, 4);
        Stream in = (i % 3 == 0) ? seq_n() : oracles::random_up_stream(rng);
        std::string input = prefix(in, 512).str();
        std::string expect = oracles::naive_transduce(m, input);
        Word got;
        try {
            got = prefix(run_stream(m, in), expect.size());
        } catch (const OutputExhaustedError&) {
            continue;  // machine provably falls silent; nothing to compare
        }
        CHECK(got.str() == expect.substr(0, got.size()));
        CHECK(got.size() == expect.size());
    }
}

TEST_CASE("machines that fall silent exhaust their output stream") {
    Fst m = parse_fst(std::string("fst silent\ninitial a\n"
                                  "a 0 -> b | 1\na 1 -> b | 1\n"
                                  "b 0 -> b | -\nb 1 -> b | -\n"));
    Stream out = run_stream(m, seq_n());
    CHECK(prefix(out, 1).str() == "1");
    CHECK_THROWS_AS(prefix(out, 2), OutputExhaustedError);
}

TEST_CASE("extended transition and output maps are morphic") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 40; ++i) {
        Fst m = oracles::random_fst(rng, 4);
        Word u = oracles::random_word(rng, 32);
        Word v = oracles::random_word(rng, 32);
        for (StateId q = 0; q < m.state_count(); ++q) {
            auto [qu, wu] = run_word(m, q, u);
            auto [quv, wuv] = run_word(m, q, u + v);
            auto [qv, wv] = run_word(m, qu, v);
            CHECK(quv == qv);
            CHECK(wuv == wu + wv);
        }
    }
}

TEST_CASE("outputs preserve prefixes") {
    std::mt19937_64 rng(78);
    for (int i = 0; i < 40; ++i) {
        Fst m = oracles::random_fst(rng, 4);
        Word v = oracles::random_word(rng, 32);
        Word u = v.prefix(rng() % (v.size() + 1));
        CHECK(run_word(m, m.initial(), u).second.is_prefix_of(
            run_word(m, m.initial(), v).second));
    }
}

TEST_CASE("composition is the wreath product") {
    Fst m = fig1();
    SECTION("identity laws") {
        CHECK(prefix(run_stream(compose(identity_fst(), m), builtin_stream("thue-morse")), 256) ==
              prefix(run_stream(m, builtin_stream("thue-morse")), 256));
        CHECK(prefix(run_stream(compose(m, identity_fst()), builtin_stream("thue-morse")), 256) ==
              prefix(run_stream(m, builtin_stream("thue-morse")), 256));
    }
    SECTION("double application") {
        Stream twice = run_stream(m, run_stream(m, builtin_stream("thue-morse")));
        Stream composed = run_stream(compose(m, m), builtin_stream("thue-morse"));
        CHECK(prefix(composed, 64) == prefix(twice, 64));
    }
    SECTION("associativity on prefixes") {
        std::mt19937_64 rng(5150);
        for (int i = 0; i < 20; ++i) {
            Fst a = oracles::random_fst(rng, 4);
            Fst b = oracles::random_fst(rng, 4);
            Fst c = oracles::random_fst(rng, 4);
            Stream in = oracles::random_up_stream(rng);
            Fst left = compose(compose(a, b), c);
            Fst right = compose(a, compose(b, c));
            Word wl, wr;
            try {
                wl = prefix(run_stream(left, in), 512);
                wr = prefix(run_stream(right, in), 512);
            } catch (const OutputExhaustedError&) {
                continue;
            }
            CHECK(wl == wr);
        }
    }
}

TEST_CASE("zero-loop reports") {
    ZeroLoopReport r3 = zero_loops(ex3());
    REQUIRE(r3.loops.size() == 2);
    CHECK(r3.loops[0].length() == 1);
    CHECK(r3.loops[1].length() == 1);
    CHECK(r3.z == 1);

    ZeroLoopReport r2 = zero_loops(ex2());
    REQUIRE(r2.loops.size() == 1);
    CHECK(r2.loops[0].length() == 3);
    CHECK(r2.z == 3);

    ZeroLoopReport r1 = zero_loops(fig1());
    REQUIRE(r1.loops.size() == 1);
    CHECK(r1.loops[0].length() == 1);
    CHECK(r1.z == 1);

    // z is the lcm of the lengths: every length divides z, and the lcm of
    // the lengths divides z
    std::mt19937_64 rng(31);
    for (int i = 0; i < 40; ++i) {
        ZeroLoopReport r = zero_loops(oracles::random_fst(rng, 6));
        REQUIRE_FALSE(r.loops.empty());
        Nat l = 1;
        for (const ZeroLoop& loop : r.loops) {
            CHECK(r.z % Nat(loop.length()) == 0);
            l = int_lcm(l, Nat(loop.length()));
        }
        CHECK(l == r.z);
    }
}

TEST_CASE("pumping decomposition goldens") {
    Fst e3 = ex3();
    PumpDecomposition pd = pump(e3, e3.state("q0"), 2);
    CHECK(pd.p == Word("11010"));
    CHECK(pd.c == Word("10"));

    Fst id = identity_fst();
    PumpDecomposition pid = pump(id, id.initial(), 1);
    CHECK(pid.p == Word("10"));
    CHECK(pid.c == Word("0"));

    CHECK_THROWS_AS(pump(e3, e3.state("q0"), 1), PreconditionError);

    // Ex. 2: c = lambda(target, 0^3), and the p c^i law holds for i <= 8
    Fst e2 = ex2();
    PumpDecomposition p2 = pump(e2, e2.state("q0"), 3);
    auto [tgt, pword] = run_word(e2, e2.state("q0"), Word("1000"));
    CHECK(p2.p == pword);
    CHECK(p2.c == run_word(e2, tgt, Word("000")).second);
    for (int i = 0; i <= 8; ++i) {
        Word input("1");
        input.append(Word::zeros(3 + 3 * i));
        auto [t, w] = run_word(e2, e2.state("q0"), input);
        CHECK(t == p2.target);
        CHECK(w == p2.p + p2.c.repeated(i));
    }
}

TEST_CASE("run-length fast-forward agrees with naive stepping") {
    std::mt19937_64 rng(90);
    for (int i = 0; i < 30; ++i) {
        Fst m = oracles::random_fst(rng, 5);
        StateId q = static_cast<StateId>(rng() % m.state_count());
        Bit b = rng() & 1;
        Nat count = rng() % 10000;
        StateId naive = q;
        std::string out;
        for (Nat k = 0; k < count; ++k) {
            out += m.out(naive, b).str();
            naive = m.next(naive, b);
        }
        std::vector<OutSegment> segs;
        StateId fast = fstdeg::detail::advance_run(m, q, b, count, &segs);
        std::string flat;
        for (const auto& s : segs)
            for (Nat r = 0; r < *s.rep; ++r) flat += s.word.str();
        CHECK(fast == naive);
        CHECK(flat == out);
    }
}

TEST_CASE("machine format round trip") {
    for (const Fst& m : {fig1(), ex3(), ex2(), identity_fst()}) {
        Fst back = parse_fst(format_fst(m));
        CHECK(back.state_count() == m.state_count());
        CHECK(prefix(run_stream(back, seq_n()), 512) == prefix(run_stream(m, seq_n()), 512));
    }
}
