#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fstdeg/stream.hpp"
#include "oracles.hpp"

using namespace fstdeg;

static BlockFun fn_n() { return BlockFun::polynomial({0, 1}); }
static BlockFun fn_sq() { return BlockFun::polynomial({0, 0, 1}); }

TEST_CASE("block encoding of the identity and squares sequences") {
    CHECK(prefix(blocks_encode(fn_n()), 10).str() == "1101001000");
    CHECK(prefix(blocks_encode(BlockFun::polynomial({0})), 8).str() == "11111111");
    // squares: 1 0^0 1 0^1 1 0^4 1 0^9
    CHECK(prefix(blocks_encode(fn_sq()), 18).str() ==
          oracles::blocks_expand(fn_sq(), 4).substr(0, 18));
    CHECK(oracles::blocks_expand(fn_sq(), 4) == "110100001000000000");
}

TEST_CASE("block decoding returns exactly the terminated blocks") {
    CHECK(blocks_decode(blocks_encode(fn_n()), 4) == std::vector<Nat>{0, 1, 2, 3});
    CHECK(blocks_decode(up_stream(Word(), Word("1")), 3) == std::vector<Nat>{0, 0, 0});
    CHECK(blocks_decode(blocks_encode(fn_sq()), 4) == std::vector<Nat>{0, 1, 4, 9});

    CHECK_THROWS_AS(blocks_decode(up_stream(Word(), Word("01")), 2), BlockDecodeError);
    // a stream that is all zeros after some point never terminates its block
    CHECK_THROWS_AS(blocks_decode(up_stream(Word("1"), Word("0")), 2), BlockDecodeError);
}

TEST_CASE("decode round trip across every block-function family") {
    std::vector<BlockFun> fs = {
        fn_n(),
        BlockFun::polynomial({0}),
        fn_sq(),
        BlockFun::exponential(2),
        BlockFun::floor_div(2),
        BlockFun::table_then_tail({5, 0, 3}, fn_n()),
        fn_n().shifted(7),
        BlockFun::exponential(3, 2).shifted(1),
    };
    for (const BlockFun& f : fs) {
        auto got = blocks_decode(blocks_encode(f), 64);
        for (std::size_t n = 0; n < 64; ++n) {
            INFO(f.describe() << " at block " << n);
            CHECK(got[n] == f(Nat(n)));
        }
    }
}

TEST_CASE("builtin sequences match their classical prefixes") {
    CHECK(prefix(builtin_stream("thue-morse"), 8).str() == "01101001");
    CHECK(prefix(builtin_stream("period-doubling"), 16).str() == "1011101010111011");
    CHECK(prefix(builtin_stream("thue-morse"), 0).str() == "");
    CHECK_THROWS_AS(builtin_stream("nonesuch"), ParseError);
}

TEST_CASE("ultimately periodic equality golden cases") {
    CHECK(up_equal(Word(), Word("01"), Word("0"), Word("10")));
    CHECK_FALSE(up_equal(Word(), Word("0"), Word(), Word("1")));
    CHECK(up_equal(Word(), Word("0101"), Word(), Word("01")));
    CHECK_THROWS_AS(up_equal(Word(), Word(), Word(), Word("1")), PreconditionError);
}

TEST_CASE("up_equal agrees with long brute-force comparison and is an equivalence") {
    std::mt19937_64 rng(42);
    std::vector<std::pair<Word, Word>> reprs;
    for (int i = 0; i < 20; ++i)
        reprs.emplace_back(oracles::random_word(rng, 4), oracles::random_word(rng, 4, 1));
    for (int i = 0; i < 200; ++i) {
        auto& [u1, v1] = reprs[rng() % reprs.size()];
        auto& [u2, v2] = reprs[rng() % reprs.size()];
        std::size_t bound = std::max(u1.size(), u2.size()) +
                            10 * to_size(int_lcm(Nat(v1.size()), Nat(v2.size())));
        bool brute = oracles::up_expand(u1, v1, bound) == oracles::up_expand(u2, v2, bound);
        CHECK(up_equal(u1, v1, u2, v2) == brute);
    }
    // reflexive, symmetric, transitive on a random sample
    for (int i = 0; i < 50; ++i) {
        auto& [u1, v1] = reprs[rng() % reprs.size()];
        auto& [u2, v2] = reprs[rng() % reprs.size()];
        auto& [u3, v3] = reprs[rng() % reprs.size()];
        CHECK(up_equal(u1, v1, u1, v1));
        CHECK(up_equal(u1, v1, u2, v2) == up_equal(u2, v2, u1, v1));
        if (up_equal(u1, v1, u2, v2) && up_equal(u2, v2, u3, v3))
            CHECK(up_equal(u1, v1, u3, v3));
    }
}

TEST_CASE("bit-level shifting") {
    CHECK(prefix(shift_stream(blocks_encode(fn_n()), 1), 9).str() == "101001000");
    CHECK(prefix(shift_stream(blocks_encode(fn_n()), 2), 8).str() == "01001000");

    // shifting u.v^omega by |u| leaves v^omega, with the family preserved
    Stream s = shift_stream(up_stream(Word("110"), Word("01")), 3);
    const auto* up = s.family_as<FamilyUltimatelyPeriodic>();
    REQUIRE(up != nullptr);
    CHECK(up->u.empty());
    CHECK(up_equal(up->u, up->v, Word(), Word("01")));
}

TEST_CASE("prefix splits across shifts") {
    std::mt19937_64 rng(7);
    std::vector<Stream> ss = {blocks_encode(fn_sq()), builtin_stream("thue-morse"),
                              oracles::random_up_stream(rng)};
    for (const Stream& s : ss)
        for (std::size_t n : {0u, 1u, 5u, 17u})
            for (std::size_t m : {0u, 3u, 11u}) {
                Word whole = prefix(s, n + m);
                Word split = prefix(s, n) + prefix(shift_stream(s, Nat(n)), m);
                CHECK(whole == split);
            }
}

TEST_CASE("block streams have a 1 in every window longer than the largest block") {
    for (const BlockFun& f : {fn_n(), fn_sq(), BlockFun::floor_div(2)}) {
        Nat fmax = 0;
        for (int n = 0; n < 64; ++n) fmax = std::max(fmax, f(n));
        // equivalent run formulation: no zero-run among the first 64 blocks
        // exceeds the largest block length
        auto cur = blocks_encode(f).cursor();
        Nat ones_seen = 0;
        while (ones_seen < 64) {
            auto r = cur->next_run();
            REQUIRE(r.has_value());
            REQUIRE_FALSE(r->infinite());
            if (r->bit == 1)
                ones_seen += *r->len;
            else
                CHECK(*r->len <= fmax);
        }
    }
}

TEST_CASE("sequence spec mini-language") {
    CHECK(prefix(parse_seq_spec("blocks poly 0 1"), 10).str() == "1101001000");
    CHECK(prefix(parse_seq_spec("up - 01"), 6).str() == "010101");
    CHECK(prefix(parse_seq_spec("up 1 0"), 4).str() == "1000");
    CHECK(prefix(parse_seq_spec("builtin thue-morse shift 1"), 7).str() == "1101001");
    // for blocks the shift is a function shift: S^2 n = n + 2
    CHECK(blocks_decode(parse_seq_spec("blocks poly 0 1 shift 2"), 3) ==
          std::vector<Nat>{2, 3, 4});
    CHECK(blocks_decode(parse_seq_spec("blocks exp 2 3"), 3) == std::vector<Nat>{3, 6, 12});
    CHECK(blocks_decode(parse_seq_spec("blocks floordiv 3"), 7) ==
          std::vector<Nat>{0, 0, 0, 1, 1, 1, 2});

    CHECK_THROWS_AS(parse_seq_spec(""), ParseError);
    CHECK_THROWS_AS(parse_seq_spec("up 01"), ParseError);
    CHECK_THROWS_AS(parse_seq_spec("blocks quux 1"), ParseError);
    CHECK_THROWS_AS(parse_seq_spec("blocks poly"), ParseError);
    CHECK_THROWS_AS(parse_blockfun_spec("builtin thue-morse"), ParseError);
}

TEST_CASE("huge blocks stay run-compressed") {
    // <2^n> around block 200: prefix comparison and decoding must not
    // materialize the 2^200-zero block
    BlockFun f = BlockFun::exponential(2);
    auto vals = blocks_decode(blocks_encode(f), 201);
    CHECK(vals[200] == Nat(1) << 200);
    CHECK(streams_equal(blocks_encode(f), blocks_encode(f), Nat(1) << 64));
}
