#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fstdeg/degrees.hpp"
#include "fstdeg/lookahead.hpp"
#include "fstdeg/normalize.hpp"
#include "oracles.hpp"

using namespace fstdeg;

namespace {

BlockFun fn_n() { return BlockFun::polynomial({0, 1}); }
BlockFun fn_sq() { return BlockFun::polynomial({0, 0, 1}); }

std::vector<Nat> squares(std::size_t n) {
    std::vector<Nat> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(Nat(i) * Nat(i));
    return v;
}

}  // namespace

TEST_CASE("polynomial transduct normalization goldens") {
    Polynomial sq({0, 0, 1});
    CHECK(poly_transduct_normalize(sq, Weight({1}, 0), 0) == sq);

    Polynomial q1 = poly_transduct_normalize(sq, Weight({0, 2}, 0), 0);
    CHECK(q1 == Polynomial({2, 8, 8}));  // 2 (2n+1)^2 = 8n^2 + 8n + 2
    for (int n = 0; n <= 4; ++n) CHECK(q1.eval(n) == Rat(2) * Rat((2 * n + 1) * (2 * n + 1)));

    Polynomial lin({0, 1});
    CHECK(poly_transduct_normalize(lin, Weight({1, 1}, 0), 0) == Polynomial({1, 4}));

    CHECK_THROWS_AS(poly_transduct_normalize(sq, Weight({0, 0}, 3), 0), PreconditionError);
}

TEST_CASE("degree is preserved by normalization") {
    std::mt19937_64 rng(2718);
    for (int i = 0; i < 100; ++i) {
        std::size_t deg = 1 + rng() % 3;
        std::vector<Rat> cs;
        for (std::size_t j = 0; j < deg; ++j) cs.push_back(Rat(Int(rng() % 5)));
        cs.push_back(Rat(Int(1 + rng() % 4)));  // nonzero leading coefficient
        Polynomial p(cs);
        std::size_t k = 1 + rng() % 3;
        std::vector<Rat> as(k, Rat(0));
        as[rng() % k] = Rat(Int(1 + rng() % 3));
        if (rng() & 1) as[rng() % k] += Rat(Int(rng() % 3));
        Polynomial q = poly_transduct_normalize(p, Weight(as, Rat(Int(rng() % 4))), rng() % 5);
        CHECK(q.degree() == p.degree());
    }
}

TEST_CASE("single-weight projection") {
    WeightTuple example({Weight({1, 2, 3}, 4), Weight({0, 1}, 1)});
    OneWeightProjection pr = one_weight_project(example, 0);
    CHECK(pr.index == 0);
    CHECK(pr.beta == Weight({1, 2, 3, 0, 0}, 4));

    // the projected machine selects every m-th block: decoded blocks equal
    // the single-weight product
    DoubleProduct g{fn_n(), 0, Word(), example, {Word("1"), Word("1")}, {Word("0"), Word("0")}};
    Stream gstream = dp_emit(g);
    auto got = blocks_decode(run_stream(pr.machine, gstream), 16);
    for (std::size_t n = 0; n < 16; ++n)
        CHECK(Rat(got[n]) == wprod(WeightTuple({pr.beta}), fn_n(), Nat(n)));
    CHECK(got[0] == 12);
    CHECK(got[1] == 42);

    // m=1 projects to the weight itself through an identity-like machine
    WeightTuple single({Weight({2, 1}, 0)});
    OneWeightProjection pr1 = one_weight_project(single, 3);
    CHECK(pr1.beta == single[0]);
    CHECK(pr1.shift == 3);
    CHECK(streams_equal(run_stream(pr1.machine, blocks_encode(fn_n())),
                        blocks_encode(fn_n()), 512));

    CHECK_THROWS_AS(one_weight_project(WeightTuple({Weight({0}, 3)}), 0), PreconditionError);
}

TEST_CASE("squares chain worked instances") {
    SECTION("(1,0,0): merge lands on 8n^2+16n+6") {
        ReductionChain ch = squares_chain(1, 0, 0);
        ChainReport rep = ch.verify(12);
        CHECK(rep.ok);
        bool found_merge = false;
        for (std::size_t i = 0; i < ch.steps.size(); ++i)
            if (ch.steps[i].desc.rfind("merge-pair", 0) == 0) {
                found_merge = true;
                CHECK(rep.steps[i].blocks ==
                      std::vector<Nat>{6, 30, 70, 126, 198, 286, 390, 510, 646, 798, 966, 1150});
            }
        CHECK(found_merge);
        CHECK(rep.final_blocks == squares(12));
    }
    SECTION("(2,3,1): the direct branch") {
        ChainReport rep = squares_chain(2, 3, 1).verify(12);
        CHECK(rep.ok);
        CHECK(rep.final_blocks == squares(12));
    }
    SECTION("(1,5,0): subsampling with d=3 first") {
        ReductionChain ch = squares_chain(1, 5, 0);
        bool has_subsample = false;
        for (const ChainStep& st : ch.steps)
            if (st.desc == "subsample 3") has_subsample = true;
        CHECK(has_subsample);
        ChainReport rep = ch.verify(12);
        CHECK(rep.ok);
        CHECK(rep.final_blocks == squares(12));
    }
    SECTION("composed machine agrees with the step list") {
        ReductionChain ch = squares_chain(2, 1, 2);
        Fst whole = ch.composed();
        auto got = blocks_decode(run_stream(whole, blocks_encode(ch.source)), 12);
        CHECK(got == squares(12));
    }
}

TEST_CASE("exponential chain") {
    ChainReport r1 = exp_chain(1).verify(8);
    CHECK(r1.ok);
    CHECK(r1.final_blocks ==
          std::vector<Nat>{1, 4, 16, 64, 256, 1024, 4096, 16384});

    ChainReport r2 = exp_chain(2).verify(8);
    CHECK(r2.ok);
    CHECK(r2.final_blocks[2] == 256);

    // block values up to 2^56 exercise arbitrary precision end to end
    ChainReport r4 = exp_chain(4).verify(8);
    CHECK(r4.ok);
    CHECK(r4.final_blocks[7] == Nat(1) << 56);

    // degenerate scale: <s 2^(nk) + b> == <2^(nk)> via y-shift then scaling
    Nat s = 5, b = 3;
    Fst normalize_g = compose(build_basic(ScaleDown{s}), build_basic(YShiftSub{b}));
    std::vector<Nat> expect;
    for (int n = 0; n < 8; ++n) expect.push_back(BlockFun::exponential(2)(n));
    // feed <s 2^n + b>, built by machines from <2^n>
    Stream src = run_stream(build_basic(YShiftAdd{b}),
                            run_stream(build_basic(ScaleUp{s}),
                                       blocks_encode(BlockFun::exponential(2))));
    auto got = blocks_decode(run_stream(normalize_g, src), 8);
    CHECK(got == expect);
}

TEST_CASE("growth comparison") {
    CHECK(growth_dominates(fn_sq(), fn_n()));
    CHECK(growth_dominates(BlockFun::exponential(4), BlockFun::exponential(2)));
    CHECK_FALSE(growth_dominates(fn_n(), fn_n()));
    CHECK(growth_dominates(BlockFun::exponential(2), BlockFun::polynomial({0, 0, 0, 0, 1})));
    CHECK_FALSE(growth_dominates(fn_sq(), BlockFun::exponential(2)));
    CHECK_FALSE(growth_dominates(BlockFun::floor_div(7), fn_n()));
    CHECK(growth_dominates(fn_sq(), BlockFun::floor_div(3)));
    CHECK(growth_dominates(BlockFun::table_then_tail({9, 9}, fn_sq()), fn_n()));
}

TEST_CASE("ultimately periodic prefix scan") {
    CHECK(prefix_looks_ultimately_periodic(prefix(up_stream(Word("1101"), Word("0110")), 4096)));
    CHECK_FALSE(prefix_looks_ultimately_periodic(prefix(builtin_stream("thue-morse"), 4096)));
    CHECK_FALSE(prefix_looks_ultimately_periodic(prefix(blocks_encode(fn_sq()), 4096)));
}

TEST_CASE("atom witness: random transducts of the squares sequence return to it") {
    std::mt19937_64 rng(60902);
    int done = 0, attempts = 0;
    while (done < 5 && attempts < 400) {
        ++attempts;
        Fst t = oracles::random_fst(rng, 3);
        Stream sigma = run_stream(t, blocks_encode(fn_sq()));
        Word scan;
        try {
            scan = prefix(sigma, 8192);
        } catch (const OutputExhaustedError&) {
            continue;
        }
        if (prefix_looks_ultimately_periodic(scan)) continue;

        auto cert = certify_spiralling(fn_sq(), {zero_loops(t).z}, 4096);
        auto ex = extract_transduct(t, fn_sq(), cert);
        auto dis = disambiguate(ex.dp);
        if (std::holds_alternative<UltimatelyPeriodicVerdict>(dis)) continue;
        const DoubleProduct& dp = std::get<DoubleProduct>(dis);
        CanonicalForm cf = dp_to_canonical(dp);

        // sigma' -> <g'> by the discriminator, then project one weight,
        // scale to integer coefficients, and run the squares chain
        OneWeightProjection pr = one_weight_project(cf.alphas, cf.shift);
        Polynomial q = poly_transduct_normalize(Polynomial({0, 0, 1}), pr.beta, cf.shift);
        Int den = 1;
        for (const Rat& co : q.coeffs()) den = int_lcm(den, denominator(co));
        Polynomial qi = q.scaled(Rat(den));
        REQUIRE(qi.natural_coeffs());
        const auto& cs = qi.coeffs();
        ReductionChain chain =
            squares_chain(numerator(cs[2]), numerator(cs.size() > 1 ? cs[1] : Rat(0)),
                          numerator(cs[0]));

        Fst tail = chain.composed();
        tail = compose(tail, build_basic(ScaleUp{den}));
        tail = compose(tail, pr.machine);

        Stream sigma_prime = dp_emit(cf.sigma_prime);
        Stream gprime = la_run(cf.forth, sigma_prime);
        auto got = blocks_decode(run_stream(tail, gprime), 10);
        CHECK(got == squares(10));
        ++done;
    }
    CHECK(done == 5);
}
