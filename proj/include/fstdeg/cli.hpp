#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fstdeg/construct.hpp"
#include "fstdeg/degrees.hpp"
#include "fstdeg/error.hpp"
#include "fstdeg/fst.hpp"
#include "fstdeg/lookahead.hpp"
#include "fstdeg/normalize.hpp"
#include "fstdeg/stream.hpp"
#include "fstdeg/weights.hpp"

namespace fstdeg::cli {

// FSTDEG_HORIZON overrides the default verification horizon: its value is
// the bit horizon (default 4096); the block horizon is bits/128 (default 32).
struct Horizons {
    std::size_t bits = 4096;
    std::size_t blocks = 32;
};

inline Horizons horizons_from_env() {
    Horizons h;
    if (const char* env = std::getenv("FSTDEG_HORIZON")) {
        try {
            h.bits = to_size(parse_nat(env, "FSTDEG_HORIZON"));
        } catch (const Error&) {
            throw ParseError("FSTDEG_HORIZON must be a natural number");
        }
        h.blocks = std::max<std::size_t>(1, h.bits / 128);
    }
    return h;
}

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw Error("cannot write file: " + path);
    f << text;
}

inline std::string join_blocks(const std::vector<Nat>& vals) {
    std::string s;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) s += ' ';
        s += vals[i].str();
    }
    return s;
}

inline int report_chain(const ReductionChain& chain, std::size_t blocks, std::ostream& out) {
    out << "pipeline " << chain.description << "\n";
    ChainReport rep = chain.verify(blocks);
    for (std::size_t i = 0; i < rep.steps.size(); ++i) {
        const StepReport& sr = rep.steps[i];
        out << "step " << i << ' ' << sr.desc << " states=" << sr.states
            << (sr.ok ? " ok" : " FAIL") << "\n";
        out << "blocks after step " << i << ": " << join_blocks(sr.blocks) << "\n";
    }
    out << "final blocks: " << join_blocks(rep.final_blocks) << (rep.ok ? " ok" : " FAIL")
        << "\n";
    return rep.ok ? 0 : 1;
}

}  // namespace detail

// Entry point shared by the binary and the tests. Exit status: 0 on
// success/equality, 1 on verified inequality or verdicts, 2 on usage or
// format errors.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"finite-state transducer degree toolkit"};
    app.require_subcommand(1);
    Horizons hz;

    // run
    std::string run_fst, run_spec;
    std::size_t run_bits = 0, run_blocks = 0;
    auto* c_run = app.add_subcommand("run", "run a machine on a sequence");
    c_run->add_option("fst-file", run_fst)->required();
    c_run->add_option("seq-spec", run_spec)->required();
    auto* opt_bits = c_run->add_option("--bits", run_bits, "print this many output bits");
    auto* opt_blocks = c_run->add_option("--blocks", run_blocks, "print this many decoded blocks");
    opt_bits->excludes(opt_blocks);

    // compose
    std::vector<std::string> comp_files;
    std::string comp_out;
    auto* c_comp = app.add_subcommand("compose", "wreath product, first file applied first");
    c_comp->add_option("fst-file", comp_files)->required()->expected(-1);
    c_comp->add_option("-o,--output", comp_out, "output file (default stdout)");

    // analyze
    std::string ana_fst;
    auto* c_ana = app.add_subcommand("analyze", "zero-loops, Z, pump decompositions");
    c_ana->add_option("fst-file", ana_fst)->required();

    // build
    auto* c_build = app.add_subcommand("build", "emit a constructed machine");
    c_build->require_subcommand(1);
    std::vector<std::string> basic_toks;
    std::string build_out;
    auto* c_basic = c_build->add_subcommand("basic", "block-level operation machine");
    c_basic->add_option("op-spec", basic_toks, "e.g. scale-up 2 | merge-pair 1 2")
        ->required()
        ->expected(-1);
    c_basic->add_option("-o,--output", build_out);
    std::vector<std::string> exp_ps, exp_cs;
    std::string expander_out;
    auto* c_expander = c_build->add_subcommand("expander", "block expander from p/c tuples");
    c_expander->add_option("--p", exp_ps, "p words, - for empty")->required()->expected(-1);
    c_expander->add_option("--c", exp_cs, "c words, - for empty")->required()->expected(-1);
    c_expander->add_option("-o,--output", expander_out);
    std::string wprod_file, wprod_out;
    auto* c_bwprod = c_build->add_subcommand("wprod", "weighted-product machine");
    c_bwprod->add_option("weights-file", wprod_file)->required();
    c_bwprod->add_option("-o,--output", wprod_out);

    // wprod evaluation
    std::string wv_file, wv_spec;
    std::size_t wv_n = 8;
    auto* c_wprod = app.add_subcommand("wprod", "evaluate a weighted product");
    c_wprod->add_option("weights-file", wv_file)->required();
    c_wprod->add_option("seq-spec", wv_spec)->required();
    c_wprod->add_option("--n", wv_n, "number of values");

    // extract
    std::string ex_fst, ex_spec;
    auto* c_ex = app.add_subcommand("extract", "double product of a transduct");
    c_ex->add_option("fst-file", ex_fst)->required();
    c_ex->add_option("seq-spec", ex_spec)->required();

    // normalize
    std::string norm_file;
    auto* c_norm = app.add_subcommand("normalize", "disambiguate a double product");
    c_norm->add_option("dp-file", norm_file)->required();

    // pipeline
    auto* c_pipe = app.add_subcommand("pipeline", "degree reduction chains");
    c_pipe->require_subcommand(1);
    std::string sq_a, sq_b, sq_c;
    std::size_t verify_blocks = 0;
    auto* c_sq = c_pipe->add_subcommand("squares", "<a n^2 + b n + c> back to <n^2>");
    c_sq->add_option("a", sq_a)->required();
    c_sq->add_option("b", sq_b)->required();
    c_sq->add_option("c", sq_c)->required();
    c_sq->add_option("--verify-blocks", verify_blocks);
    std::string exp_k;
    auto* c_expc = c_pipe->add_subcommand("exp", "<2^(nk)> to <2^(2nk)>");
    c_expc->add_option("k", exp_k)->required();
    c_expc->add_option("--verify-blocks", verify_blocks);

    // verify-eq
    std::string eq_s1, eq_s2;
    std::size_t eq_bits = 0;
    auto* c_eq = app.add_subcommand("verify-eq", "prefix equality of two sequences");
    c_eq->add_option("spec1", eq_s1)->required();
    c_eq->add_option("spec2", eq_s2)->required();
    c_eq->add_option("--bits", eq_bits);

    try {
        hz = horizons_from_env();
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));

        if (c_run->parsed()) {
            Fst m = parse_fst(detail::read_file(run_fst));
            Stream s = run_stream(m, parse_seq_spec(run_spec));
            if (opt_blocks->count())
                out << detail::join_blocks(blocks_decode(s, run_blocks)) << "\n";
            else
                out << prefix(s, opt_bits->count() ? run_bits : hz.bits).str() << "\n";
            return 0;
        }
        if (c_comp->parsed()) {
            Fst acc = parse_fst(detail::read_file(comp_files[0]));
            for (std::size_t i = 1; i < comp_files.size(); ++i)
                acc = compose(parse_fst(detail::read_file(comp_files[i])), acc);
            detail::write_output(comp_out, format_fst(acc), out);
            return 0;
        }
        if (c_ana->parsed()) {
            Fst m = parse_fst(detail::read_file(ana_fst));
            out << "fst " << m.name() << ": " << m.state_count() << " states\n";
            ZeroLoopReport zl = zero_loops(m);
            for (const ZeroLoop& l : zl.loops) {
                out << "zero-loop:";
                for (StateId q : l.cycle) out << ' ' << m.state_name(q);
                out << " (length " << l.length() << ")\n";
            }
            out << "Z = " << zl.z.str() << "\n";
            for (StateId q = 0; q < m.state_count(); ++q) {
                PumpDecomposition pd = pump(m, q, Nat(m.state_count()));
                out << "pump " << m.state_name(q) << ": n=" << pd.n.str() << " p="
                    << word_or_dash(pd.p) << " c=" << word_or_dash(pd.c)
                    << " target=" << m.state_name(pd.target) << "\n";
            }
            return 0;
        }
        if (c_basic->parsed()) {
            Fst m = build_basic(parse_basic_op(basic_toks));
            detail::write_output(build_out, format_fst(m), out);
            return 0;
        }
        if (c_expander->parsed()) {
            std::vector<Word> ps, cs;
            for (const auto& s : exp_ps) ps.push_back(parse_word_or_dash(s));
            for (const auto& s : exp_cs) cs.push_back(parse_word_or_dash(s));
            detail::write_output(expander_out, format_fst(build_block_expander(ps, cs)), out);
            return 0;
        }
        if (c_bwprod->parsed()) {
            WeightTuple ws = parse_weight_tuple(detail::read_file(wprod_file));
            detail::write_output(wprod_out, format_fst(build_wprod_fst(ws)), out);
            return 0;
        }
        if (c_wprod->parsed()) {
            WeightTuple ws = parse_weight_tuple(detail::read_file(wv_file));
            BlockFun f = parse_blockfun_spec(wv_spec);
            std::string line;
            for (std::size_t i = 0; i < wv_n; ++i) {
                if (i) line += ' ';
                line += rat_str(wprod(ws, f, Nat(i)));
            }
            out << line << "\n";
            return 0;
        }
        if (c_ex->parsed()) {
            Fst m = parse_fst(detail::read_file(ex_fst));
            BlockFun f = parse_blockfun_spec(ex_spec);
            Nat z = zero_loops(m).z;
            SpirallingCertificate cert = certify_spiralling(f, {z}, Nat(hz.bits));
            TransductExtraction ex = extract_transduct(m, f, cert);
            out << "# z=" << ex.z.str() << " n0=" << ex.n0.str() << " m=" << ex.m.str() << "\n";
            out << format_dp(ex.dp);
            return 0;
        }
        if (c_norm->parsed()) {
            DoubleProduct dp = parse_dp(detail::read_file(norm_file));
            DisambiguateResult r = disambiguate(dp, std::min<std::size_t>(2048, hz.bits));
            if (std::holds_alternative<UltimatelyPeriodicVerdict>(r)) {
                out << "ULTIMATELY-PERIODIC\n";
                return 1;
            }
            out << format_dp(std::get<DoubleProduct>(r));
            return 0;
        }
        if (c_sq->parsed())
            return detail::report_chain(squares_chain(parse_nat(sq_a), parse_nat(sq_b),
                                                      parse_nat(sq_c)),
                                        verify_blocks ? verify_blocks : hz.blocks, out);
        if (c_expc->parsed())
            return detail::report_chain(exp_chain(parse_nat(exp_k)),
                                        verify_blocks ? verify_blocks : std::min<std::size_t>(
                                                                            hz.blocks, 10),
                                        out);
        if (c_eq->parsed()) {
            Stream a = parse_seq_spec(eq_s1);
            Stream b = parse_seq_spec(eq_s2);
            auto diff = first_difference(a, b, Nat(eq_bits ? eq_bits : hz.bits));
            if (diff) {
                out << "differ at " << diff->str() << "\n";
                return 1;
            }
            out << "equal\n";
            return 0;
        }
        err << "no subcommand\n";
        return 2;
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace fstdeg::cli
