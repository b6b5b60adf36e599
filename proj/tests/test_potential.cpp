#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "linhash/potential.hpp"
#include "linhash/theory.hpp"
#include "oracles.hpp"

using namespace linhash;
using linhash::potential::PotentialTrace;
using namespace linhash::potential;
namespace pot = linhash::potential;
using doctest::Approx;

namespace {

KeySet two_keys() {
    return KeySet(2, {BitVector::from_bits("00"), BitVector::from_bits("10")}, true);
}

KernelChain chain_of(const char* bits) {
    const std::vector<BitVector> v{BitVector::from_bits(bits)};
    return chain_from_vectors(2, v);
}

std::vector<std::uint64_t> words(const KeySet& s) {
    std::vector<std::uint64_t> out;
    for (const auto& k : s.keys()) out.push_back(k.low_word());
    return out;
}

std::vector<std::uint64_t> words(const Subspace& v) {
    std::vector<std::uint64_t> out;
    for (const auto& b : v.basis()) out.push_back(b.low_word());
    return out;
}

}  // namespace

TEST_CASE("kernel chains") {
    RngStream rng(1, 0);
    const auto empty = sample_kernel_chain(5, 0, rng);
    CHECK(empty.stages.size() == 1);
    CHECK(empty.final_stage().dim() == 0);
    CHECK_THROWS_AS(sample_kernel_chain(2, 3, rng), std::invalid_argument);

    std::map<Word, int> freq;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto c = sample_kernel_chain(2, 1, rng);
        ++freq[c.final_stage().basis()[0].low_word()];
    }
    CHECK(freq.size() == 3);
    for (const auto& [w, c] : freq) CHECK(std::fabs(c / double(n) - 1.0 / 3) <= 3 * std::sqrt(2.0 / 9 / n));

    const auto c = sample_kernel_chain(10, 6, rng);
    for (std::size_t i = 0; i < c.length(); ++i) {
        CHECK(c.stages[i].dim() == i);
        CHECK_FALSE(c.stages[i].contains(c.adjoined[i]));
    }
}

TEST_CASE("potential hand examples") {
    const auto s = two_keys();
    CHECK(pot::potential(s, Subspace(2), 2.0).phi == Approx(1.5));
    CHECK(pot::potential(s, chain_of("10").final_stage(), 2.0).phi == Approx(2.5));
    CHECK(pot::potential(s, chain_of("01").final_stage(), 2.0).phi == Approx(2.0));
    CHECK_THROWS_AS(pot::potential(s, Subspace(2), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(pot::potential(s, Subspace(3), 2.0), std::invalid_argument);

    const auto t1 = trace_potentials(s, chain_of("10"), 2.0);
    CHECK(t1.phi[0] == Approx(1.5));
    CHECK(t1.phi[1] == Approx(2.5));
    CHECK(trace_potentials(s, chain_of("01"), 2.0).phi[1] == Approx(2.0));
    CHECK(trace_potentials(s, chain_of("11"), 2.0).phi[1] == Approx(2.0));
    for (const char* w : {"10", "01", "11"}) CHECK(verify_growth(trace_potentials(s, chain_of(w), 2.0)));

    const KeySet none(2, {}, false);
    RngStream rng(2, 2);
    const auto tr = trace_potentials(none, sample_kernel_chain(2, 2, rng), 3.0);
    for (auto p : tr.phi) CHECK(p == 1.0L);
    CHECK(verify_growth(tr));
}

TEST_CASE("potential agrees with enumeration over all points") {
    RngStream rng(3, 3);
    for (int t = 0; t < 40; ++t) {
        const unsigned u = 3 + static_cast<unsigned>(rng.uniform_below(6));
        KeySetParams p;
        p.u = u;
        p.m = 1 + rng.uniform_below((std::uint64_t{1} << u) - 1);
        const auto s = build_key_set(KeySetKind::random_distinct, p, rng);
        const auto chain = sample_kernel_chain(u, rng.uniform_below(u + 1), rng);
        const double b = 1.1 + 3 * rng.uniform01();
        for (const auto& stage : chain.stages) {
            const long double ref = oracle::potential(words(s), words(stage), u, b);
            const auto direct = pot::potential(s, stage, b, Evaluation::direct);
            const auto logd = pot::potential(s, stage, b, Evaluation::log_domain);
            CHECK(static_cast<double>(direct.phi) == Approx(static_cast<double>(ref)).epsilon(1e-12));
            CHECK(static_cast<double>(logd.phi) == Approx(static_cast<double>(ref)).epsilon(1e-12));
            CHECK(static_cast<double>(logd.phi_minus_one) == Approx(static_cast<double>(direct.phi_minus_one)).epsilon(1e-12));
        }
        // Phi_0 - 1 = m (b - 1) / 2^u
        const auto p0 = pot::potential(s, Subspace(u), b);
        CHECK(static_cast<double>(p0.phi_minus_one) == Approx(p.m * (b - 1) / std::ldexp(1.0, u)).epsilon(1e-13));
    }
}

TEST_CASE("coset loads merge pairwise along a chain") {
    RngStream rng(4, 4);
    for (int t = 0; t < 30; ++t) {
        const unsigned u = 4 + static_cast<unsigned>(rng.uniform_below(9));
        KeySetParams p;
        p.u = u;
        p.m = 1 + rng.uniform_below(std::uint64_t{1} << (u - 1));
        const auto s = build_key_set(KeySetKind::random_distinct_nonzero, p, rng);
        const auto chain = sample_kernel_chain(u, u - 2, rng);
        for (std::size_t i = 0; i + 1 < chain.stages.size(); ++i) {
            const auto& v = chain.stages[i];
            const auto& next = chain.stages[i + 1];
            const auto cur = coset_loads(s, v);
            const auto merged = coset_loads(s, next);
            const auto& w = chain.adjoined[i];
            for (const auto& [rep, f] : merged) {
                // rep + V_{i+1} = (rep + V_i) ∪ (rep + w + V_i)
                const auto a = cur.find(v.reduce(rep));
                const auto b = cur.find(v.reduce(rep ^ w));
                const std::uint64_t fa = a == cur.end() ? 0 : a->second;
                const std::uint64_t fb = b == cur.end() ? 0 : b->second;
                CHECK(f == fa + fb);
            }
        }
    }
}

TEST_CASE("log-domain evaluation survives huge loads") {
    // 2^12 keys in one coset: b^f overflows double and long double directly.
    const unsigned u = 16;
    std::vector<BitVector> keys;
    for (Word x = 1; x <= 4096; ++x) keys.push_back(BitVector::from_word(u, x));
    const KeySet s(u, std::move(keys), false);
    std::vector<BitVector> gens;
    for (unsigned i = 0; i < 12; ++i) gens.push_back(BitVector::unit(u, i));
    const auto v = Subspace::span_of(u, gens);
    const auto p = pot::potential(s, v, 1e6);
    CHECK(std::isfinite(static_cast<double>(p.log_phi)));
    const double expected = 4095 * std::log(1e6) - 4 * std::log(2.0);
    CHECK(static_cast<double>(p.log_phi) == Approx(expected).epsilon(1e-12));
}

TEST_CASE("conditional step expectation") {
    const auto s = two_keys();
    const auto e = conditional_step_expectation_exhaustive(s, Subspace(2), 2.0);
    CHECK(static_cast<double>(e.mean_phi_next()) == Approx(13.0 / 6));
    CHECK(static_cast<double>(e.phi_sq()) == Approx(2.25));
    CHECK(e.satisfied());
    CHECK(e.samples == 3);

    const KeySet none(3, {}, false);
    const auto z = conditional_step_expectation_exhaustive(none, Subspace(3), 2.0);
    CHECK(static_cast<double>(z.mean_phi_next()) == Approx(1.0));
    CHECK(z.satisfied());

    // Single key at U = 3: the mean equals Phi^2 minus a nonnegative term.
    const KeySet one(3, {BitVector::from_bits("101")}, false);
    const auto o = conditional_step_expectation_exhaustive(one, Subspace(3), 3.0);
    double mean = 0;
    for (Word w = 1; w < 8; ++w) {
        const std::vector<std::uint64_t> keys{5};
        mean += static_cast<double>(oracle::potential(keys, {w}, 3, 3.0));
    }
    CHECK(static_cast<double>(o.mean_phi_next()) == Approx(mean / 7).epsilon(1e-13));
    CHECK(o.satisfied());

    CHECK_THROWS_AS(conditional_step_expectation_exhaustive(s, Subspace::full(2), 2.0), std::invalid_argument);
    CHECK_THROWS_AS(conditional_step_expectation_exhaustive(KeySet(21, {}, false), Subspace(21), 2.0), std::invalid_argument);
}

TEST_CASE("step potentials match direct evaluation on the adjoined subspace") {
    RngStream rng(8, 8);
    for (int t = 0; t < 10; ++t) {
        const unsigned u = 6;
        KeySetParams p;
        p.u = u;
        p.m = 1 + rng.uniform_below(40);
        const auto s = build_key_set(KeySetKind::random_distinct, p, rng);
        const auto chain = sample_kernel_chain(u, rng.uniform_below(4), rng);
        const auto& v = chain.final_stage();
        const double b = 2.5;
        const auto logs = step_log_potentials(s, v, b);
        CHECK(static_cast<double>(logs[0]) == Approx(static_cast<double>(pot::potential(s, v, b).log_phi)).epsilon(1e-13));
        for (std::uint64_t idx = 1; idx < logs.size(); ++idx) {
            Subspace next = v;
            REQUIRE(next.adjoin(quotient_vector(v, idx)));
            CHECK(static_cast<double>(logs[idx]) ==
                  Approx(static_cast<double>(pot::potential(s, next, b).log_phi)).epsilon(1e-12));
        }
        const auto ex = conditional_step_expectation_exhaustive(s, v, b);
        CHECK(ex.satisfied());
        RngStream mc(8, 100 + t);
        const auto sampled = conditional_step_expectation_sampled(s, v, b, 4000, mc);
        CHECK(static_cast<double>(sampled.log_mean_phi_next) == Approx(static_cast<double>(ex.log_mean_phi_next)).epsilon(0.05));
    }
}

TEST_CASE("heavy bin") {
    const auto s = two_keys();
    const auto h1 = heavy_bin_check(s, chain_of("10"), 2.0, 1);
    CHECK(h1.passed);
    CHECK(h1.max_load == 2);
    CHECK(std::exp(static_cast<double>(h1.log_phi_k)) == Approx(2.5));
    const auto h2 = heavy_bin_check(s, chain_of("01"), 2.0, 1);
    CHECK(h2.passed);
    CHECK(h2.max_load == 1);
    const KeySet none(2, {}, false);
    CHECK(heavy_bin_check(none, chain_of("10"), 2.0, 1).passed);
    CHECK_THROWS_AS(heavy_bin_check(s, chain_of("10"), 2.0, 2), std::invalid_argument);
}

TEST_CASE("random instances satisfy growth, heavy bin and the step bound") {
    RngStream rng(6, 6);
    for (int t = 0; t < 60; ++t) {
        const unsigned u = 6 + static_cast<unsigned>(rng.uniform_below(7));
        const unsigned ell = 2 + static_cast<unsigned>(rng.uniform_below(u - 2));
        KeySetParams p;
        p.u = u;
        p.m = std::uint64_t{1} << ell;
        const auto s = build_key_set(KeySetKind::random_distinct, p, rng);
        const auto chain = sample_kernel_chain(u, u - ell, rng);
        for (double b : {1.5, 2.0, theory::optimized_base(ell, 2.0)}) {
            const auto tr = trace_potentials(s, chain, b);
            CHECK(verify_growth(tr));
            CHECK(heavy_bin_check(s, chain, b, ell).passed);
            for (std::size_t i = 0; i < chain.length(); ++i)
                CHECK(conditional_step_expectation_exhaustive(s, chain.stages[i], b).satisfied());
        }
    }
}

TEST_CASE("quadratic tail") {
    RngStream rng(7, 7);
    const unsigned u = 14, ell = 10;
    KeySetParams p;
    p.u = u;
    p.m = std::uint64_t{1} << ell;
    const auto s = build_key_set(KeySetKind::random_distinct_nonzero, p, rng);
    const double R = 6.0;
    const auto recipe = replay_recipe(ell, R, u - ell);
    CHECK(recipe.b == Approx(theory::optimized_base(ell, R)));
    CHECK(recipe.A == Approx(R / std::log(10.0)));
    CHECK(static_cast<double>(recipe.tau_minus_one) == Approx(std::log(2.0) * recipe.A * ell / 16));

    std::vector<PotentialTrace> traces;
    for (int c = 0; c < 2000; ++c) traces.push_back(trace_potentials(s, sample_kernel_chain(u, u - ell, rng), recipe.b));
    const auto q = quadratic_tail_check_excess(traces, recipe.tau_minus_one);
    const double sigma = std::sqrt(q.bound * (1 - q.bound) / q.count);
    CHECK(q.empirical <= q.bound + 3 * sigma + 1e-12);

    const auto huge = quadratic_tail_check(traces, 1e6);
    CHECK(huge.empirical == 0.0);
    const long double x0 = traces[0].phi_minus_one[0];
    const auto edge = quadratic_tail_check_excess(traces, 4 * x0);
    CHECK(edge.bound == 1.0);
    CHECK_THROWS_AS(quadratic_tail_check_excess(traces, 3 * x0), std::invalid_argument);
}

TEST_CASE("trace csv") {
    std::ostringstream out;
    write_trace_csv(out, trace_potentials(two_keys(), chain_of("10"), 2.0));
    CHECK(out.str().rfind("stage,phi,phi_minus_one,log_phi\n0,1.5,0.5,0.405465108108164", 0) == 0);
    CHECK(out.str().find("\n1,2.5,1.5,0.916290731874155") != std::string::npos);
}
