#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "linhash/rng.hpp"
#include "linhash/theory.hpp"
#include "oracles.hpp"

using namespace linhash;
using namespace linhash::theory;
using doctest::Approx;

namespace {
// mpmath references
constexpr double kGamma = 0.28878809508660242;
}

TEST_CASE("gamma") {
    CHECK(gamma_partial(1) == 0.5);
    CHECK(gamma_partial(3) == 0.328125);
    CHECK(gamma_constant(1e-12) == Approx(kGamma).epsilon(1e-11));
    CHECK(gamma_constant() == Approx(gamma_partial(64)).epsilon(1e-15));
}

TEST_CASE("tuple count lower bound") {
    CHECK(tuple_count_lower_bound(1) == 1);
    CHECK(tuple_count_lower_bound(3) == 6);
    CHECK(tuple_count_lower_bound(7) == 168);
    CHECK(tuple_count_lower_bound(4) == 4 * 3 * 1);
    CHECK_THROWS_AS(tuple_count_lower_bound(0), std::invalid_argument);
    CHECK(ceil_log2(1) == 0);
    CHECK(ceil_log2(4) == 2);
    CHECK(ceil_log2(5) == 3);
}

TEST_CASE("fixed-bucket tail bounds") {
    CHECK(fixed_bucket_tail_bound(0, 1.0) == 1.0);
    CHECK(fixed_bucket_tail_bound(2, 1.0) == Approx(1.0 / 6));
    CHECK(fixed_bucket_tail_bound(2, 0.5) == Approx(1.0 / 24));
    CHECK(dyadic_fixed_bucket_bound(1, 1.0) == 1.0);
    CHECK(dyadic_fixed_bucket_bound(2, 1.0) == Approx(0.21642166).epsilon(1e-7));
    CHECK(dyadic_fixed_bucket_bound(3, 1.0) == Approx(0.00676318).epsilon(1e-6));
    CHECK(dyadic_fixed_bucket_lower_bound(2, 1.0) == Approx(kGamma * kGamma / 16).epsilon(1e-12));
    // r = 2^a - 2 makes the fixed-bucket bound at most the dyadic one.
    for (unsigned a = 1; a <= 10; ++a)
        CHECK(fixed_bucket_tail_bound((std::uint64_t{1} << a) - 2, 0.75) <= dyadic_fixed_bucket_bound(a, 0.75) * (1 + 1e-12));
}

TEST_CASE("square nullity pmf matches enumeration") {
    CHECK(square_nullity_pmf(2, 0) == 0.375);
    CHECK(square_nullity_pmf(2, 1) == 0.5625);
    CHECK(square_nullity_pmf(2, 2) == 0.0625);
    const auto ref = oracle::nullity_pmf(3, 3);
    for (unsigned a = 0; a <= 3; ++a) CHECK(square_nullity_pmf(3, a) == Approx(ref[a]).epsilon(1e-12));
    CHECK_THROWS_AS(square_nullity_pmf(2, 3), std::invalid_argument);
    double tail = 0;
    for (unsigned a = 2; a <= 8; ++a) tail += square_nullity_pmf(8, a);
    CHECK(tail == Approx(0.13250763953).epsilon(1e-9));
}

TEST_CASE("rect rank pmf") {
    for (unsigned a = 0; a <= 2; ++a) CHECK(rect_rank_pmf(2, 2, a) == square_nullity_pmf(2, a));
    CHECK(rect_rank_pmf(1, 2, 1) == Approx(0.75));
    CHECK(rect_rank_pmf(1, 2, 2) == Approx(0.25));
    CHECK_THROWS_AS(rect_rank_pmf(1, 2, 0), std::invalid_argument);
    for (unsigned rows = 1; rows <= 12; ++rows)
        for (unsigned cols = 1; rows * cols <= 12; ++cols) {
            const auto ref = oracle::nullity_pmf(rows, cols);
            const unsigned lo = cols > rows ? cols - rows : 0;
            double sum = 0;
            for (unsigned a = lo; a <= cols; ++a) {
                const double p = rect_rank_pmf(rows, cols, a);
                CHECK(p == Approx(ref[a]).epsilon(1e-12));
                sum += p;
            }
            CHECK(sum == Approx(1.0).epsilon(1e-12));
            CHECK(rect_nullity_tail(rows, cols, cols + 1) == 0.0);
            CHECK(rect_nullity_tail(rows, cols, 0) == Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("surjectivity failure") {
    const auto one = surjectivity_failure(1, 1);
    CHECK(one.exact == 0.5);
    CHECK(one.bound == 1.0);
    const auto zero = surjectivity_failure(5, 0);
    CHECK(zero.exact == 0.0);
    CHECK(zero.bound == 1.0 / 32);
    const auto f = surjectivity_failure(13, 10);
    CHECK(f.bound == 0.125);
    CHECK(f.exact < 0.125);
    CHECK(f.exact == Approx(0.11977645589739).epsilon(1e-12));
    // Enumeration: ell x U matrices with rank < ell.
    for (unsigned ell = 1; ell <= 3; ++ell)
        for (unsigned u = ell; ell * u <= 12; ++u) {
            const auto ref = oracle::nullity_pmf(ell, u);
            double deficient = 0;
            for (unsigned a = u - ell + 1; a <= u; ++a) deficient += ref[a];
            CHECK(surjectivity_failure(u, ell).exact == Approx(deficient).epsilon(1e-12));
        }
}

TEST_CASE("optimized base") {
    CHECK(optimized_base(16, 2) == Approx(std::numbers::e * 4));
    CHECK(optimized_base(256, 1) == Approx(std::numbers::e * 256));
    CHECK(optimized_base(16, 1e9) == Approx(std::numbers::e).epsilon(1e-8));
    CHECK_THROWS_AS(optimized_base(16, 0.5), std::invalid_argument);
}

TEST_CASE("constants") {
    const auto b = TailConstants::balanced();
    const double c0 = 48 * std::pow(std::numbers::e / std::numbers::ln2, 2);
    CHECK(b.c == Approx(2 * c0));
    CHECK(b.d == Approx(std::sqrt(c0)));
    CHECK(b.d == Approx(27.170).epsilon(1e-4));
    const auto g = TailConstants::general();
    CHECK(g.c == Approx(96 * std::numbers::e * std::numbers::e));
    CHECK(g.d == Approx(std::sqrt(48.0) * std::numbers::e));
}

TEST_CASE("max-load tail bounds") {
    const auto clamped = maxload_tail_bound(16, 2);
    CHECK(clamped.value == 1.0);
    CHECK(clamped.raw > 1.0);
    const double ell = std::ldexp(1.0, 20);
    const auto big = maxload_tail_bound(ell, 4);
    const double c = TailConstants::balanced().c;
    CHECK(big.raw == Approx(c * std::pow(std::log(ell), 2) / (16 * std::pow(ell, 1.5))).epsilon(1e-12));
    CHECK(big.value < 1e-3);
    CHECK(big.admissible);
    CHECK_FALSE(maxload_tail_bound(16, 1.5).admissible);
    const double rmin = min_admissible_R(1024, TailConstants::balanced().d);
    CHECK(maxload_admissible(1024, rmin * (1 + 1e-9), TailConstants::balanced().d));
    CHECK_FALSE(maxload_admissible(1024, rmin * (1 - 1e-6), TailConstants::balanced().d));

    // At T = t, n^{1/t} = t/(e lambda) so the bound collapses to C / e^2.
    const auto ts = solve_t_scale_lambda(1.0, 64);
    const auto g = general_tail_bound(64, 1.0, ts.t);
    CHECK(g.raw == Approx(TailConstants::general().c / (std::numbers::e * std::numbers::e)).epsilon(1e-9));
    CHECK(g.value == 1.0);
    CHECK(general_tail_bound(64, 1.0, 1e9).value < 1e-12);
}

TEST_CASE("t scale") {
    const auto t = solve_t_scale(65536, 16);
    CHECK(t.t == Approx(9.1430002224844).epsilon(1e-10));
    CHECK(std::fabs(t.residual) <= 1e-9);
    CHECK(t.t * std::log(t.t / std::numbers::e) == Approx(16 * std::numbers::ln2).epsilon(1e-12));
    RngStream rng(5, 0);
    for (int i = 0; i < 100; ++i) {
        const unsigned ell = 4 + static_cast<unsigned>(rng.uniform_below(40));
        const std::uint64_t m = 1 + rng.uniform_below(std::uint64_t{1} << (ell - 3));
        const auto s = solve_t_scale(m, ell);
        CHECK(std::fabs(s.t * std::log(s.t / (std::numbers::e * s.lambda)) - ell * std::numbers::ln2) <= 1e-9);
        CHECK(std::pow(std::ldexp(1.0, static_cast<int>(ell)), 1 / s.t) == Approx(s.t / (std::numbers::e * s.lambda)).epsilon(1e-8));
    }
    CHECK_THROWS_AS(solve_t_scale(0, 4), std::invalid_argument);
}

TEST_CASE("expectation bound") {
    double prev = 1e300;
    for (int e : {10, 12, 14, 16, 20}) {
        const auto b = expected_maxload_upper_bound(std::ldexp(1.0, e));
        CHECK(b.ratio > 1.0);
        CHECK(b.ratio < prev);
        CHECK(b.f == 4);
        CHECK(b.r_start >= b.r0);
        CHECK(b.value == Approx(b.ratio * b.scale));
        prev = b.ratio;
    }
    ExpectationOptions strict;
    strict.strict = true;
    try {
        expected_maxload_upper_bound(1024, strict);
        FAIL("strict mode should reject an inadmissible R0");
    } catch (const InadmissibleError& e) {
        CHECK(e.min_admissible_ell() > 1e30);
    }
    const double huge = 2 * min_admissible_ell_for_expectation(TailConstants::balanced());
    const auto ok = expected_maxload_upper_bound(huge, strict);
    CHECK(ok.r0_admissible);
    CHECK(ok.r_start == ok.r0);
    CHECK(ok.ratio > 1.0);

    const auto sparse = sparse_expectation_upper_bound(16, 20);
    CHECK(sparse.value > sparse.t);
    CHECK(sparse.rho > 1);
}

TEST_CASE("one-step estimate") {
    CHECK(one_step_F(0) == 0);
    CHECK(one_step_F(1) == 1);
    CHECK(one_step_F(0.1) == Approx(0.48));
    CHECK(one_step_inequality_check(1.0, 0.0));
    CHECK(one_step_inequality_check(2.0, 0.25));
    for (int i = 0; i < 1000; ++i) {
        const double s = std::pow(10.0, -3.0 + 6.0 * i / 999.0);
        for (int j = 0; j <= 25; ++j) REQUIRE(one_step_inequality_check(s, 0.25 * j / 25.0));
    }
    CHECK_THROWS_AS(one_step_inequality_check(1.0, 0.3), std::invalid_argument);
}

TEST_CASE("bound params") {
    const auto p = make_bound_params(16, 20, 65536, 2.0);
    CHECK(p.T == Approx(8.0));
    CHECK(p.b == Approx(std::numbers::e * 4));
    CHECK(p.A == Approx(2 / std::log(16.0)));
    CHECK(p.lambda == 1.0);
    CHECK(p.b == Approx(std::pow(16.0, p.alpha)));
}
