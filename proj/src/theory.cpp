#include "linhash/theory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace linhash::theory {

namespace {

constexpr double kE = std::numbers::e;
constexpr double kLn2 = std::numbers::ln2;
constexpr std::size_t kLogDomainFactors = 1000;

// prod_{i in [first, last)} (1 - 2^{exponent(i)}) for exponents < 0. Long
// products are folded in the log domain.
template <class Exponent>
double prod_one_minus_pow2(int first, int last, Exponent exponent) {
    if (last <= first) return 1.0;
    if (static_cast<std::size_t>(last - first) <= kLogDomainFactors) {
        double p = 1.0;
        for (int i = first; i < last; ++i) p *= 1.0 - std::ldexp(1.0, exponent(i));
        return p;
    }
    double s = 0.0;
    for (int i = first; i < last; ++i) s += std::log1p(-std::ldexp(1.0, exponent(i)));
    return std::exp(s);
}

double clamp01(double x) {
    if (std::isnan(x)) return 1.0;
    return std::clamp(x, 0.0, 1.0);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                        double fb, double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double eps = 1e-12) {
    if (b <= a) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, eps, 50);
}

// Smallest x in [lo, hi] with pred(x) true, for a predicate that is false
// then true. Assumes pred(hi) holds.
template <class Pred>
double bisect_threshold(double lo, double hi, Pred pred) {
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pred(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

int smallest_f(double d) {
    // Smallest positive integer F with e^F > 2D.
    int f = std::max(1, static_cast<int>(std::floor(std::log(2.0 * d))) + 1);
    while (f > 1 && std::exp(static_cast<double>(f - 1)) > 2.0 * d) --f;
    while (!(std::exp(static_cast<double>(f)) > 2.0 * d)) ++f;
    return f;
}

double expectation_r0(double ell, int f) {
    const double ln_ell = std::log(ell);
    return 1.0 + (std::log(ln_ell) + f) / ln_ell;
}

}  // namespace

double gamma_partial(unsigned terms) {
    return prod_one_minus_pow2(1, static_cast<int>(terms) + 1, [](int j) { return -j; });
}

double gamma_constant(double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("gamma_constant: tol must be positive");
    // The neglected tail prod_{j>J} (1 - 2^{-j}) lies in [1 - 2^{-J}, 1].
    unsigned terms = 1;
    while (std::ldexp(1.0, -static_cast<int>(terms)) >= tol && terms < 1074) ++terms;
    return gamma_partial(terms);
}

unsigned ceil_log2(std::uint64_t value) {
    if (value == 0) throw std::invalid_argument("ceil_log2: value must be positive");
    unsigned a = 0;
    while (a < 64 && (std::uint64_t{1} << a) < value) ++a;
    return a;
}

std::uint64_t tuple_count_lower_bound(std::uint64_t q) {
    if (q == 0) throw std::invalid_argument("tuple_count_lower_bound: q must be >= 1");
    if (q == std::numeric_limits<std::uint64_t>::max()) throw std::overflow_error("tuple_count_lower_bound: q too large");
    const unsigned a = ceil_log2(q + 1);
    std::uint64_t product = 1;
    for (unsigned j = 0; j < a; ++j) {
        const std::uint64_t factor = q + 1 - (std::uint64_t{1} << j);
        if (factor != 0 && product > std::numeric_limits<std::uint64_t>::max() / factor)
            throw std::overflow_error("tuple_count_lower_bound: product exceeds 64 bits");
        product *= factor;
    }
    return product;
}

double fixed_bucket_tail_bound(std::uint64_t r, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("fixed_bucket_tail_bound: lambda must be positive");
    if (r > (std::uint64_t{1} << 62)) throw std::invalid_argument("fixed_bucket_tail_bound: r too large");
    const unsigned a = ceil_log2(r + 2);
    double denom = 1.0;
    for (unsigned j = 0; j < a; ++j) denom *= static_cast<double>(r + 2 - (std::uint64_t{1} << j));
    return clamp01(std::pow(lambda, a) / denom);
}

double dyadic_fixed_bucket_bound(unsigned a, double lambda) {
    if (a < 1) throw std::invalid_argument("dyadic_fixed_bucket_bound: a must be >= 1");
    if (!(lambda > 0.0)) throw std::invalid_argument("dyadic_fixed_bucket_bound: lambda must be positive");
    const double log2_value = a * std::log2(lambda) - static_cast<double>(a) * a - std::log2(gamma_constant());
    return clamp01(std::exp2(log2_value));
}

double dyadic_fixed_bucket_lower_bound(unsigned a, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("dyadic_fixed_bucket_lower_bound: lambda must be positive");
    const double g = gamma_constant();
    return clamp01(std::exp2(a * std::log2(lambda) - static_cast<double>(a) * a + 2.0 * std::log2(g)));
}

double square_nullity_pmf(unsigned msize, unsigned a) {
    if (msize < 1) throw std::invalid_argument("square_nullity_pmf: size must be >= 1");
    if (a > msize) throw std::invalid_argument("square_nullity_pmf: nullity exceeds matrix size");
    const int m = static_cast<int>(msize), ai = static_cast<int>(a);
    const double num = prod_one_minus_pow2(ai + 1, m + 1, [](int j) { return -j; });
    const double den = prod_one_minus_pow2(1, m - ai + 1, [](int j) { return -j; });
    return std::ldexp(num * num / den, -ai * ai);
}

double rect_rank_pmf(unsigned rows, unsigned cols, unsigned a) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("rect_rank_pmf: dimensions must be >= 1");
    const unsigned lo = cols > rows ? cols - rows : 0;
    if (a < lo || a > cols)
        throw std::invalid_argument("rect_rank_pmf: nullity " + std::to_string(a) + " outside [" + std::to_string(lo) +
                                    ", " + std::to_string(cols) + "]");
    const int ell = static_cast<int>(rows), d = static_cast<int>(cols), ai = static_cast<int>(a);
    const int r = d - ai;
    const double p_rows = prod_one_minus_pow2(0, r, [ell](int i) { return i - ell; });
    const double p_cols = prod_one_minus_pow2(0, r, [d](int i) { return i - d; });
    const double p_rank = prod_one_minus_pow2(0, r, [r](int i) { return i - r; });
    return std::ldexp(p_rows * p_cols / p_rank, -ai * (ell - d + ai));
}

double rect_nullity_tail(unsigned rows, unsigned cols, unsigned a) {
    const unsigned lo = cols > rows ? cols - rows : 0;
    double s = 0.0;
    for (unsigned k = std::max(a, lo); k <= cols; ++k) s += rect_rank_pmf(rows, cols, k);
    return std::min(1.0, s);
}

SurjectivityFailure surjectivity_failure(unsigned big_u, unsigned ell) {
    if (big_u < ell) throw std::invalid_argument("surjectivity_failure: requires U >= ell");
    double log_full = 0.0;
    for (unsigned j = 0; j < ell; ++j)
        log_full += std::log1p(-std::ldexp(1.0, static_cast<int>(j) - static_cast<int>(big_u)));
    return {-std::expm1(log_full), std::ldexp(1.0, static_cast<int>(ell) - static_cast<int>(big_u))};
}

double optimized_base(double ell, double R) {
    if (!(ell >= 2.0)) throw std::invalid_argument("optimized_base: requires ell >= 2");
    if (!(R >= 1.0)) throw std::invalid_argument("optimized_base: requires R >= 1");
    return kE * std::pow(ell, 1.0 / R);
}

TailConstants TailConstants::balanced() {
    const double c0 = 48.0 * (kE / kLn2) * (kE / kLn2);
    const double d0 = 4.0 * kE / kLn2;
    return {2.0 * c0, std::max(d0, std::sqrt(c0))};
}

TailConstants TailConstants::general() {
    const double c0 = 48.0 * kE * kE;
    const double d0 = 4.0 * kE;
    return {2.0 * c0, std::max(d0, std::sqrt(c0))};
}

bool maxload_admissible(double ell, double R, double d) {
    return R * std::pow(ell, 1.0 - 1.0 / R) >= d * std::log(ell);
}

double min_admissible_R(double ell, double d) {
    if (maxload_admissible(ell, 1.0, d)) return 1.0;
    double hi = 2.0;
    while (!maxload_admissible(ell, hi, d)) hi *= 2.0;
    return bisect_threshold(1.0, hi, [&](double R) { return maxload_admissible(ell, R, d); });
}

TailBound maxload_tail_bound(double ell, double R, const TailConstants& k) {
    if (!(ell >= 4.0)) throw std::invalid_argument("maxload_tail_bound: requires ell >= 4");
    if (!(R > 1.0)) throw std::invalid_argument("maxload_tail_bound: requires R > 1");
    const double ln_ell = std::log(ell);
    const double raw = k.c * ln_ell * ln_ell / (R * R * std::pow(ell, 2.0 - 2.0 / R));
    return {clamp01(raw), raw, maxload_admissible(ell, R, k.d)};
}

TailBound general_tail_bound(double ell, double lambda, double T, const TailConstants& k) {
    if (!(T > 0.0)) throw std::invalid_argument("general_tail_bound: requires T > 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("general_tail_bound: requires lambda > 0");
    if (!(ell >= 0.0)) throw std::invalid_argument("general_tail_bound: requires ell >= 0");
    const double n_root = std::exp(ell * kLn2 / T);
    const double scaled = lambda * n_root / T;
    const double raw = k.c * scaled * scaled;
    return {clamp01(raw), raw, T >= k.d * lambda * n_root};
}

TScale solve_t_scale_lambda(double lambda, unsigned ell) {
    if (ell < 1) throw std::invalid_argument("solve_t_scale: requires ell >= 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("solve_t_scale: lambda must be positive");
    const long double target = static_cast<long double>(ell) * std::numbers::ln2_v<long double>;
    const long double log_lambda = std::log(static_cast<long double>(lambda));
    const auto g = [&](long double t) { return t * (std::log(t) - log_lambda - 1.0L); };
    const long double lo0 = std::numbers::e_v<long double> * lambda;
    long double lo = lo0, hi = 2.0L * lo0;
    int doublings = 1;
    while (g(hi) < target) {
        if (++doublings > 64)
            throw std::invalid_argument("solve_t_scale: no root bracket in (e lambda, e lambda 2^64]");
        lo = hi;
        hi *= 2.0L;
    }
    for (int it = 0; it < 400; ++it) {
        const long double mid = 0.5L * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (g(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    const long double t = std::fabs(g(lo) - target) <= std::fabs(g(hi) - target) ? lo : hi;
    const double td = static_cast<double>(t);
    const double residual = td * std::log(td / (kE * lambda)) - ell * kLn2;
    return {td, lambda, residual};
}

TScale solve_t_scale(std::uint64_t m, unsigned ell) {
    if (m < 1) throw std::invalid_argument("solve_t_scale: requires m >= 1");
    return solve_t_scale_lambda(std::ldexp(static_cast<double>(m), -static_cast<int>(ell)), ell);
}

double min_admissible_ell_for_expectation(const TailConstants& k) {
    const int f = smallest_f(k.d);
    const auto ok = [&](double x) {
        const double ell = std::exp(x);
        return maxload_admissible(ell, expectation_r0(ell, f), k.d);
    };
    // Scan ln(ell) upward, then refine the first crossing.
    double prev = std::log(4.0);
    for (double x = prev; x < 700.0; x += 0.25) {
        if (ok(x)) return x == std::log(4.0) ? 4.0 : std::exp(bisect_threshold(prev, x, ok));
        prev = x;
    }
    return std::numeric_limits<double>::infinity();
}

ExpectationBound expected_maxload_upper_bound(double ell, const ExpectationOptions& opts) {
    if (!(ell >= 4.0)) throw std::invalid_argument("expected_maxload_upper_bound: requires ell >= 4");
    const TailConstants& k = opts.constants;
    const double ln_ell = std::log(ell);
    const double scale = ell / std::log2(ell);
    const int f = smallest_f(k.d);
    const double r0 = expectation_r0(ell, f);
    const bool r0_ok = maxload_admissible(ell, r0, k.d);
    if (!r0_ok && opts.strict) {
        const double min_ell = min_admissible_ell_for_expectation(k);
        throw InadmissibleError("expected_maxload_upper_bound: R0 = " + std::to_string(r0) +
                                    " is not admissible at ell = " + std::to_string(ell) +
                                    "; minimal admissible ell is about " + std::to_string(min_ell),
                                min_ell);
    }
    const double r_start = r0_ok ? r0 : std::max(r0, min_admissible_R(ell, k.d));
    const auto tail = [&](double R) { return k.c * ln_ell * ln_ell / (R * R * std::pow(ell, 2.0 - 2.0 / R)); };

    // The tail is decreasing in R; below r_clamp the clamp at 1 is active.
    double r_clamp = r_start;
    if (tail(r_start) > 1.0) {
        double hi = 2.0 * r_start;
        while (tail(hi) > 1.0) hi *= 2.0;
        r_clamp = bisect_threshold(r_start, hi, [&](double R) { return tail(R) <= 1.0; });
    }
    const double r_max = std::max(opts.r_max, 2.0 * r_clamp);
    double integral = (r_start - r0) + (r_clamp - r_start);
    integral += integrate(tail, r_clamp, r_max);
    // Beyond r_max, with x = 1 - 1/R: C (ln ell)^2 int_{x_max}^1 ell^{-2x} dx <= C (ln ell / 2) ell^{-2 x_max}.
    const double x_max = 1.0 - 1.0 / r_max;
    integral += k.c * 0.5 * ln_ell * std::pow(ell, -2.0 * x_max);

    const double value = r0 * scale + scale * integral;
    return {value, scale, value / scale, r0, r_start, integral, f, r0_ok};
}

SparseExpectationBound sparse_expectation_upper_bound(std::uint64_t m, unsigned ell, const TailConstants& k) {
    const TScale ts = solve_t_scale(m, ell);
    const double t = ts.t, lambda = ts.lambda;
    const double rho = t / lambda;
    if (!(rho > 1.0)) throw std::invalid_argument("sparse_expectation_upper_bound: requires t / lambda > 1");
    const int f = smallest_f(k.d);
    const double r0 = 1.0 + f / std::log(rho);
    const auto at = [&](double R) { return general_tail_bound(ell, lambda, R * t, k); };
    const bool r0_ok = at(r0).admissible;
    double r_start = r0;
    if (!r0_ok) {
        double hi = 2.0 * r0;
        while (!at(hi).admissible) hi *= 2.0;
        r_start = bisect_threshold(r0, hi, [&](double R) { return at(R).admissible; });
    }
    const auto raw = [&](double R) { return at(R).raw; };
    double r_clamp = r_start;
    if (raw(r_start) > 1.0) {
        double hi = 2.0 * r_start;
        while (raw(hi) > 1.0) hi *= 2.0;
        r_clamp = bisect_threshold(r_start, hi, [&](double R) { return raw(R) <= 1.0; });
    }
    const double r_max = std::max(64.0, 2.0 * r_clamp);
    double integral = (r_clamp - r0) + integrate(raw, r_clamp, r_max);
    // raw(R) = C (lambda/t)^2 (rho/e)^{2/R} / R^2; with y = 1/R the tail beyond
    // r_max integrates to C (lambda/t)^2 ((rho/e)^{2/r_max} - 1) / (2 ln(rho/e)).
    const double q = std::log(rho / kE);
    const double pref = k.c * (lambda / t) * (lambda / t);
    integral += std::fabs(q) < 1e-12 ? pref / r_max : pref * std::expm1(2.0 * q / r_max) / (2.0 * q);
    return {r0 * t + t * integral, t, rho, r0, r_start, f, r0_ok};
}

double one_step_F(double u) {
    if (!(u >= 0.0)) throw std::invalid_argument("one_step_F: requires u >= 0");
    return std::min(1.0, 48.0 * u * u);
}

bool one_step_inequality_check(double s, double r) {
    if (!(s > 0.0)) throw std::invalid_argument("one_step_inequality_check: requires s > 0");
    if (!(r >= 0.0 && r <= 0.25)) throw std::invalid_argument("one_step_inequality_check: requires 0 <= r <= 1/4");
    const double lhs = one_step_F(2.0 * r / (2.0 + s)) + 8.0 * std::sqrt(3.0) * r * r * s / (2.0 + s);
    const double rhs = 48.0 * r * r;
    return lhs <= rhs * (1.0 + 1e-12);
}

BoundParams make_bound_params(unsigned ell, unsigned u, std::uint64_t m, double R) {
    if (ell < 2) throw std::invalid_argument("make_bound_params: requires ell >= 2");
    if (u < ell) throw std::invalid_argument("make_bound_params: requires u >= ell");
    if (!(R > 1.0)) throw std::invalid_argument("make_bound_params: requires R > 1");
    const double ln_ell = std::log(static_cast<double>(ell));
    const double c0 = 48.0 * (kE / kLn2) * (kE / kLn2);
    const double d0 = 4.0 * kE / kLn2;
    BoundParams p{};
    p.ell = ell;
    p.u = u;
    p.m = m;
    p.lambda = std::ldexp(static_cast<double>(m), -static_cast<int>(ell));
    p.R = R;
    p.T = R * ell / std::log2(static_cast<double>(ell));
    p.alpha = 1.0 / R + 1.0 / ln_ell;
    p.b = optimized_base(ell, R);
    p.A = R / ln_ell;
    p.c0 = c0;
    p.d0 = d0;
    return p;
}

}  // namespace linhash::theory
