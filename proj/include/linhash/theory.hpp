#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace linhash::theory {

// prod_{j=1}^{J} (1 - 2^{-j}).
double gamma_partial(unsigned terms);
// The infinite product prod_{j>=1} (1 - 2^{-j}), truncated once the neglected
// factor is within tol of 1.
double gamma_constant(double tol = 1e-15);

// Smallest a with 2^a >= value (value >= 1), i.e. ceil(log2(value)).
unsigned ceil_log2(std::uint64_t value);

// prod_{j=0}^{a-1} (q + 1 - 2^j) with a = ceil(log2(q + 1)): a lower bound
// on the number of ordered linearly independent a-tuples in any set of q
// distinct nonzero vectors. Throws std::overflow_error past 64 bits.
std::uint64_t tuple_count_lower_bound(std::uint64_t q);

// Pr[Z_y > r] <= lambda^a / prod_{j<a} (r + 2 - 2^j), a = ceil(log2(r + 2)),
// clamped to 1.
double fixed_bucket_tail_bound(std::uint64_t r, double lambda = 1.0);
// gamma^{-1} lambda^a 2^{-a^2}, clamped to 1.
double dyadic_fixed_bucket_bound(unsigned a, double lambda = 1.0);
// gamma^2 lambda^a 2^{-a^2}: the matching lower bound for the subspace
// construction.
double dyadic_fixed_bucket_lower_bound(unsigned a, double lambda = 1.0);

// Probability that a uniform msize x msize matrix over F_2 has nullity a.
double square_nullity_pmf(unsigned msize, unsigned a);
// Probability that a uniform rows x cols matrix over F_2 has nullity a
// (rank cols - a). Valid range: max(0, cols - rows) <= a <= cols.
double rect_rank_pmf(unsigned rows, unsigned cols, unsigned a);
// sum_{a' >= a} rect_rank_pmf(rows, cols, a'); zero when a > cols.
double rect_nullity_tail(unsigned rows, unsigned cols, unsigned a);

struct SurjectivityFailure {
    double exact;  // 1 - prod_{j<ell} (1 - 2^{j-U})
    double bound;  // 2^{ell-U}
};
SurjectivityFailure surjectivity_failure(unsigned big_u, unsigned ell);

// b = e * ell^{1/R} = ell^{1/R + 1/ln ell}.
double optimized_base(double ell, double R);

// Constants of a maximum-load tail bound: value = C * (...)^2, admissible
// when the load threshold clears D times the relevant scale.
struct TailConstants {
    double c;
    double d;

    // C = 2 * 48 (e/ln 2)^2, D = max(4e/ln 2, sqrt(48) e/ln 2).
    static TailConstants balanced();
    // C = 2 * 48 e^2, D = max(4e, sqrt(48) e).
    static TailConstants general();
};

struct TailBound {
    double value;  // clamped to [0, 1]
    double raw;    // formula value before clamping
    bool admissible;
};

// Pr[M(S,h) >= R ell / log2 ell] <= C (ln ell)^2 / (R^2 ell^{2-2/R}),
// admissible when R ell^{1-1/R} >= D ln ell.
TailBound maxload_tail_bound(double ell, double R, const TailConstants& k = TailConstants::balanced());
bool maxload_admissible(double ell, double R, double d);
// Smallest admissible R for the given ell (R ell^{1-1/R} is increasing in R).
double min_admissible_R(double ell, double d);

// Pr[M(S,h) >= T] <= C (lambda n^{1/T} / T)^2 with n = 2^ell, admissible when
// T >= D lambda n^{1/T}.
TailBound general_tail_bound(double ell, double lambda, double T, const TailConstants& k = TailConstants::general());

struct TScale {
    double t;
    double lambda;
    double residual;  // t ln(t / (e lambda)) - ell ln 2
};
// Solves t ln(t / (e lambda)) = ln n for t > e lambda, lambda = m / 2^ell.
TScale solve_t_scale(std::uint64_t m, unsigned ell);
TScale solve_t_scale_lambda(double lambda, unsigned ell);

class InadmissibleError : public std::invalid_argument {
public:
    InadmissibleError(const std::string& what, double min_ell) : std::invalid_argument(what), min_ell_(min_ell) {}
    double min_admissible_ell() const { return min_ell_; }

private:
    double min_ell_;
};

struct ExpectationBound {
    double value;        // upper bound on E[M(S,h)]
    double scale;        // L = ell / log2 ell
    double ratio;        // value / L
    double r0;           // 1 + (ln ln ell + F) / ln ell
    double r_start;      // max(r0, smallest admissible R)
    double integral;     // integral of the clamped tail over [r_start, inf), in units of R
    int f;               // smallest integer with e^F > 2D
    bool r0_admissible;
};

struct ExpectationOptions {
    TailConstants constants = TailConstants::balanced();
    // Throw InadmissibleError when R0 is not admissible instead of padding the
    // inadmissible stretch with the trivial bound 1.
    bool strict = false;
    double r_max = 64.0;
};

// E[M] <= R0 L + L * int_{R0}^{inf} min(1, tail(R)) dR, evaluated numerically
// up to r_max and in closed form beyond.
ExpectationBound expected_maxload_upper_bound(double ell, const ExpectationOptions& opts = {});
// Smallest ell (searched over reals) at which R0 is admissible.
double min_admissible_ell_for_expectation(const TailConstants& k);

struct SparseExpectationBound {
    double value;
    double t;
    double rho;  // t / lambda
    double r0;
    double r_start;
    int f;
    bool r0_admissible;
};
// E[M] <= R0 t + t int_{R0}^{inf} min(1, C/R^2 (lambda/t)^{2-2/R}) dR with
// R0 = 1 + F / ln rho.
SparseExpectationBound sparse_expectation_upper_bound(std::uint64_t m, unsigned ell,
                                                      const TailConstants& k = TailConstants::general());

// F(u) = min(1, 48 u^2).
double one_step_F(double u);
// F(2r/(2+s)) + 8 sqrt(3) r^2 s / (2+s) <= 48 r^2.
bool one_step_inequality_check(double s, double r);

// Parameters of the optimized potential argument for a balanced instance.
struct BoundParams {
    unsigned ell;
    unsigned u;
    std::uint64_t m;
    double lambda;     // m / 2^ell
    double R;
    double T;          // R ell / log2 ell
    double b;          // e ell^{1/R}
    double alpha;      // 1/R + 1/ln ell
    double A;          // R / ln ell
    double c0;
    double d0;
};
BoundParams make_bound_params(unsigned ell, unsigned u, std::uint64_t m, double R);

}  // namespace linhash::theory
