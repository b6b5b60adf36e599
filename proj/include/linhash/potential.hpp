#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "linhash/gf2.hpp"
#include "linhash/hashing.hpp"
#include "linhash/rng.hpp"

namespace linhash::potential {

// Flag V_0 < V_1 < ... < V_k in F_2^U revealing a k-dimensional subspace
// one vector at a time.
struct KernelChain {
    std::size_t ambient_dim = 0;
    std::vector<Subspace> stages;      // stages[i] has dimension i
    std::vector<BitVector> adjoined;   // adjoined[i] lies outside stages[i]

    std::size_t length() const { return adjoined.size(); }
    const Subspace& final_stage() const { return stages.back(); }
};

KernelChain sample_kernel_chain(std::size_t ambient_dim, std::size_t k, RngStream& rng);
// Builds the chain spanned step by step by `vectors`; each must be new.
KernelChain chain_from_vectors(std::size_t ambient_dim, std::span<const BitVector> vectors);

// Number of keys in each nonempty coset of v, keyed by canonical representative.
std::unordered_map<BitVector, std::uint64_t, BitVectorHash> coset_loads(const KeySet& s, const Subspace& v);

struct PotentialValue {
    long double phi;
    long double phi_minus_one;
    long double log_phi;
    long double log_phi_minus_one;  // -inf when phi == 1
};

enum class Evaluation { automatic, direct, log_domain };

// Phi = average over x in F_2^U of b^{|(x + V) ∩ S|}, computed from the
// nonempty cosets only.
PotentialValue potential(const KeySet& s, const Subspace& v, double b, Evaluation eval = Evaluation::automatic);

struct PotentialTrace {
    double base = 0;
    std::size_t k = 0;
    std::vector<long double> phi;
    std::vector<long double> phi_minus_one;
    std::vector<long double> log_phi;
    std::vector<long double> log_phi_minus_one;
};

PotentialTrace trace_potentials(const KeySet& s, const KernelChain& chain, double b);

// Phi_{i+1} - 1 >= 2 (Phi_i - 1) at every step, with relative slack.
bool verify_growth(const PotentialTrace& trace, double slack = 1e-9);

struct StepExpectation {
    long double log_mean_phi_next;
    long double log_phi_sq;
    std::size_t samples;

    long double mean_phi_next() const;
    long double phi_sq() const;
    // mean <= Phi_i^2 up to the given relative tolerance.
    bool satisfied(double rel_tol = 1e-12) const;
};

inline constexpr std::size_t kMaxExhaustiveQuotientBits = 20;

// Exact E_w[Phi_{i+1}(w)] over all nonzero w in F_2^U / V.
StepExpectation conditional_step_expectation_exhaustive(const KeySet& s, const Subspace& v, double b);
// Monte Carlo estimate from `trials` draws of w uniform outside V.
StepExpectation conditional_step_expectation_sampled(const KeySet& s, const Subspace& v, double b,
                                                     std::size_t trials, RngStream& rng);

// log Phi_{i+1}(w) for every quotient element w (index 0 is w = 0 and is
// left at log Phi_i). Element idx corresponds to quotient_vector(v, idx).
std::vector<long double> step_log_potentials(const KeySet& s, const Subspace& v, double b);
BitVector quotient_vector(const Subspace& v, std::uint64_t index);

struct HeavyBinResult {
    bool passed;
    std::uint64_t max_load;   // T: largest coset load at the final stage
    long double log_phi_k;
    long double log_lower;    // T ln b - ell ln 2
};
HeavyBinResult heavy_bin_check(const KeySet& s, const KernelChain& chain, double b, std::size_t ell,
                               double slack = 1e-9);

struct QuadraticTail {
    double empirical;
    double bound;
    std::size_t hits;
    std::size_t count;
};
// Fraction of traces with Phi_k >= tau^{2^k} against min(1, 48 ((Phi_0 - 1)/(tau - 1))^2).
// tau - 1 is passed directly so tiny thresholds keep their precision.
QuadraticTail quadratic_tail_check_excess(std::span<const PotentialTrace> traces, long double tau_minus_one);
QuadraticTail quadratic_tail_check(std::span<const PotentialTrace> traces, double tau);

// The optimized-base recipe for a balanced instance: b = e ell^{1/R},
// A = R / ln ell, tau = 1 + ln(2) A ell / 2^k.
struct TailRecipe {
    double b;
    double A;
    long double tau_minus_one;
    double T;
};
TailRecipe replay_recipe(unsigned ell, double R, std::size_t k);

// CSV with columns stage,phi,phi_minus_one,log_phi.
void write_trace_csv(std::ostream& out, const PotentialTrace& trace);

}  // namespace linhash::potential
