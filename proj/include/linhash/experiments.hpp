#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "linhash/gf2.hpp"
#include "linhash/hashing.hpp"

namespace linhash::experiments {

struct ExperimentSpec {
    std::string name = "experiment";
    std::size_t u = 0;
    std::size_t ell = 0;
    std::uint64_t m = 0;
    KeySetKind key_kind = KeySetKind::random_distinct_nonzero;
    std::size_t d = 0;          // subspace_plus_one only
    std::string key_path;       // from_file only
    double threshold = 0;       // r for fixed-bucket runs, T for max-load runs
    std::uint64_t trials = 1;
    std::uint64_t master_seed = 0;
    bool surjective_only = false;
    std::optional<BitVector> bucket;  // defaults to the zero bucket
    double z = 3.0;
    unsigned threads = 1;       // 0 = hardware concurrency

    void validate() const;
};

// Stream ids reserved outside the per-trial range [0, trials).
inline constexpr std::uint64_t kKeyStream = ~std::uint64_t{0};
inline constexpr std::uint64_t kBucketStream = ~std::uint64_t{0} - 1;

struct TailEstimate {
    std::string name;
    std::size_t u = 0;
    std::size_t ell = 0;
    std::uint64_t m = 0;
    double threshold = 0;
    std::uint64_t successes = 0;
    std::uint64_t trials = 0;
    double p_hat = 0;
    double ci_low = 0;
    double ci_high = 0;
    double z = 3.0;
    std::optional<double> theory_bound;
    bool admissible = false;
    std::uint64_t seed = 0;
    std::optional<std::string> warning;

    // An admissible bound sits below the whole confidence interval.
    bool falsified() const;
    // |p_hat - p| <= k sqrt(p (1 - p) / trials).
    bool within_sigma(double p, double k = 3.0) const;
};

std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t trials, double z);
// Fraction of `meta_trials` Bernoulli(p) samples of size n whose Wilson
// interval covers p.
double wilson_coverage(double p, std::uint64_t n, std::uint64_t meta_trials, double z, std::uint64_t seed);

unsigned resolve_threads(unsigned requested);

// Calls body(trial) for every trial and sums the returned counters. Each
// worker takes a contiguous block; integer sums make the result independent
// of the worker count.
using Counters = std::array<std::uint64_t, 6>;
Counters run_trials(std::uint64_t trials, unsigned threads,
                     const std::function<Counters(std::uint64_t)>& body);

KeySet experiment_keys(const ExperimentSpec& spec);
// The hash matrix drawn for a given trial.
BitMatrix trial_matrix(const ExperimentSpec& spec, std::uint64_t trial);

TailEstimate mc_fixed_bucket_tail(const ExperimentSpec& spec);
// Runs the same campaign on 8 buckets drawn from the bucket stream (the
// first one is spec.bucket or zero).
std::vector<std::pair<BitVector, TailEstimate>> mc_fixed_bucket_sweep(const ExperimentSpec& spec,
                                                                     std::size_t buckets = 8);

struct SharpnessResult {
    TailEstimate tail;          // theory_bound = upper
    double lower;               // gamma^2 lambda^a 2^{-a^2}
    double upper;               // gamma^{-1} lambda^a 2^{-a^2}
    double nullity_tail;        // Pr[nullity(h|_W) >= a]
    double exact;               // Pr[Z_0 > 2^a - 2]
    std::size_t d;
    unsigned a;
};
SharpnessResult subspace_sharpness_experiment(std::size_t d, std::size_t ell, unsigned a, std::uint64_t trials,
                                              std::uint64_t seed, unsigned threads = 1, double z = 3.0);

struct MaxLoadResult {
    TailEstimate tail;
    double mean_load;
    double mean_ci_low;
    double mean_ci_high;
};
MaxLoadResult mc_max_load(const ExperimentSpec& spec);
LoadHistogram trial_histogram(const ExperimentSpec& spec, std::uint64_t trial);

// Ordered linearly independent a-tuples of distinct elements of `set`.
std::uint64_t count_independent_tuples(const KeySet& set, unsigned a);
inline constexpr double kMaxTupleWork = 1e7;
bool mc_independent_tuples(unsigned a, const std::vector<KeySet>& sets);

TailEstimate mc_surjectivity(std::size_t big_u, std::size_t ell, std::uint64_t trials, std::uint64_t seed,
                             unsigned threads = 1, double z = 3.0);

struct LemmaGateSpec {
    std::size_t u = 12;
    std::size_t ell = 8;
    std::uint64_t m = 0;        // 0 = min(2^ell, 2^u)
    double b = 2.0;
    std::uint64_t instances = 100;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::size_t max_exhaustive_bits = 16;
};

// Potential-process checks on random instances: keys drawn with zero
// allowed, a uniform kernel chain of length u - ell, then growth, heavy bin,
// the Phi_0 identity and (where the quotient has at most 2^max_exhaustive_bits
// elements) the exhaustive conditional expectation at every stage.
struct LemmaGateReport {
    std::uint64_t instances = 0;
    std::uint64_t growth_failures = 0;
    std::uint64_t heavy_bin_failures = 0;
    std::uint64_t identity_failures = 0;
    std::uint64_t expectation_checks = 0;
    std::uint64_t expectation_failures = 0;

    bool passed() const {
        return growth_failures == 0 && heavy_bin_failures == 0 && identity_failures == 0 && expectation_failures == 0;
    }
};
LemmaGateReport verify_lemma_gate(const LemmaGateSpec& spec);

// Results table: name,u,ell,m,threshold,trials,successes,p_hat,ci_low,ci_high,theory_bound,admissible,seed
void write_results_csv(std::ostream& out, const std::vector<TailEstimate>& rows);
void write_results_json(std::ostream& out, const std::vector<TailEstimate>& rows);
std::string format_double(double x);

}  // namespace linhash::experiments
