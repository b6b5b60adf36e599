#include "linhash/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "linhash/potential.hpp"
#include "linhash/rng.hpp"
#include "linhash/theory.hpp"

namespace linhash::experiments {

namespace {

void check_trials(std::uint64_t trials) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
}

TailEstimate make_estimate(const ExperimentSpec& spec, std::uint64_t successes) {
    TailEstimate e;
    e.name = spec.name;
    e.u = spec.u;
    e.ell = spec.ell;
    e.m = spec.m;
    e.threshold = spec.threshold;
    e.successes = successes;
    e.trials = spec.trials;
    e.p_hat = static_cast<double>(successes) / static_cast<double>(spec.trials);
    std::tie(e.ci_low, e.ci_high) = wilson_interval(successes, spec.trials, spec.z);
    e.z = spec.z;
    e.seed = spec.master_seed;
    return e;
}

void attach_bound(TailEstimate& e, double bound, bool admissible) {
    e.theory_bound = bound;
    e.admissible = admissible;
    if (bound < 10.0 / static_cast<double>(e.trials))
        e.warning = "theory bound " + format_double(bound) + " is below 10/trials; the estimate is uninformative";
}

BitVector zero_or(const ExperimentSpec& spec) {
    return spec.bucket ? *spec.bucket : BitVector(spec.ell);
}

}  // namespace

void ExperimentSpec::validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (ell < 1) throw std::invalid_argument("ell must be >= 1");
    if (u < 1) throw std::invalid_argument("u must be >= 1");
    if (key_kind != KeySetKind::subspace_plus_one && key_kind != KeySetKind::from_file && m < 1)
        throw std::invalid_argument("m must be >= 1");
    if (surjective_only && u < ell) throw std::invalid_argument("surjective hashing requires u >= ell");
    if (!(z > 0)) throw std::invalid_argument("z must be positive");
    if (bucket && bucket->dim() != ell) throw std::invalid_argument("bucket label must have ell coordinates");
    if (!(threshold >= 0) || !std::isfinite(threshold)) throw std::invalid_argument("threshold must be finite and >= 0");
}

bool TailEstimate::falsified() const { return admissible && theory_bound && ci_low > *theory_bound; }

bool TailEstimate::within_sigma(double p, double k) const {
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(trials));
    return std::fabs(p_hat - p) <= k * sigma;
}

std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
    if (trials < 1) throw std::invalid_argument("wilson_interval: trials must be >= 1");
    if (successes > trials) throw std::invalid_argument("wilson_interval: successes exceed trials");
    if (!(z > 0)) throw std::invalid_argument("wilson_interval: z must be positive");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1 + z2 / n;
    const double center = (p + z2 / (2 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
    double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    double hi = successes == trials ? 1.0 : std::min(1.0, center + half);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
    return {lo, hi};
}

double wilson_coverage(double p, std::uint64_t n, std::uint64_t meta_trials, double z, std::uint64_t seed) {
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("wilson_coverage: p must be a probability");
    check_trials(meta_trials);
    std::uint64_t covered = 0;
    for (std::uint64_t t = 0; t < meta_trials; ++t) {
        RngStream rng(seed, t);
        std::uint64_t s = 0;
        for (std::uint64_t i = 0; i < n; ++i) s += rng.uniform01() < p ? 1 : 0;
        const auto [lo, hi] = wilson_interval(s, n, z);
        covered += (lo <= p && p <= hi) ? 1 : 0;
    }
    return static_cast<double>(covered) / static_cast<double>(meta_trials);
}

unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

Counters run_trials(std::uint64_t trials, unsigned threads, const std::function<Counters(std::uint64_t)>& body) {
    const std::uint64_t workers = std::min<std::uint64_t>(resolve_threads(threads), std::max<std::uint64_t>(trials, 1));
    std::vector<Counters> partial(workers, Counters{});
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::uint64_t w) {
        const std::uint64_t begin = trials * w / workers, end = trials * (w + 1) / workers;
        try {
            for (std::uint64_t t = begin; t < end; ++t) {
                const Counters c = body(t);
                for (std::size_t j = 0; j < c.size(); ++j) partial[w][j] += c[j];
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::uint64_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    Counters total{};
    for (const auto& c : partial)
        for (std::size_t j = 0; j < c.size(); ++j) total[j] += c[j];
    return total;
}

KeySet experiment_keys(const ExperimentSpec& spec) {
    RngStream rng(spec.master_seed, kKeyStream);
    KeySetParams p;
    p.u = spec.u;
    p.m = spec.m;
    p.d = spec.d;
    p.path = spec.key_path;
    return build_key_set(spec.key_kind, p, rng);
}

BitMatrix trial_matrix(const ExperimentSpec& spec, std::uint64_t trial) {
    RngStream rng(spec.master_seed, trial);
    return spec.surjective_only ? sample_surjective_matrix(spec.ell, spec.u, rng)
                                : sample_uniform_matrix(spec.ell, spec.u, rng);
}

namespace {

std::uint64_t integral_threshold(double r) {
    if (r != std::floor(r)) throw std::invalid_argument("fixed-bucket threshold r must be an integer");
    return static_cast<std::uint64_t>(r);
}

bool has_zero_key(const KeySet& s) {
    return std::any_of(s.keys().begin(), s.keys().end(), [](const BitVector& k) { return k.is_zero(); });
}

ExperimentSpec resolved(const ExperimentSpec& spec, const KeySet& s) {
    ExperimentSpec out = spec;
    out.u = s.ambient_dim();
    out.m = s.size();
    return out;
}

TailEstimate fixed_bucket_estimate(const ExperimentSpec& spec, const KeySet& s, const BitVector& y) {
    const std::uint64_t r = integral_threshold(spec.threshold);
    const Counters c = run_trials(spec.trials, spec.threads, [&](std::uint64_t t) {
        return Counters{fixed_bucket_load(trial_matrix(spec, t), s, y) > r ? 1u : 0u, 0, 0, 0, 0, 0};
    });
    TailEstimate e = make_estimate(spec, c[0]);
    const double lambda = static_cast<double>(s.size()) / std::ldexp(1.0, static_cast<int>(spec.ell));
    // The theorem needs distinct nonzero keys.
    if (!s.empty()) attach_bound(e, theory::fixed_bucket_tail_bound(r, lambda), !has_zero_key(s));
    return e;
}

}  // namespace

TailEstimate mc_fixed_bucket_tail(const ExperimentSpec& spec) {
    spec.validate();
    const KeySet s = experiment_keys(spec);
    const ExperimentSpec full = resolved(spec, s);
    full.validate();
    return fixed_bucket_estimate(full, s, zero_or(full));
}

std::vector<std::pair<BitVector, TailEstimate>> mc_fixed_bucket_sweep(const ExperimentSpec& spec,
                                                                     std::size_t buckets) {
    spec.validate();
    const KeySet s = experiment_keys(spec);
    const ExperimentSpec full = resolved(spec, s);
    full.validate();
    std::vector<BitVector> labels{zero_or(full)};
    RngStream rng(full.master_seed, kBucketStream);
    while (labels.size() < buckets) labels.push_back(BitVector::random(full.ell, rng));
    std::vector<std::pair<BitVector, TailEstimate>> out;
    for (const auto& y : labels) {
        TailEstimate e = fixed_bucket_estimate(full, s, y);
        e.name = full.name + ":" + y.to_hex();
        out.emplace_back(y, std::move(e));
    }
    return out;
}

SharpnessResult subspace_sharpness_experiment(std::size_t d, std::size_t ell, unsigned a, std::uint64_t trials,
                                              std::uint64_t seed, unsigned threads, double z) {
    if (d < 1 || ell < 1) throw std::invalid_argument("sharpness requires d >= 1 and ell >= 1");
    if (a < 1 || (d > ell && a < d - ell)) throw std::invalid_argument("sharpness requires a >= max(1, d - ell)");
    if (a > 31) throw std::invalid_argument("sharpness requires a <= 31");
    ExperimentSpec spec;
    spec.name = "sharpness";
    spec.u = d + 1;
    spec.ell = ell;
    spec.m = std::uint64_t{1} << d;
    spec.key_kind = KeySetKind::subspace_plus_one;
    spec.d = d;
    spec.threshold = std::ldexp(1.0, static_cast<int>(a)) - 2;
    spec.trials = trials;
    spec.master_seed = seed;
    spec.z = z;
    spec.threads = threads;
    spec.validate();
    const KeySet s = experiment_keys(spec);
    const BitVector zero(ell);
    const std::uint64_t r = (std::uint64_t{1} << a) - 2;
    const Counters c = run_trials(trials, threads, [&](std::uint64_t t) {
        return Counters{fixed_bucket_load(trial_matrix(spec, t), s, zero) > r ? 1u : 0u, 0, 0, 0, 0, 0};
    });

    SharpnessResult out{};
    out.tail = make_estimate(spec, c[0]);
    out.d = d;
    out.a = a;
    const double lambda = std::ldexp(1.0, static_cast<int>(d) - static_cast<int>(ell));
    out.upper = theory::dyadic_fixed_bucket_bound(a, lambda);
    out.lower = theory::dyadic_fixed_bucket_lower_bound(a, lambda);
    const auto rows = static_cast<unsigned>(ell), cols = static_cast<unsigned>(d);
    out.nullity_tail = theory::rect_nullity_tail(rows, cols, a);
    out.exact = out.nullity_tail;
    // With a = 1 the extra key v alone can also land in bucket 0.
    if (a == 1 && cols <= rows) out.exact += theory::rect_rank_pmf(rows, cols, 0) * std::ldexp(1.0, -static_cast<int>(ell));
    attach_bound(out.tail, out.upper, true);
    return out;
}

MaxLoadResult mc_max_load(const ExperimentSpec& spec) {
    spec.validate();
    const KeySet s = experiment_keys(spec);
    const ExperimentSpec full = resolved(spec, s);
    full.validate();
    const Counters c = run_trials(full.trials, full.threads, [&](std::uint64_t t) {
        const std::uint64_t load = max_load(trial_matrix(full, t), s);
        return Counters{static_cast<double>(load) >= full.threshold ? 1u : 0u, load, load * load, 0, 0, 0};
    });
    MaxLoadResult out{};
    out.tail = make_estimate(full, c[0]);
    const double n = static_cast<double>(full.trials);
    out.mean_load = static_cast<double>(c[1]) / n;
    const double var = full.trials > 1 ? std::max(0.0, (static_cast<double>(c[2]) - n * out.mean_load * out.mean_load) / (n - 1)) : 0.0;
    const double half = full.z * std::sqrt(var / n);
    out.mean_ci_low = out.mean_load - half;
    out.mean_ci_high = out.mean_load + half;

    const double ell = static_cast<double>(full.ell);
    const double lambda = static_cast<double>(full.m) / std::ldexp(1.0, static_cast<int>(full.ell));
    const bool balanced = full.ell >= 4 && full.m == (std::uint64_t{1} << full.ell) && !has_zero_key(s);
    try {
        if (balanced && full.threshold * std::log2(ell) / ell > 1.0) {
            const auto b = theory::maxload_tail_bound(ell, full.threshold * std::log2(ell) / ell);
            attach_bound(out.tail, b.value, b.admissible);
        } else if (full.threshold > 0 && !has_zero_key(s)) {
            const auto b = theory::general_tail_bound(ell, lambda, full.threshold);
            attach_bound(out.tail, b.value, b.admissible);
        }
    } catch (const std::invalid_argument&) {
        out.tail.theory_bound.reset();
    }
    return out;
}

LoadHistogram trial_histogram(const ExperimentSpec& spec, std::uint64_t trial) {
    spec.validate();
    const KeySet s = experiment_keys(spec);
    return bucket_loads(trial_matrix(resolved(spec, s), trial), s);
}

namespace {

std::uint64_t count_tuples_from(const std::vector<BitVector>& elems, const Subspace& span, unsigned remaining) {
    if (remaining == 0) return 1;
    std::uint64_t total = 0;
    for (const auto& x : elems) {
        if (span.contains(x)) continue;
        Subspace next = span;
        next.adjoin(x);
        total += count_tuples_from(elems, next, remaining - 1);
    }
    return total;
}

}  // namespace

std::uint64_t count_independent_tuples(const KeySet& set, unsigned a) {
    const double work = std::pow(static_cast<double>(set.size()), static_cast<double>(a));
    if (work > kMaxTupleWork) throw std::invalid_argument("count_independent_tuples: q^a exceeds 10^7");
    return count_tuples_from(set.keys(), Subspace(set.ambient_dim()), a);
}

bool mc_independent_tuples(unsigned a, const std::vector<KeySet>& sets) {
    bool ok = true;
    for (const auto& s : sets) {
        if (s.empty()) throw std::invalid_argument("mc_independent_tuples: empty set");
        if (has_zero_key(s)) throw std::invalid_argument("mc_independent_tuples: sets must be nonzero");
        if (theory::ceil_log2(s.size() + 1) != a)
            throw std::invalid_argument("mc_independent_tuples: a must equal ceil(log2(q + 1)) for every set");
        if (count_independent_tuples(s, a) < theory::tuple_count_lower_bound(s.size())) ok = false;
    }
    return ok;
}

TailEstimate mc_surjectivity(std::size_t big_u, std::size_t ell, std::uint64_t trials, std::uint64_t seed,
                             unsigned threads, double z) {
    if (big_u < ell) throw std::invalid_argument("mc_surjectivity requires U >= ell");
    check_trials(trials);
    ExperimentSpec spec;
    spec.name = "surjectivity";
    spec.u = big_u;
    spec.ell = ell;
    spec.m = 0;
    spec.trials = trials;
    spec.master_seed = seed;
    spec.z = z;
    spec.threads = threads;
    const Counters c = run_trials(trials, threads, [&](std::uint64_t t) {
        if (ell == 0) return Counters{};
        RngStream rng(seed, t);
        return Counters{rank(sample_uniform_matrix(ell, big_u, rng)) < ell ? 1u : 0u, 0, 0, 0, 0, 0};
    });
    TailEstimate e = make_estimate(spec, c[0]);
    const auto f = theory::surjectivity_failure(static_cast<unsigned>(big_u), static_cast<unsigned>(ell));
    e.theory_bound = f.exact;
    e.admissible = true;
    if (f.exact > 0 && f.exact < 10.0 / static_cast<double>(trials))
        e.warning = "failure probability is below 10/trials; the estimate is uninformative";
    return e;
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_results_csv(std::ostream& out, const std::vector<TailEstimate>& rows) {
    out << "name,u,ell,m,threshold,trials,successes,p_hat,ci_low,ci_high,theory_bound,admissible,seed\n";
    for (const auto& r : rows) {
        out << r.name << ',' << r.u << ',' << r.ell << ',' << r.m << ',' << format_double(r.threshold) << ','
            << r.trials << ',' << r.successes << ',' << format_double(r.p_hat) << ',' << format_double(r.ci_low) << ','
            << format_double(r.ci_high) << ',' << (r.theory_bound ? format_double(*r.theory_bound) : "") << ','
            << (r.admissible ? 1 : 0) << ',' << r.seed << '\n';
    }
}

void write_results_json(std::ostream& out, const std::vector<TailEstimate>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["name"] = r.name;
        j["u"] = r.u;
        j["ell"] = r.ell;
        j["m"] = r.m;
        j["threshold"] = r.threshold;
        j["trials"] = r.trials;
        j["successes"] = r.successes;
        j["p_hat"] = r.p_hat;
        j["ci_low"] = r.ci_low;
        j["ci_high"] = r.ci_high;
        j["theory_bound"] = r.theory_bound ? nlohmann::ordered_json(*r.theory_bound) : nlohmann::ordered_json();
        j["admissible"] = r.admissible;
        j["seed"] = r.seed;
        arr.push_back(std::move(j));
    }
    out << arr.dump(2) << '\n';
}

LemmaGateReport verify_lemma_gate(const LemmaGateSpec& spec) {
    if (spec.u < spec.ell || spec.ell < 1) throw std::invalid_argument("lemma gate requires 1 <= ell <= u");
    if (spec.u > 62) throw std::invalid_argument("lemma gate requires u <= 62");
    if (!(spec.b > 1.0 + 1e-12)) throw std::invalid_argument("lemma gate requires b > 1");
    check_trials(spec.instances);
    const std::uint64_t space = std::uint64_t{1} << spec.u;
    const std::uint64_t m = spec.m != 0 ? spec.m : std::min<std::uint64_t>(std::uint64_t{1} << spec.ell, space);
    if (m > space) throw std::invalid_argument("lemma gate: m exceeds 2^u");
    const std::size_t k = spec.u - spec.ell;
    const Counters c = run_trials(spec.instances, spec.threads, [&](std::uint64_t t) {
        RngStream rng(spec.seed, t);
        KeySetParams p;
        p.u = spec.u;
        p.m = m;
        const KeySet s = build_key_set(KeySetKind::random_distinct, p, rng);
        const auto chain = potential::sample_kernel_chain(spec.u, k, rng);
        const auto trace = potential::trace_potentials(s, chain, spec.b);
        Counters out{};
        out[0] = potential::verify_growth(trace) ? 0 : 1;
        out[1] = potential::heavy_bin_check(s, chain, spec.b, spec.ell).passed ? 0 : 1;
        const long double expected = static_cast<long double>(m) * (static_cast<long double>(spec.b) - 1) /
                                     std::ldexp(1.0L, static_cast<int>(spec.u));
        out[2] = std::fabs(trace.phi_minus_one[0] - expected) <= 1e-12L * expected ? 0 : 1;
        for (std::size_t i = 0; i < k; ++i) {
            if (spec.u - i > spec.max_exhaustive_bits) continue;
            ++out[3];
            if (!potential::conditional_step_expectation_exhaustive(s, chain.stages[i], spec.b).satisfied()) ++out[4];
        }
        return out;
    });
    LemmaGateReport r;
    r.instances = spec.instances;
    r.growth_failures = c[0];
    r.heavy_bin_failures = c[1];
    r.identity_failures = c[2];
    r.expectation_checks = c[3];
    r.expectation_failures = c[4];
    return r;
}

}  // namespace linhash::experiments
