#include "linhash/potential.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "linhash/theory.hpp"

namespace linhash::potential {

namespace {

constexpr long double kLn2 = std::numbers::ln2_v<long double>;
constexpr long double kNegInf = -std::numeric_limits<long double>::infinity();
// Above this exponent the direct path switches to log-sum-exp.
constexpr long double kDirectLimit = 700.0L;

class PackedReducer {
public:
    explicit PackedReducer(const Subspace& v) {
        for (std::size_t i = 0; i < v.dim(); ++i) {
            basis_.push_back(v.basis()[i].low_word());
            pivots_.push_back(Word{1} << v.pivots()[i]);
        }
    }
    Word reduce(Word x) const {
        for (std::size_t i = 0; i < basis_.size(); ++i)
            if (x & pivots_[i]) x ^= basis_[i];
        return x;
    }

private:
    std::vector<Word> basis_;
    std::vector<Word> pivots_;
};

void require_compatible(const KeySet& s, const Subspace& v, double b) {
    if (!(b > 1.0 + 1e-12)) throw std::invalid_argument("potential base b must exceed 1");
    if (s.ambient_dim() != v.ambient_dim())
        throw std::invalid_argument("key set and subspace live in different ambient spaces");
}

// Loads of the nonempty cosets (order unspecified).
std::vector<std::uint64_t> nonempty_loads(const KeySet& s, const Subspace& v) {
    std::vector<std::uint64_t> out;
    if (v.ambient_dim() <= kWordBits) {
        const PackedReducer red(v);
        std::unordered_map<Word, std::uint64_t> counts;
        counts.reserve(s.size());
        for (const auto& k : s.keys()) ++counts[red.reduce(k.low_word())];
        out.reserve(counts.size());
        for (const auto& [label, c] : counts) out.push_back(c);
    } else {
        for (const auto& [label, c] : coset_loads(s, v)) out.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

long double log_add_exp(long double a, long double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const long double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

// log(b^f - 1) for f >= 1.
long double log_excess(std::uint64_t f, long double ln_b) {
    const long double x = static_cast<long double>(f) * ln_b;
    return x + std::log(-std::expm1(-x));
}

}  // namespace

KernelChain sample_kernel_chain(std::size_t ambient_dim, std::size_t k, RngStream& rng) {
    if (k > ambient_dim) throw std::invalid_argument("sample_kernel_chain: k exceeds ambient dimension");
    KernelChain chain;
    chain.ambient_dim = ambient_dim;
    chain.stages.emplace_back(ambient_dim);
    for (std::size_t i = 0; i < k; ++i) {
        BitVector w = sample_outside(chain.stages.back(), rng);
        Subspace next = chain.stages.back();
        next.adjoin(w);
        chain.adjoined.push_back(std::move(w));
        chain.stages.push_back(std::move(next));
    }
    return chain;
}

KernelChain chain_from_vectors(std::size_t ambient_dim, std::span<const BitVector> vectors) {
    KernelChain chain;
    chain.ambient_dim = ambient_dim;
    chain.stages.emplace_back(ambient_dim);
    for (const auto& w : vectors) {
        Subspace next = chain.stages.back();
        if (!next.adjoin(w)) throw std::invalid_argument("chain_from_vectors: vector already in the current stage");
        chain.adjoined.push_back(w);
        chain.stages.push_back(std::move(next));
    }
    return chain;
}

std::unordered_map<BitVector, std::uint64_t, BitVectorHash> coset_loads(const KeySet& s, const Subspace& v) {
    if (s.ambient_dim() != v.ambient_dim())
        throw std::invalid_argument("key set and subspace live in different ambient spaces");
    std::unordered_map<BitVector, std::uint64_t, BitVectorHash> out;
    for (const auto& k : s.keys()) ++out[v.reduce(k)];
    return out;
}

PotentialValue potential(const KeySet& s, const Subspace& v, double b, Evaluation eval) {
    require_compatible(s, v, b);
    const std::vector<std::uint64_t> loads = nonempty_loads(s, v);
    const long double ln_b = std::log(static_cast<long double>(b));
    const long double codim = static_cast<long double>(v.codim());
    const std::uint64_t top = loads.empty() ? 0 : loads.back();
    const bool use_log =
        eval == Evaluation::log_domain ||
        (eval == Evaluation::automatic && static_cast<long double>(top) * ln_b > kDirectLimit);

    PotentialValue out{};
    if (!use_log) {
        long double excess = 0.0L;
        for (std::uint64_t f : loads) excess += std::expm1(static_cast<long double>(f) * ln_b);
        out.phi_minus_one = std::ldexp(excess, -static_cast<int>(v.codim()));
        out.phi = 1.0L + out.phi_minus_one;
        out.log_phi = std::log1p(out.phi_minus_one);
        out.log_phi_minus_one = out.phi_minus_one > 0 ? std::log(out.phi_minus_one) : kNegInf;
        return out;
    }
    long double log_excess_sum = kNegInf;
    for (std::uint64_t f : loads) log_excess_sum = log_add_exp(log_excess_sum, log_excess(f, ln_b));
    out.log_phi_minus_one = log_excess_sum == kNegInf ? kNegInf : log_excess_sum - codim * kLn2;
    out.log_phi = log_add_exp(out.log_phi_minus_one, 0.0L);
    out.phi_minus_one = std::exp(out.log_phi_minus_one);
    out.phi = std::exp(out.log_phi);
    return out;
}

PotentialTrace trace_potentials(const KeySet& s, const KernelChain& chain, double b) {
    if (chain.stages.empty()) throw std::invalid_argument("trace_potentials: empty chain");
    PotentialTrace t;
    t.base = b;
    t.k = chain.length();
    for (const auto& stage : chain.stages) {
        const PotentialValue p = potential(s, stage, b);
        t.phi.push_back(p.phi);
        t.phi_minus_one.push_back(p.phi_minus_one);
        t.log_phi.push_back(p.log_phi);
        t.log_phi_minus_one.push_back(p.log_phi_minus_one);
    }
    return t;
}

bool verify_growth(const PotentialTrace& trace, double slack) {
    const long double log_factor = kLn2 + std::log1p(-static_cast<long double>(slack));
    for (std::size_t i = 0; i + 1 < trace.log_phi_minus_one.size(); ++i) {
        const long double cur = trace.log_phi_minus_one[i];
        if (cur == kNegInf) continue;
        if (trace.log_phi_minus_one[i + 1] < cur + log_factor) return false;
    }
    return true;
}

long double StepExpectation::mean_phi_next() const { return std::exp(log_mean_phi_next); }
long double StepExpectation::phi_sq() const { return std::exp(log_phi_sq); }

bool StepExpectation::satisfied(double rel_tol) const {
    return log_mean_phi_next <= log_phi_sq + std::log1p(static_cast<long double>(rel_tol));
}

BitVector quotient_vector(const Subspace& v, std::uint64_t index) {
    const auto free = v.free_coordinates();
    BitVector w(v.ambient_dim());
    for (std::size_t j = 0; j < free.size() && j < 64; ++j)
        if ((index >> j) & 1U) w.set(free[j], true);
    return w;
}

namespace {

// Scaled quantities shared by the exhaustive step computations. With
// a_C = b^{f(C)} and e_C = a_C - 1, every sum is carried relative to
// exp(-shift) so that huge loads do not overflow.
struct StepTable {
    long double shift;                 // max f ln b
    long double quotient_size;         // N = 2^{U - dim V}
    long double excess_total;          // sum_C e_C exp(-shift)
    std::vector<long double> excess;   // dense e_C exp(-shift) indexed by compressed label
    std::vector<std::uint64_t> nonempty;
};

StepTable build_step_table(const KeySet& s, const Subspace& v, double b) {
    require_compatible(s, v, b);
    if (v.dim() >= v.ambient_dim()) throw std::invalid_argument("conditional step needs a proper subspace");
    if (v.codim() > kMaxExhaustiveQuotientBits)
        throw std::invalid_argument("exhaustive conditional step limited to quotients of size <= 2^20");
    const auto free = v.free_coordinates();
    StepTable t;
    t.quotient_size = std::ldexp(1.0L, static_cast<int>(v.codim()));
    t.excess.assign(std::size_t{1} << v.codim(), 0.0L);
    const long double ln_b = std::log(static_cast<long double>(b));

    std::unordered_map<std::uint64_t, std::uint64_t> counts;
    for (const auto& [label, c] : coset_loads(s, v)) {
        std::uint64_t idx = 0;
        for (std::size_t j = 0; j < free.size(); ++j)
            if (label.get(free[j])) idx |= std::uint64_t{1} << j;
        counts[idx] = c;
    }
    std::uint64_t top = 0;
    for (const auto& [idx, c] : counts) top = std::max(top, c);
    t.shift = static_cast<long double>(top) * ln_b;
    t.excess_total = 0.0L;
    for (const auto& [idx, c] : counts) {
        const long double x = static_cast<long double>(c) * ln_b;
        const long double e = std::exp(x - t.shift) * -std::expm1(-x);
        t.excess[idx] = e;
        t.excess_total += e;
        t.nonempty.push_back(idx);
    }
    std::sort(t.nonempty.begin(), t.nonempty.end());
    return t;
}

// Scaled sum over C of a_C a_{C+w} times exp(-2 shift).
long double scaled_pair_sum(const StepTable& t, std::uint64_t w) {
    long double cross = 0.0L;
    for (std::uint64_t c : t.nonempty) cross += t.excess[c] * t.excess[c ^ w];
    return t.quotient_size * std::exp(-2.0L * t.shift) + 2.0L * t.excess_total * std::exp(-t.shift) + cross;
}

long double log_phi_of(const StepTable& t) {
    return t.shift + std::log(t.quotient_size * std::exp(-t.shift) + t.excess_total) - std::log(t.quotient_size);
}

}  // namespace

std::vector<long double> step_log_potentials(const KeySet& s, const Subspace& v, double b) {
    const StepTable t = build_step_table(s, v, b);
    const long double log_n = std::log(t.quotient_size);
    std::vector<long double> out(t.excess.size());
    out[0] = log_phi_of(t);
    for (std::uint64_t w = 1; w < out.size(); ++w)
        out[w] = 2.0L * t.shift + std::log(scaled_pair_sum(t, w)) - log_n;
    return out;
}

StepExpectation conditional_step_expectation_exhaustive(const KeySet& s, const Subspace& v, double b) {
    const StepTable t = build_step_table(s, v, b);
    const std::uint64_t size = t.excess.size();
    long double total = 0.0L;
    for (std::uint64_t w = 1; w < size; ++w) total += scaled_pair_sum(t, w);
    const long double mean_scaled = total / static_cast<long double>(size - 1);
    StepExpectation out{};
    out.log_mean_phi_next = 2.0L * t.shift + std::log(mean_scaled) - std::log(t.quotient_size);
    out.log_phi_sq = 2.0L * log_phi_of(t);
    out.samples = static_cast<std::size_t>(size - 1);
    return out;
}

StepExpectation conditional_step_expectation_sampled(const KeySet& s, const Subspace& v, double b,
                                                     std::size_t trials, RngStream& rng) {
    require_compatible(s, v, b);
    if (trials == 0) throw std::invalid_argument("sampled conditional step needs trials >= 1");
    const PotentialValue current = potential(s, v, b);
    std::vector<long double> logs;
    logs.reserve(trials);
    for (std::size_t i = 0; i < trials; ++i) {
        Subspace next = v;
        next.adjoin(sample_outside(v, rng));
        logs.push_back(potential(s, next, b).log_phi);
    }
    const long double top = *std::max_element(logs.begin(), logs.end());
    long double acc = 0.0L;
    for (long double x : logs) acc += std::exp(x - top);
    StepExpectation out{};
    out.log_mean_phi_next = top + std::log(acc / static_cast<long double>(trials));
    out.log_phi_sq = 2.0L * current.log_phi;
    out.samples = trials;
    return out;
}

HeavyBinResult heavy_bin_check(const KeySet& s, const KernelChain& chain, double b, std::size_t ell, double slack) {
    if (chain.ambient_dim < ell || chain.length() != chain.ambient_dim - ell)
        throw std::invalid_argument("heavy_bin_check: chain length must equal U - ell");
    const Subspace& kernel = chain.final_stage();
    std::uint64_t top = 0;
    for (const auto& [label, c] : coset_loads(s, kernel)) top = std::max(top, c);
    const PotentialValue p = potential(s, kernel, b);
    const long double lower = static_cast<long double>(top) * std::log(static_cast<long double>(b)) -
                              static_cast<long double>(ell) * kLn2;
    const bool ok = p.log_phi >= lower + std::log1p(-static_cast<long double>(slack));
    return {ok, top, p.log_phi, lower};
}

QuadraticTail quadratic_tail_check_excess(std::span<const PotentialTrace> traces, long double tau_minus_one) {
    if (traces.empty()) throw std::invalid_argument("quadratic_tail_check: no traces");
    const std::size_t k = traces.front().k;
    const long double x0_excess = traces.front().phi_minus_one.front();
    for (const auto& t : traces) {
        if (t.k != k) throw std::invalid_argument("quadratic_tail_check: traces have different lengths");
        const long double d = std::fabs(t.phi_minus_one.front() - x0_excess);
        if (d > 1e-12L * std::max(x0_excess, 1e-300L))
            throw std::invalid_argument("quadratic_tail_check: traces start from different Phi_0");
    }
    if (!(tau_minus_one > 0) || tau_minus_one < 4.0L * x0_excess * (1.0L - 1e-12L))
        throw std::invalid_argument("quadratic_tail_check: tau must satisfy tau >= 1 + 4 (Phi_0 - 1)");
    const long double log_threshold = std::ldexp(1.0L, static_cast<int>(k)) * std::log1p(tau_minus_one);
    std::size_t hits = 0;
    for (const auto& t : traces)
        if (t.log_phi.back() >= log_threshold) ++hits;
    const long double ratio = x0_excess / tau_minus_one;
    const double bound = static_cast<double>(std::min(1.0L, 48.0L * ratio * ratio));
    return {static_cast<double>(hits) / static_cast<double>(traces.size()), bound, hits, traces.size()};
}

QuadraticTail quadratic_tail_check(std::span<const PotentialTrace> traces, double tau) {
    return quadratic_tail_check_excess(traces, static_cast<long double>(tau) - 1.0L);
}

TailRecipe replay_recipe(unsigned ell, double R, std::size_t k) {
    const auto p = theory::make_bound_params(ell, ell, std::uint64_t{1} << ell, R);
    const long double tau_minus_one =
        std::ldexp(kLn2 * static_cast<long double>(p.A) * static_cast<long double>(ell), -static_cast<int>(k));
    return {p.b, p.A, tau_minus_one, p.T};
}

void write_trace_csv(std::ostream& out, const PotentialTrace& trace) {
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << "stage,phi,phi_minus_one,log_phi\n" << std::setprecision(17);
    for (std::size_t i = 0; i < trace.phi.size(); ++i)
        out << i << ',' << trace.phi[i] << ',' << trace.phi_minus_one[i] << ',' << trace.log_phi[i] << '\n';
    out.flags(flags);
    out.precision(prec);
}

}  // namespace linhash::potential
