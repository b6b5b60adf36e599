#include "linhash/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "linhash/experiments.hpp"
#include "linhash/potential.hpp"
#include "linhash/theory.hpp"

namespace linhash::cli {

namespace {

namespace ex = linhash::experiments;
using json = nlohmann::ordered_json;

struct Falsified : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double x) { return ex::format_double(x); }

void require(bool cond, const std::string& message) {
    if (!cond) throw std::invalid_argument(message);
}

// Flags shared by the Monte Carlo subcommands.
struct Common {
    std::size_t u = 0;
    std::size_t ell = 0;
    std::uint64_t m = 0;
    std::uint64_t trials = 1000;
    std::uint64_t seed = 0;
    std::string key_kind = "random_distinct_nonzero";
    std::size_t d = 0;
    std::string key_file;
    bool surjective = false;
    double z = 3.0;
    unsigned threads = 0;
    std::string format = "csv";
    std::string output;
    std::string name;
    CLI::Option* seed_opt = nullptr;
};

void add_output(CLI::App* sub, Common& c) {
    sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    sub->add_option("--output", c.output, "Write results to this file instead of standard output");
}

void add_seed(CLI::App* sub, Common& c) {
    c.seed_opt = sub->add_option("--seed", c.seed, "Master seed (falls back to $LINHASH_SEED, then 0)");
}

void add_threads(CLI::App* sub, Common& c) {
    sub->add_option("--threads", c.threads, "Worker threads (0 = available parallelism)")->capture_default_str();
}

void add_experiment(CLI::App* sub, Common& c) {
    sub->add_option("--u", c.u, "Key dimension u (keys live in F_2^u)")->required();
    sub->add_option("--ell", c.ell, "Bucket dimension ell (n = 2^ell buckets)")->required();
    sub->add_option("--m", c.m, "Number of keys");
    sub->add_option("--trials", c.trials, "Number of independent hash draws")->capture_default_str();
    add_seed(sub, c);
    sub->add_option("--keys", c.key_kind, "Key-set kind: random_distinct_nonzero, random_distinct, subspace_plus_one, from_file")
        ->capture_default_str();
    sub->add_option("--d", c.d, "Subspace dimension for subspace_plus_one keys");
    sub->add_option("--key-file", c.key_file, "Key-set file for --keys from_file");
    sub->add_flag("--surjective", c.surjective, "Condition the hash matrix on full row rank");
    sub->add_option("--z", c.z, "Normal quantile for confidence intervals")->capture_default_str();
    sub->add_option("--name", c.name, "Row label in the results table");
    add_threads(sub, c);
    add_output(sub, c);
}

std::uint64_t resolve_seed(const Common& c) {
    if (c.seed_opt != nullptr && c.seed_opt->count() > 0) return c.seed;
    if (const char* env = std::getenv("LINHASH_SEED")) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(env, &used, 0);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw std::invalid_argument(std::string("LINHASH_SEED is not an unsigned integer: '") + env + "'");
    }
    return 0;
}

ex::ExperimentSpec make_spec(const Common& c, const std::string& default_name) {
    ex::ExperimentSpec s;
    s.name = c.name.empty() ? default_name : c.name;
    s.u = c.u;
    s.ell = c.ell;
    s.m = c.m;
    s.key_kind = parse_key_set_kind(c.key_kind);
    s.d = c.d;
    s.key_path = c.key_file;
    if (s.key_kind == KeySetKind::from_file) require(!c.key_file.empty(), "--keys from_file requires --key-file");
    if (s.key_kind == KeySetKind::subspace_plus_one) {
        require(c.d >= 1, "--keys subspace_plus_one requires --d >= 1");
    } else if (s.key_kind != KeySetKind::from_file) {
        require(c.m >= 1, "--m must be >= 1");
    }
    s.trials = c.trials;
    s.master_seed = resolve_seed(c);
    s.surjective_only = c.surjective;
    s.z = c.z;
    s.threads = c.threads;
    return s;
}

// Either standard output or the --output file.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw std::invalid_argument("cannot open output file '" + path + "'");
            out_ = file_.get();
        }
    }
    std::ostream& operator*() { return *out_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* out_;
};

void emit_rows(const Common& c, std::ostream& out, const std::vector<ex::TailEstimate>& rows, std::ostream& err) {
    Sink sink(c.output, out);
    if (c.format == "json")
        ex::write_results_json(*sink, rows);
    else
        ex::write_results_csv(*sink, rows);
    for (const auto& r : rows)
        if (r.warning) err << "warning: " << r.name << ": " << *r.warning << '\n';
}

void check_falsified(const std::vector<ex::TailEstimate>& rows) {
    for (const auto& r : rows)
        if (r.falsified())
            throw Falsified(r.name + ": ci_low " + fmt(r.ci_low) + " exceeds admissible theory bound " +
                            fmt(*r.theory_bound));
}

void print_kv(std::ostream& out, const std::string& format, const json& j) {
    if (format == "json") {
        out << j.dump(2) << '\n';
        return;
    }
    bool first = true;
    for (const auto& [k, v] : j.items()) out << (first ? "" : ",") << k, first = false;
    out << '\n';
    first = true;
    for (const auto& [k, v] : j.items()) {
        out << (first ? "" : ",");
        first = false;
        if (v.is_number_float())
            out << fmt(v.get<double>());
        else if (v.is_boolean())
            out << (v.get<bool>() ? 1 : 0);
        else if (v.is_string())
            out << v.get<std::string>();
        else
            out << v.dump();
    }
    out << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Laboratory for binary linear hashing h(x) = Hx over F_2: bounds, distributions, potential "
                 "process and Monte Carlo load experiments.",
                 "linhash"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    // bound
    Common bc;
    std::string kind;
    std::uint64_t r = 0, q = 0;
    unsigned a = 0, big_u = 0;
    double lambda = 1.0, ell_real = 0, R = 0, T = 0;
    bool lower = false;
    auto* bound = app.add_subcommand(
        "bound",
        "Closed-form bounds. fixed: fixed-bucket tail theorem Pr[Z_y > r] <= lambda^a / prod (r+2-2^j); "
        "dyadic: gamma^{-1} lambda^a 2^{-a^2} (--lower gives the matching gamma^2 lower bound); maxload: "
        "base-optimized maximum-load tail; general: general-load tail C (lambda n^{1/T}/T)^2; surjectivity: rank "
        "deficiency lemma; gamma: prod (1-2^{-j}); tuple: independent-tuple count lower bound; base: b = e ell^{1/R}.");
    bound->add_option("--kind", kind, "fixed, dyadic, maxload, general, surjectivity, gamma, tuple, base")
        ->required()
        ->check(CLI::IsMember({"fixed", "dyadic", "maxload", "general", "surjectivity", "gamma", "tuple", "base"}));
    auto* r_opt = bound->add_option("--r", r, "Load threshold r (fixed)");
    auto* a_opt = bound->add_option("--a", a, "Exponent a (dyadic)");
    bound->add_option("--lambda", lambda, "Average load lambda = m / 2^ell")->capture_default_str();
    auto* ell_opt = bound->add_option("--ell", ell_real, "ell (maxload, general, surjectivity, base)");
    auto* R_opt = bound->add_option("--R", R, "Scale factor R (maxload, base)");
    auto* T_opt = bound->add_option("--T", T, "Load threshold T (general)");
    auto* u_opt = bound->add_option("--u", big_u, "Ambient dimension U (surjectivity)");
    auto* q_opt = bound->add_option("--q", q, "Set size q (tuple)");
    bound->add_flag("--lower", lower, "dyadic: print the gamma^2 lower bound instead");
    add_output(bound, bc);

    // pmf
    Common pc;
    unsigned square = 0, rect_ell = 0, rect_d = 0;
    bool rect = false;
    auto* pmf = app.add_subcommand(
        "pmf", "Nullity distributions of uniform matrices over F_2: --square m (m x m), or --rect --ell --d "
               "(ell x d, nullity of h restricted to a d-dimensional subspace).");
    auto* square_opt = pmf->add_option("--square", square, "Size of the square matrix");
    pmf->add_flag("--rect", rect, "Rectangular ell x d matrices");
    pmf->add_option("--ell", rect_ell, "Rows (rect)");
    pmf->add_option("--d", rect_d, "Columns (rect)");
    add_output(pmf, pc);

    // solve-t
    Common tc;
    unsigned t_ell = 0;
    std::uint64_t t_m = 0;
    double t_lambda = 0;
    auto* solve_t = app.add_subcommand(
        "solve-t", "Fully random max-load scale t = t(m, n): the root of t ln(t / (e lambda)) = ln n with t > e lambda.");
    solve_t->add_option("--ell", t_ell, "n = 2^ell")->required();
    auto* t_m_opt = solve_t->add_option("--m", t_m, "Number of keys (lambda = m / 2^ell)");
    auto* t_lambda_opt = solve_t->add_option("--lambda", t_lambda, "Average load directly");
    add_output(solve_t, tc);

    // expectation-bound
    Common ec;
    double e_ell = 0;
    bool strict = false, general = false, sparse = false;
    std::uint64_t e_m = 0;
    auto* expect = app.add_subcommand(
        "expectation-bound",
        "Numerical upper bound on E[M(S,h)] from integrating the base-optimized tail (second-order expectation "
        "corollary). With --sparse --m the sparse large-load corollary is evaluated instead.");
    expect->add_option("--ell", e_ell, "ell (>= 4)")->required();
    expect->add_flag("--strict", strict, "Reject when R0 is not admissible instead of padding with the trivial bound");
    expect->add_flag("--general", general, "Use the general-load constants");
    expect->add_flag("--sparse", sparse, "Sparse regime bound in units of t(m, n); requires --m");
    expect->add_option("--m", e_m, "Number of keys (sparse)");
    add_output(expect, ec);

    // mc-fixed-bucket
    Common fc;
    std::uint64_t f_r = 0;
    std::string bucket_hex;
    bool sweep = false;
    auto* mcf = app.add_subcommand(
        "mc-fixed-bucket",
        "Monte Carlo Pr[Z_y > r] for one bucket against the fixed-bucket tail theorem. Exit 2 if the admissible "
        "bound lies below the confidence interval.");
    add_experiment(mcf, fc);
    mcf->add_option("--r", f_r, "Load threshold r")->required();
    mcf->add_option("--bucket", bucket_hex, "Bucket label y in hex (default 0)");
    mcf->add_flag("--sweep", sweep, "Also run 7 further random buckets");

    // mc-max-load
    Common mc;
    double m_T = 0, m_R = 0;
    std::string histogram_path;
    auto* mcm = app.add_subcommand(
        "mc-max-load",
        "Monte Carlo Pr[M(S,h) >= T] and E[M(S,h)] against the base-optimized (m = 2^ell) or general maximum-load "
        "tail. The mean and its interval go to standard error.");
    add_experiment(mcm, mc);
    auto* m_T_opt = mcm->add_option("--T", m_T, "Load threshold T");
    auto* m_R_opt = mcm->add_option("--R", m_R, "Threshold as T = R ell / log2 ell");
    mcm->add_option("--histogram", histogram_path, "Write the bucket histogram of trial 0 as CSV");

    // mc-surjectivity
    Common sc;
    auto* mcs = app.add_subcommand(
        "mc-surjectivity",
        "Monte Carlo Pr[rank H < ell] for uniform ell x U matrices against the rank deficiency lemma (<= 2^{ell-U}).");
    mcs->add_option("--u", sc.u, "Columns U")->required();
    mcs->add_option("--ell", sc.ell, "Rows ell")->required();
    mcs->add_option("--trials", sc.trials, "Number of matrices")->capture_default_str();
    mcs->add_option("--z", sc.z, "Normal quantile")->capture_default_str();
    add_seed(mcs, sc);
    add_threads(mcs, sc);
    add_output(mcs, sc);

    // sharpness
    Common hc;
    std::size_t h_d = 0;
    unsigned h_a = 0;
    auto* sharp = app.add_subcommand(
        "sharpness",
        "Subspace construction S = (W \\ {0}) + {v} with dim W = d: Monte Carlo Pr[Z_0 > 2^a - 2] between the "
        "matching lower bound gamma^2 lambda^a 2^{-a^2} and the dyadic upper bound.");
    sharp->add_option("--d", h_d, "dim W")->required();
    sharp->add_option("--ell", hc.ell, "Bucket dimension ell")->required();
    sharp->add_option("--a", h_a, "Exponent a")->required();
    sharp->add_option("--trials", hc.trials, "Number of hash draws")->capture_default_str();
    sharp->add_option("--z", hc.z, "Normal quantile")->capture_default_str();
    add_seed(sharp, hc);
    add_threads(sharp, hc);
    add_output(sharp, hc);

    // potential-trace
    Common tr;
    double tr_b = 0, tr_R = 0;
    std::uint64_t chains = 1;
    std::string out_dir;
    auto* ptrace = app.add_subcommand(
        "potential-trace",
        "Kernel-chain potential process Phi_i = E_x b^{S_i(x)}: per chain, growth Phi_{i+1}-1 >= 2(Phi_i-1) and the "
        "heavy-bin inequality Phi_k >= b^T/2^ell. With --R the base and tau follow the optimized recipe and the "
        "quadratic potential tail is checked across chains.");
    ptrace->add_option("--u", tr.u, "Key dimension U")->required();
    ptrace->add_option("--ell", tr.ell, "Bucket dimension ell")->required();
    ptrace->add_option("--m", tr.m, "Number of keys (default min(2^ell, 2^U - 1))");
    ptrace->add_option("--keys", tr.key_kind, "Key-set kind")->capture_default_str();
    ptrace->add_option("--d", tr.d, "Subspace dimension for subspace_plus_one keys");
    ptrace->add_option("--key-file", tr.key_file, "Key-set file for --keys from_file");
    auto* tr_b_opt = ptrace->add_option("--b", tr_b, "Potential base b > 1");
    auto* tr_R_opt = ptrace->add_option("--R", tr_R, "Use b = e ell^{1/R} and the matching tau");
    ptrace->add_option("--chains", chains, "Number of chains")->capture_default_str();
    ptrace->add_option("--output-dir", out_dir, "Write chain_<i>.csv traces here");
    add_seed(ptrace, tr);
    add_output(ptrace, tr);

    // verify-lemmas
    Common vc;
    double v_b = 2.0;
    std::uint64_t v_m = 0;
    std::size_t v_bits = 16;
    auto* verify = app.add_subcommand(
        "verify-lemmas",
        "Gate for the potential lemmas on random instances: growth, heavy bin, Phi_0 identity, and the exact "
        "conditional expectation E[Phi_{i+1} | Phi_i] <= Phi_i^2 wherever the quotient is small enough.");
    verify->add_option("--u", vc.u, "Key dimension U")->required();
    verify->add_option("--ell", vc.ell, "Bucket dimension ell")->required();
    verify->add_option("--m", v_m, "Number of keys (default min(2^ell, 2^U))");
    verify->add_option("--b", v_b, "Potential base")->capture_default_str();
    verify->add_option("--trials", vc.trials, "Number of instances")->capture_default_str();
    verify->add_option("--max-exhaustive-bits", v_bits, "Largest quotient log-size for the exact expectation")
        ->capture_default_str();
    add_seed(verify, vc);
    add_threads(verify, vc);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    try {
        if (bound->parsed()) {
            json j;
            j["kind"] = kind;
            double value = 0;
            if (kind == "fixed") {
                require(r_opt->count() > 0, "bound --kind fixed requires --r");
                value = theory::fixed_bucket_tail_bound(r, lambda);
            } else if (kind == "dyadic") {
                require(a_opt->count() > 0, "bound --kind dyadic requires --a");
                value = lower ? theory::dyadic_fixed_bucket_lower_bound(a, lambda)
                              : theory::dyadic_fixed_bucket_bound(a, lambda);
            } else if (kind == "maxload") {
                require(ell_opt->count() > 0 && R_opt->count() > 0, "bound --kind maxload requires --ell and --R");
                const auto b = theory::maxload_tail_bound(ell_real, R);
                value = b.value;
                j["admissible"] = b.admissible;
                if (!b.admissible) err << "warning: R ell^{1-1/R} < D ln ell; the bound is not proved here\n";
            } else if (kind == "general") {
                require(ell_opt->count() > 0 && T_opt->count() > 0, "bound --kind general requires --ell and --T");
                const auto b = theory::general_tail_bound(ell_real, lambda, T);
                value = b.value;
                j["admissible"] = b.admissible;
                if (!b.admissible) err << "warning: T < D lambda n^{1/T}; the bound is not proved here\n";
            } else if (kind == "surjectivity") {
                require(ell_opt->count() > 0 && u_opt->count() > 0, "bound --kind surjectivity requires --u and --ell");
                require(ell_real >= 0 && ell_real == std::floor(ell_real), "--ell must be a nonnegative integer");
                const auto f = theory::surjectivity_failure(big_u, static_cast<unsigned>(ell_real));
                value = f.exact;
                j["bound"] = f.bound;
            } else if (kind == "gamma") {
                value = theory::gamma_constant();
            } else if (kind == "tuple") {
                require(q_opt->count() > 0, "bound --kind tuple requires --q");
                value = static_cast<double>(theory::tuple_count_lower_bound(q));
            } else {
                require(ell_opt->count() > 0 && R_opt->count() > 0, "bound --kind base requires --ell and --R");
                value = theory::optimized_base(ell_real, R);
            }
            Sink sink(bc.output, out);
            if (bc.format == "json") {
                j["value"] = value;
                *sink << j.dump(2) << '\n';
            } else {
                *sink << fmt(value) << '\n';
            }
            return kExitOk;
        }

        if (pmf->parsed()) {
            require((square_opt->count() > 0) != rect, "pmf needs exactly one of --square or --rect");
            std::vector<std::pair<unsigned, double>> rows;
            if (rect) {
                require(rect_ell >= 1 && rect_d >= 1, "pmf --rect requires --ell >= 1 and --d >= 1");
                const unsigned lo = rect_d > rect_ell ? rect_d - rect_ell : 0;
                for (unsigned k = lo; k <= rect_d; ++k) rows.emplace_back(k, theory::rect_rank_pmf(rect_ell, rect_d, k));
            } else {
                require(square >= 1, "pmf --square requires m >= 1");
                for (unsigned k = 0; k <= square; ++k) rows.emplace_back(k, theory::square_nullity_pmf(square, k));
            }
            Sink sink(pc.output, out);
            if (pc.format == "json") {
                json arr = json::array();
                for (const auto& [k, p] : rows) arr.push_back({{"a", k}, {"p", p}});
                *sink << arr.dump(2) << '\n';
            } else {
                for (const auto& [k, p] : rows) *sink << "a=" << k << ':' << fmt(p) << '\n';
            }
            return kExitOk;
        }

        if (solve_t->parsed()) {
            require((t_m_opt->count() > 0) != (t_lambda_opt->count() > 0), "solve-t needs exactly one of --m or --lambda");
            const auto s = t_m_opt->count() > 0 ? theory::solve_t_scale(t_m, t_ell) : theory::solve_t_scale_lambda(t_lambda, t_ell);
            Sink sink(tc.output, out);
            print_kv(*sink, tc.format, json{{"t", s.t}, {"lambda", s.lambda}, {"residual", s.residual}});
            return kExitOk;
        }

        if (expect->parsed()) {
            const auto k = general ? theory::TailConstants::general() : theory::TailConstants::balanced();
            Sink sink(ec.output, out);
            if (sparse) {
                require(e_m >= 1, "expectation-bound --sparse requires --m >= 1");
                require(e_ell >= 1 && e_ell == std::floor(e_ell), "--ell must be a positive integer");
                const auto b = theory::sparse_expectation_upper_bound(e_m, static_cast<unsigned>(e_ell), k);
                print_kv(*sink, ec.format,
                         json{{"value", b.value}, {"t", b.t}, {"rho", b.rho}, {"r0", b.r0}, {"r_start", b.r_start},
                              {"f", b.f}, {"r0_admissible", b.r0_admissible}});
                return kExitOk;
            }
            theory::ExpectationOptions opts;
            opts.constants = k;
            opts.strict = strict;
            const auto b = theory::expected_maxload_upper_bound(e_ell, opts);
            print_kv(*sink, ec.format,
                     json{{"ell", e_ell}, {"value", b.value}, {"scale", b.scale}, {"ratio", b.ratio}, {"r0", b.r0},
                          {"r_start", b.r_start}, {"f", b.f}, {"r0_admissible", b.r0_admissible}});
            return kExitOk;
        }

        if (mcf->parsed()) {
            auto spec = make_spec(fc, "fixed_bucket");
            spec.threshold = static_cast<double>(f_r);
            if (!bucket_hex.empty()) spec.bucket = BitVector::from_hex(fc.ell, bucket_hex);
            std::vector<ex::TailEstimate> rows;
            if (sweep) {
                for (auto& [y, e] : ex::mc_fixed_bucket_sweep(spec)) rows.push_back(std::move(e));
            } else {
                rows.push_back(ex::mc_fixed_bucket_tail(spec));
            }
            emit_rows(fc, out, rows, err);
            check_falsified(rows);
            return kExitOk;
        }

        if (mcm->parsed()) {
            require((m_T_opt->count() > 0) != (m_R_opt->count() > 0), "mc-max-load needs exactly one of --T or --R");
            auto spec = make_spec(mc, "max_load");
            if (m_R_opt->count() > 0) {
                require(mc.ell >= 2, "--R requires ell >= 2");
                const double l = static_cast<double>(mc.ell);
                spec.threshold = m_R * l / std::log2(l);
            } else {
                spec.threshold = m_T;
            }
            const auto res = ex::mc_max_load(spec);
            emit_rows(mc, out, {res.tail}, err);
            err << "mean_load=" << fmt(res.mean_load) << " ci=[" << fmt(res.mean_ci_low) << ", "
                << fmt(res.mean_ci_high) << "]";
            if (mc.ell >= 2) {
                const double l = static_cast<double>(mc.ell);
                err << " ratio_to_ell_over_log2_ell=" << fmt(res.mean_load / (l / std::log2(l)));
            }
            err << '\n';
            if (!histogram_path.empty()) {
                std::ofstream h(histogram_path);
                require(static_cast<bool>(h), "cannot open histogram file '" + histogram_path + "'");
                write_histogram_csv(h, ex::trial_histogram(spec, 0));
            }
            check_falsified({res.tail});
            return kExitOk;
        }

        if (mcs->parsed()) {
            const auto e = ex::mc_surjectivity(sc.u, sc.ell, sc.trials, resolve_seed(sc), sc.threads, sc.z);
            emit_rows(sc, out, {e}, err);
            const double bound = std::ldexp(1.0, static_cast<int>(sc.ell) - static_cast<int>(sc.u));
            if (e.ci_low > bound) throw Falsified("surjectivity: ci_low " + fmt(e.ci_low) + " exceeds 2^{ell-U} = " + fmt(bound));
            return kExitOk;
        }

        if (sharp->parsed()) {
            const auto s = ex::subspace_sharpness_experiment(h_d, hc.ell, h_a, hc.trials, resolve_seed(hc), hc.threads, hc.z);
            emit_rows(hc, out, {s.tail}, err);
            err << "lower=" << fmt(s.lower) << " upper=" << fmt(s.upper) << " nullity_tail=" << fmt(s.nullity_tail)
                << " exact=" << fmt(s.exact) << '\n';
            if (s.tail.ci_low > s.upper) throw Falsified("sharpness: ci_low exceeds the upper bound");
            if (s.tail.ci_high < s.lower) throw Falsified("sharpness: ci_high is below the matching lower bound");
            return kExitOk;
        }

        if (ptrace->parsed()) {
            require((tr_b_opt->count() > 0) != (tr_R_opt->count() > 0), "potential-trace needs exactly one of --b or --R");
            require(tr.u >= tr.ell && tr.ell >= 1, "potential-trace requires 1 <= ell <= u");
            require(chains >= 1, "--chains must be >= 1");
            ex::ExperimentSpec spec;
            spec.u = tr.u;
            spec.ell = tr.ell;
            spec.key_kind = parse_key_set_kind(tr.key_kind);
            spec.d = tr.d;
            spec.key_path = tr.key_file;
            spec.m = tr.m;
            if (spec.m == 0 && tr.u < 64 && spec.key_kind != KeySetKind::subspace_plus_one)
                spec.m = std::min<std::uint64_t>(std::uint64_t{1} << tr.ell, (std::uint64_t{1} << tr.u) - 1);
            spec.master_seed = resolve_seed(tr);
            const KeySet keys = ex::experiment_keys(spec);
            const std::size_t k = tr.u - tr.ell;
            const double b = tr_R_opt->count() > 0 ? theory::optimized_base(static_cast<double>(tr.ell), tr_R) : tr_b;
            std::vector<potential::PotentialTrace> traces;
            bool ok = true;
            Sink sink(tr.output, out);
            json arr = json::array();
            if (tr.format != "json") *sink << "chain,k,phi0_minus_one,log_phi_k,max_load,growth,heavy_bin\n";
            for (std::uint64_t c = 0; c < chains; ++c) {
                RngStream rng(spec.master_seed, c);
                const auto chain = potential::sample_kernel_chain(tr.u, k, rng);
                auto trace = potential::trace_potentials(keys, chain, b);
                const bool growth = potential::verify_growth(trace);
                const auto heavy = potential::heavy_bin_check(keys, chain, b, tr.ell);
                ok = ok && growth && heavy.passed;
                if (tr.format == "json") {
                    arr.push_back({{"chain", c}, {"k", k}, {"phi0_minus_one", static_cast<double>(trace.phi_minus_one[0])},
                                   {"log_phi_k", static_cast<double>(trace.log_phi.back())}, {"max_load", heavy.max_load},
                                   {"growth", growth}, {"heavy_bin", heavy.passed}});
                } else {
                    *sink << c << ',' << k << ',' << fmt(static_cast<double>(trace.phi_minus_one[0])) << ','
                          << fmt(static_cast<double>(trace.log_phi.back())) << ',' << heavy.max_load << ','
                          << (growth ? 1 : 0) << ',' << (heavy.passed ? 1 : 0) << '\n';
                }
                if (!out_dir.empty()) {
                    std::filesystem::create_directories(out_dir);
                    const auto path = std::filesystem::path(out_dir) / ("chain_" + std::to_string(c) + ".csv");
                    std::ofstream f(path);
                    require(static_cast<bool>(f), "cannot write " + path.string());
                    potential::write_trace_csv(f, trace);
                }
                traces.push_back(std::move(trace));
            }
            if (tr.format == "json") *sink << arr.dump(2) << '\n';
            if (tr_R_opt->count() > 0 && tr_R > 1.0 && tr.ell >= 2) {
                const auto recipe = potential::replay_recipe(static_cast<unsigned>(tr.ell), tr_R, k);
                try {
                    const auto qt = potential::quadratic_tail_check_excess(traces, recipe.tau_minus_one);
                    const double sigma = std::sqrt(std::max(qt.bound * (1 - qt.bound), 1e-300) / static_cast<double>(qt.count));
                    err << "quadratic tail: empirical=" << fmt(qt.empirical) << " bound=" << fmt(qt.bound) << '\n';
                    if (qt.empirical > qt.bound + 3 * sigma) throw Falsified("quadratic potential tail exceeded its bound");
                } catch (const std::invalid_argument& e) {
                    err << "quadratic tail: not checked (" << e.what() << ")\n";
                }
            }
            if (!ok) throw Falsified("a chain failed the growth or heavy-bin inequality");
            return kExitOk;
        }

        if (verify->parsed()) {
            ex::LemmaGateSpec g;
            g.u = vc.u;
            g.ell = vc.ell;
            g.m = v_m;
            g.b = v_b;
            g.instances = vc.trials;
            g.seed = resolve_seed(vc);
            g.threads = vc.threads;
            g.max_exhaustive_bits = v_bits;
            const auto rep = ex::verify_lemma_gate(g);
            auto line = [&](const char* what, std::uint64_t fails, std::uint64_t total) {
                out << what << ": " << (fails == 0 ? "passed" : "FAILED") << " (" << (total - fails) << '/' << total << ")\n";
            };
            line("growth", rep.growth_failures, rep.instances);
            line("heavy-bin", rep.heavy_bin_failures, rep.instances);
            line("phi0-identity", rep.identity_failures, rep.instances);
            line("conditional-expectation", rep.expectation_failures, rep.expectation_checks);
            if (!rep.passed()) throw Falsified("potential lemma gate failed");
            out << "all lemma checks passed\n";
            return kExitOk;
        }
    } catch (const Falsified& e) {
        err << "falsified: " << e.what() << '\n';
        return kExitFalsified;
    } catch (const theory::InadmissibleError& e) {
        err << "error: " << e.what() << " (smallest admissible ell ~ " << fmt(e.min_admissible_ell()) << ")\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    return kExitInvalid;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace linhash::cli
