#include <cmath>
#include <complex>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kloostlab/double_sums.hpp"
#include "kloostlab/experiment.hpp"
#include "kloostlab/inverse_dist.hpp"
#include "kloostlab/kloosterman.hpp"
#include "kloostlab/log.hpp"

namespace {

using namespace kloostlab;

struct Flags {
    std::string config;
    std::string out;
    std::string format;
    std::string sequence;
    std::string primes;
    u64 N = 0, pairs = 0, k = 0, v_max = 0, samples = 0, set_size = 0, bins = 0, Kmax = 0,
        seed = 0;
    double K = 0, L = 0, eps = 0, kappa = 0, c_et = 0, log_base = 0;
    i64 x = 0, y = 0, interval_K = 0, interval_H = 0;
    int threads = 0;
    bool strict = false, resume = false, weil_strict = false;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "config file (key = value lines)");
    sub->add_option("--out", f.out, "output path; '-' writes to stdout");
    sub->add_option("--format", f.format, "csv or jsonl")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    sub->add_option("--seed", f.seed, "PRNG seed (recorded in every row)");
    sub->add_option("--threads", f.threads, "thread budget; 0 = hardware");
    sub->add_flag("--strict", f.strict, "abort on the first failed grid point (exit 2)");
    sub->add_flag("--resume", f.resume, "append to --out, skipping completed grid points");

    sub->add_option("--sequence", f.sequence, "power:<c>[:theorem] or custom:<name>");
    sub->add_option("--primes", f.primes, "comma-separated prime moduli");
    sub->add_option("--N", f.N, "number of terms");
    sub->add_option("--K", f.K, "short-interval start");
    sub->add_option("--L", f.L, "short-interval length");
    sub->add_option("--x", f.x, "psi parameter x");
    sub->add_option("--y", f.y, "psi parameter y");
    sub->add_option("--pairs", f.pairs, "number of random (x,y) pairs per prime");
    sub->add_option("--eps", f.eps, "theorem epsilon");
    sub->add_option("--kappa", f.kappa, "growth exponent kappa");
    sub->add_option("--interval-K", f.interval_K, "residue interval K");
    sub->add_option("--interval-H", f.interval_H, "residue interval H");
    sub->add_option("--k", f.k, "Hoelder power / pole tuple length");
    sub->add_option("--v-max", f.v_max, "pole entries drawn from [0, v_max)");
    sub->add_option("--samples", f.samples, "random instances per prime");
    sub->add_option("--set-size", f.set_size, "weighted set cardinality");
    sub->add_option("--bins", f.bins, "pigeonhole bins for the xi0 search");
    sub->add_option("--Kmax", f.Kmax, "Erdos-Turan frequency cutoff");
    sub->add_option("--c-et", f.c_et, "Erdos-Turan constant");
    sub->add_option("--log-base", f.log_base, "log base in the decomposition R (0 = natural)");
    sub->add_flag("--weil-strict", f.weil_strict, "use the (2k-1)sqrt(p)+2k threshold");
}

ExperimentConfig assemble(const CLI::App* sub, const Flags& f, ExperimentKind kind) {
    ExperimentConfig cfg;
    if (sub->count("--config")) cfg = parse_config_file(f.config, cfg);
    cfg.kind = kind;

    if (sub->count("--out")) cfg.out = f.out;
    if (sub->count("--format")) cfg.format = format_from_name(f.format);
    if (sub->count("--seed")) cfg.seed = f.seed;
    if (sub->count("--threads")) cfg.threads = f.threads;
    if (sub->count("--strict")) cfg.strict = f.strict;
    if (sub->count("--resume")) cfg.resume = f.resume;

    if (sub->count("--sequence")) cfg.sequence = f.sequence;
    if (sub->count("--primes")) {
        cfg.primes.clear();
        std::string cur;
        std::stringstream ss(f.primes);
        while (std::getline(ss, cur, ',')) {
            if (cur.empty()) continue;
            try {
                cfg.primes.push_back(std::stoull(cur));
            } catch (const std::exception&) {
                throw ConfigError("bad prime list entry: " + cur);
            }
        }
        if (cfg.primes.empty()) throw ConfigError("empty --primes list");
    }
    if (sub->count("--N")) cfg.N = f.N;
    if (sub->count("--K")) cfg.K = f.K;
    if (sub->count("--L")) cfg.L = f.L;
    if (sub->count("--x")) cfg.x = f.x;
    if (sub->count("--y")) cfg.y = f.y;
    if (sub->count("--pairs")) cfg.pairs = f.pairs;
    if (sub->count("--eps")) cfg.eps = f.eps;
    if (sub->count("--kappa")) cfg.kappa = f.kappa;
    if (sub->count("--interval-K")) cfg.interval_K = f.interval_K;
    if (sub->count("--interval-H")) cfg.interval_H = f.interval_H;
    if (sub->count("--k")) cfg.k = f.k;
    if (sub->count("--v-max")) cfg.v_max = f.v_max;
    if (sub->count("--samples")) cfg.samples = f.samples;
    if (sub->count("--set-size")) cfg.set_size = f.set_size;
    if (sub->count("--bins")) cfg.bins = f.bins;
    if (sub->count("--Kmax")) cfg.Kmax = f.Kmax;
    if (sub->count("--c-et")) cfg.c_et = f.c_et;
    if (sub->count("--log-base")) cfg.log_base = f.log_base;
    if (sub->count("--weil-strict")) cfg.weil_strict = f.weil_strict;
    return cfg;
}

// ---------------------------------------------------------------------------
// selftest: a fast built-in battery over all modules.

int run_selftest(int threads) {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        std::printf("[%s] %s\n", ok ? "ok" : "FAIL", name);
        if (!ok) ++failures;
    };

    try {
        {
            const Prime p(997);
            bool ok = true;
            for (u64 a = 1; a < 997 && ok; ++a) {
                const u64 b = mod_inverse(a, p);
                ok = mul_mod(a, b, 997) == 1 && mod_inverse(b, p) == a;
            }
            check("modular inverse involution (p=997)", ok);
        }
        {
            const Prime p(101);
            const PsiParams params(3, 7, p);
            bool ok = eval_psi(params, 0) == Complex{0.0, 0.0};
            for (u64 u = 1; u < 101 && ok; ++u)
                ok = std::abs(std::abs(eval_psi(params, u)) - 1.0) < 1e-12;
            check("psi unit modulus and zero case (p=101)", ok);
        }
        {
            const SequenceSpec spec = SequenceSpec::power(1.2);
            const SumRecord rec = long_sum(spec, PsiParams(0, 0, Prime(17)), 10, threads);
            check("trivial long sum (x=y=0, p=17, N=10)",
                  rec.value == Complex{10.0, 0.0} && rec.zero_terms == 0);
        }
        {
            const SequenceSpec spec = SequenceSpec::power(1.2);
            const PsiParams params(1, 1, Prime(101));
            const Complex whole = long_sum(spec, params, 150, threads).value;
            const Complex head = long_sum(spec, params, 100, threads).value;
            const Complex tail = short_sum(spec, params, 100.0, 50.0, threads).value;
            check("short sum telescopes (p=101)", std::abs(whole - (head + tail)) < 1e-9);
        }
        {
            const Prime p(101);
            std::mt19937_64 rng(7);
            std::vector<u64> ue, ve;
            while (ue.size() < 8) {
                const u64 c = bounded_draw(rng, 101);
                if (std::find(ue.begin(), ue.end(), c) == ue.end()) ue.push_back(c);
            }
            while (ve.size() < 8) {
                const u64 c = bounded_draw(rng, 101);
                if (std::find(ve.begin(), ve.end(), c) == ve.end()) ve.push_back(c);
            }
            std::sort(ue.begin(), ue.end());
            std::sort(ve.begin(), ve.end());
            const WeightedSet U = WeightedSet::unit(ue, p);
            const WeightedSet V = WeightedSet::unit(ve, p);
            const PsiParams params(2, 5, p);
            const Complex d = double_sum_direct(U, V, params);
            const Complex c = double_sum_completed(U, V, params);
            check("completion identity (p=101)",
                  std::abs(d - c) / std::max(1.0, std::abs(d)) < 1e-8);
        }
        {
            const Prime p(101);
            const PoleVectors diag({1, 2}, {2, 1}, p);
            const Complex s = rational_sum(diag, p);
            bool ok = s.real() == 99.0 && s.imag() == 0.0 && is_diagonal(diag);
            const PoleVectors off({1, 2}, {3, 4}, p);
            ok = ok && !is_diagonal(off) && std::abs(rational_sum(off, p)) <= weil_bound(2, p);
            check("rational sums: diagonal exact, off-diagonal Weil (p=101)", ok);
        }
        {
            std::vector<double> grid(100);
            for (std::size_t i = 0; i < grid.size(); ++i)
                grid[i] = static_cast<double>(i) / 100.0;
            check("star discrepancy of the uniform grid",
                  std::abs(star_discrepancy(grid) - 0.01) < 1e-15);
        }
        {
            bool ok = std::abs(theorem_delta(0.1, 0.8) - 2.0e-6) < 2.0e-6 * 1e-12;
            ok = ok && std::abs(delta0_short(0.1) - 0.01 / 26.0) < 1e-15;
            ok = ok && std::abs(c_constant(0.1, 0.8) - 0.064 / 5.96) < 1e-12;
            ok = ok && std::abs(existence_xi(0.8) - 1.0 / 6.0) < 1e-12;
            check("explicit constants", ok);
        }
        {
            const SequenceSpec spec = SequenceSpec::power(1.2);
            bool ok = true;
            const u64 K = 10000;
            for (u64 n = K + 1; n <= K + 20 && ok; ++n) {
                for (u64 h = 0; h <= 5 && ok; ++h) {
                    for (double xi0 : {0.0, 0.25, 0.5}) {
                        const TaylorSplit ts = taylor_split(spec, static_cast<double>(K), n, h);
                        const double ij = ts.I + ts.J;
                        if (!(ij >= 0.0 && ij < 1.0)) continue;
                        const i64 eta = carry_term(spec, static_cast<double>(K), n, h, xi0);
                        if (eta < 0 || eta > 2) {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            check("carry term lies in {0,1,2}", ok);
        }
        {
            const SequenceSpec spec = SequenceSpec::power(1.2);
            const PsiParams params(1, 1, Prime(10007));
            const Complex a = long_sum(spec, params, 5000, 1).value;
            const Complex b = long_sum(spec, params, 5000, 4).value;
            check("bit-stable sums across thread counts", a == b);
        }
    } catch (const Error& e) {
        std::printf("[FAIL] selftest aborted: %s\n", e.what());
        ++failures;
    }

    std::printf("%s\n", failures == 0 ? "selftest: all checks passed"
                                      : "selftest: FAILURES detected");
    return failures == 0 ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kloostlab: Kloosterman-type sums over floor-function sequences mod p"};
    app.require_subcommand(1);

    Flags f;
    struct SubSpec {
        const char* name;
        const char* desc;
        ExperimentKind kind;
    };
    const std::vector<SubSpec> subs = {
        {"long-sum", "sum psi(floor(f(n))) for n = 1..N", ExperimentKind::LongSum},
        {"short-sum", "sum over the interval (K, K+L]", ExperimentKind::ShortSum},
        {"double-sum", "bilinear sums: direct vs completed, with bounds",
         ExperimentKind::DoubleSum},
        {"weil-check", "rational-sum sweep against the Weil threshold",
         ExperimentKind::WeilCheck},
        {"inverses", "count inverses of floor(f(n)) in a residue interval",
         ExperimentKind::Inverses},
        {"discrepancy", "star discrepancy of inverse points vs the Erdos-Turan bound",
         ExperimentKind::Discrepancy},
        {"existence", "witness search for an inverse in the interval",
         ExperimentKind::Existence},
        {"constants", "explicit theorem constants and the admissible N window",
         ExperimentKind::Constants},
        {"sweep", "long-sum grid over primes and random (x,y) pairs", ExperimentKind::Sweep},
    };
    for (const SubSpec& s : subs) add_common(app.add_subcommand(s.name, s.desc), f);

    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in check battery");
    int selftest_threads = 0;
    selftest->add_option("--threads", selftest_threads, "thread budget; 0 = hardware");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (sub == selftest) return run_selftest(selftest_threads);

    try {
        ExperimentKind kind = ExperimentKind::LongSum;
        for (const SubSpec& s : subs)
            if (sub->get_name() == s.name) kind = s.kind;
        const ExperimentConfig cfg = assemble(sub, f, kind);

        const std::string path = cfg.out.empty() ? "-" : cfg.out;
        RowSink sink(path, cfg.format, cfg.resume && path != "-");
        const std::vector<ResultRow> rows = run(cfg, &sink);
        log::info("wrote %zu rows", rows.size());
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "compute error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
