#include "kloostlab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "kloostlab/double_sums.hpp"
#include "kloostlab/inverse_dist.hpp"
#include "kloostlab/kloosterman.hpp"
#include "kloostlab/log.hpp"
#include "kloostlab/parallel.hpp"

namespace kloostlab {

namespace {

// ---------------------------------------------------------------------------
// Small parsing helpers

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

u64 parse_u64(const std::string& s, const std::string& key) {
    u64 v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ConfigError("bad unsigned integer for '" + key + "': " + s);
    return v;
}

i64 parse_i64(const std::string& s, const std::string& key) {
    i64 v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ConfigError("bad integer for '" + key + "': " + s);
    return v;
}

double parse_double(const std::string& s, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw ConfigError("bad real for '" + key + "': " + s);
    return v;
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("bad boolean for '" + key + "': " + s);
}

std::vector<u64> parse_u64_list(const std::string& s, const std::string& key) {
    std::vector<u64> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(parse_u64(cur, key));
    }
    if (out.empty()) throw ConfigError("empty list for '" + key + "'");
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic per-grid-point seeding

u64 splitmix64(u64 z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::mt19937_64 point_rng(u64 seed, u64 grid_index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(grid_index)));
}

// ---------------------------------------------------------------------------
// Formatting

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string csv_header_line(const ResultRow& row) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) line += ',';
        line += csv_escape(row.name(i));
    }
    return line;
}

std::string csv_data_line(const ResultRow& row) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) line += ',';
        line += csv_escape(format_value(row.value(i)));
    }
    return line;
}

std::string json_data_line(const ResultRow& row) {
    nlohmann::ordered_json obj;
    for (std::size_t i = 0; i < row.size(); ++i) {
        const ResultRow::Value& v = row.value(i);
        if (std::holds_alternative<u64>(v))
            obj[row.name(i)] = std::get<u64>(v);
        else if (std::holds_alternative<i64>(v))
            obj[row.name(i)] = std::get<i64>(v);
        else if (std::holds_alternative<double>(v))
            obj[row.name(i)] = std::get<double>(v);
        else if (std::holds_alternative<bool>(v))
            obj[row.name(i)] = std::get<bool>(v);
        else
            obj[row.name(i)] = std::get<std::string>(v);
    }
    return obj.dump();
}

// ---------------------------------------------------------------------------
// Grid machinery

struct GridPoint {
    u64 index = 0;
    u64 prime = 0;
    u64 x = 0;
    u64 y = 0;
};

// (x, y) pairs per prime: either the single explicit pair or `pairs` random
// ones, drawn sequentially up front so the grid is independent of threading.
std::vector<GridPoint> build_grid(const ExperimentConfig& cfg) {
    std::vector<GridPoint> grid;
    std::mt19937_64 rng(cfg.seed);
    u64 index = 0;
    for (u64 p : cfg.primes) {
        if (cfg.pairs == 0) {
            GridPoint g;
            g.index = index++;
            g.prime = p;
            g.x = mod_reduce(cfg.x, Prime(p));
            g.y = mod_reduce(cfg.y, Prime(p));
            grid.push_back(g);
        } else {
            for (u64 i = 0; i < cfg.pairs; ++i) {
                GridPoint g;
                g.index = index++;
                g.prime = p;
                do {
                    g.x = bounded_draw(rng, p);
                    g.y = bounded_draw(rng, p);
                } while (g.x == 0 && g.y == 0);
                grid.push_back(g);
            }
        }
    }
    return grid;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

// Theorem constants when (eps, kappa) are present and inside the theorem
// window; zeros otherwise (0 is unambiguous: every defined value is > 0).
struct TheoryInputs {
    double delta = 0;
    double delta0 = 0;
    bool have = false;
};

TheoryInputs theory_inputs(const ExperimentConfig& cfg) {
    TheoryInputs t;
    if (cfg.eps > 0.0 && cfg.kappa > 2.0 / 3.0 && cfg.kappa < 1.0) {
        t.delta = theorem_delta(cfg.eps, cfg.kappa);
        t.have = true;
    }
    if (cfg.eps > 0.0) t.delta0 = delta0_short(cfg.eps);
    return t;
}

void add_prologue(ResultRow& row, const ExperimentConfig& cfg, u64 grid_index) {
    row.add("grid_index", grid_index);
    row.add("experiment", kind_name(cfg.kind));
    row.add("status", std::string("ok"));
    row.add("seed", cfg.seed);
}

// Row-level failure: keep the schema (outputs already zero), flip the status.
void mark_failed(ResultRow& row, u64 grid_index, const Error& e) {
    log::warn("grid point %llu failed: %s", static_cast<unsigned long long>(grid_index),
              e.what());
    row.set("status", std::string("error"));
}

// ---------------------------------------------------------------------------
// Per-kind row builders. Inputs go in first; outputs are computed into
// zero-initialized locals inside a try block, so failed rows keep the exact
// column set with zero outputs and status=error.

ResultRow long_sum_row(const ExperimentConfig& cfg, const SequenceSpec& spec, const GridPoint& g,
                       int inner_threads) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prime p(g.prime);
    const PsiParams params(static_cast<i64>(g.x), static_cast<i64>(g.y), p);
    const TheoryInputs th = theory_inputs(cfg);

    ResultRow row;
    add_prologue(row, cfg, g.index);
    row.add("sequence", cfg.sequence);
    row.add("p", g.prime);
    row.add("x", g.x);
    row.add("y", g.y);
    row.add("N", cfg.N);

    Complex value{0.0, 0.0};
    double ratio = 0, trivial = 0, theory = 0, b_ratio = 0;
    u64 zero_terms = 0;
    try {
        const SumRecord rec = long_sum(spec, params, cfg.N, inner_threads);
        value = rec.value;
        ratio = rec.ratio;
        trivial = rec.trivial_bound;
        zero_terms = rec.zero_terms;
        if (th.have) {
            theory = static_cast<double>(cfg.N) *
                     std::pow(static_cast<double>(g.prime), -th.delta);
            b_ratio = bound_ratio(rec, th.delta);
        }
    } catch (const Error& e) {
        mark_failed(row, g.index, e);
    }
    row.add("value_re", value.real());
    row.add("value_im", value.imag());
    row.add("value_abs", std::abs(value));
    row.add("ratio", ratio);
    row.add("zero_terms", zero_terms);
    row.add("trivial_bound", trivial);
    row.add("delta", th.delta);
    row.add("theory_bound", theory);
    row.add("bound_ratio", b_ratio);
    row.add("wall_ms", elapsed_ms(t0));
    return row;
}

ResultRow short_sum_row(const ExperimentConfig& cfg, const SequenceSpec& spec, const GridPoint& g,
                        int inner_threads) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prime p(g.prime);
    const PsiParams params(static_cast<i64>(g.x), static_cast<i64>(g.y), p);
    const TheoryInputs th = theory_inputs(cfg);

    ResultRow row;
    add_prologue(row, cfg, g.index);
    row.add("sequence", cfg.sequence);
    row.add("p", g.prime);
    row.add("x", g.x);
    row.add("y", g.y);
    row.add("K", cfg.K);
    row.add("L", cfg.L);

    Complex value{0.0, 0.0};
    double ratio = 0, theory = 0, b_ratio = 0;
    u64 n_terms = 0, zero_terms = 0;
    try {
        const SumRecord rec = short_sum(spec, params, cfg.K, cfg.L, inner_threads);
        value = rec.value;
        ratio = rec.ratio;
        n_terms = rec.n_terms;
        zero_terms = rec.zero_terms;
        if (cfg.eps > 0.0) {
            theory = cfg.L * std::pow(static_cast<double>(g.prime), -th.delta0);
            b_ratio = bound_ratio(rec, th.delta0);
        }
    } catch (const Error& e) {
        mark_failed(row, g.index, e);
    }
    row.add("n_terms", n_terms);
    row.add("value_re", value.real());
    row.add("value_im", value.imag());
    row.add("value_abs", std::abs(value));
    row.add("ratio", ratio);
    row.add("zero_terms", zero_terms);
    row.add("delta0", th.delta0);
    row.add("theory_bound", theory);
    row.add("bound_ratio", b_ratio);
    row.add("wall_ms", elapsed_ms(t0));
    return row;
}

// Random strictly-increasing residue set of the requested size.
std::vector<u64> draw_elements(std::mt19937_64& rng, u64 size, u64 p) {
    std::set<u64> chosen;
    while (chosen.size() < size) chosen.insert(bounded_draw(rng, p));
    return std::vector<u64>(chosen.begin(), chosen.end());
}

std::vector<Complex> draw_unit_weights(std::mt19937_64& rng, u64 size) {
    std::vector<Complex> w(size);
    for (auto& v : w) {
        const double theta = static_cast<double>(rng() >> 11) * 0x1p-53;
        v = std::polar(1.0, 2.0 * std::numbers::pi * theta);
    }
    return w;
}

ResultRow double_sum_row(const ExperimentConfig& cfg, const GridPoint& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prime p(g.prime);
    std::mt19937_64 rng = point_rng(cfg.seed, g.index);

    u64 x, y;
    do {
        x = bounded_draw(rng, g.prime);
        y = bounded_draw(rng, g.prime);
    } while (x == 0 && y == 0);
    const PsiParams params(static_cast<i64>(x), static_cast<i64>(y), p);

    const WeightedSet U(draw_elements(rng, cfg.set_size, g.prime),
                        draw_unit_weights(rng, cfg.set_size), p);
    const WeightedSet V(draw_elements(rng, cfg.set_size, g.prime),
                        draw_unit_weights(rng, cfg.set_size), p);

    ResultRow row;
    add_prologue(row, cfg, g.index);
    row.add("p", g.prime);
    row.add("x", x);
    row.add("y", y);
    row.add("u_size", U.size());
    row.add("v_size", V.size());
    row.add("A", U.A());
    row.add("B", V.A());

    Complex direct{0.0, 0.0}, completed{0.0, 0.0};
    double abs_err = 0, rel_err = 0, lemma31 = 0, prop42 = 0, cor = 0;
    u64 cor_k = 0;
    try {
        direct = double_sum_direct(U, V, params);
        completed = double_sum_completed(U, V, params);
        abs_err = std::abs(direct - completed);
        rel_err = abs_err / std::max(1.0, std::abs(direct));
        lemma31 = lemma31_bound(U.size(), V.size(), U.A(), V.A(), cfg.k, p);
        prop42 = prop42_bound(U.size(), V.size(), U.A(), V.A(), p);
        if (cfg.eps > 0.0) {
            try {
                const CorEpsBound b = cor_eps_bound(U.size(), V.size(), U.A(), V.A(), cfg.eps, p);
                cor = b.bound;
                cor_k = b.k;
            } catch (const RangeError&) {
                // corollary preconditions not met here; leave zeros
            }
        }
    } catch (const Error& e) {
        mark_failed(row, g.index, e);
    }
    row.add("direct_re", direct.real());
    row.add("direct_im", direct.imag());
    row.add("completed_re", completed.real());
    row.add("completed_im", completed.imag());
    row.add("abs_err", abs_err);
    row.add("rel_err", rel_err);
    row.add("k", cfg.k);
    row.add("lemma31", lemma31);
    row.add("prop42", prop42);
    row.add("cor_eps", cor);
    row.add("cor_k", cor_k);
    row.add("wall_ms", elapsed_ms(t0));
    return row;
}

// Lexicographic enumeration is feasible when v_max^{2k} stays small;
// otherwise sample tuples from the per-point stream.
constexpr u64 kWeilExhaustiveCap = 200000;

ResultRow weil_check_row(const ExperimentConfig& cfg, const GridPoint& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prime p(g.prime);
    const u64 k = cfg.k;

    const double tuple_count =
        std::pow(static_cast<double>(cfg.v_max), 2.0 * static_cast<double>(k));
    const bool exhaustive = tuple_count <= static_cast<double>(kWeilExhaustiveCap);
    const double bound = weil_bound(k, p, cfg.weil_strict);

    ResultRow row;
    add_prologue(row, cfg, g.index);
    row.add("p", g.prime);
    row.add("k", k);
    row.add("v_max", cfg.v_max);
    row.add("mode", std::string(exhaustive ? "exhaustive" : "random"));

    u64 checked = 0, diagonal = 0, violations = 0;
    bool diag_exact = true;
    double max_ratio = 0.0;
    try {
        const UnityRoots roots(p);
        const InverseTable inv(p);
        auto consider = [&](const std::vector<u64>& v, const std::vector<u64>& w) {
            const PoleVectors pv(v, w, p);
            const Complex s = rational_sum(pv, roots, inv);
            ++checked;
            if (is_diagonal(pv)) {
                ++diagonal;
                std::set<u64> distinct(v.begin(), v.end());
                const double expected = static_cast<double>(p.value() - distinct.size());
                if (s.real() != expected || s.imag() != 0.0) diag_exact = false;
            } else {
                max_ratio = std::max(max_ratio, std::abs(s) / bound);
                if (std::abs(s) > bound) ++violations;
            }
        };
        if (exhaustive) {
            // odometer over 2k digits in base v_max
            std::vector<u64> digits(2 * k, 0);
            std::vector<u64> v(k), w(k);
            for (;;) {
                for (u64 i = 0; i < k; ++i) v[i] = digits[i];
                for (u64 i = 0; i < k; ++i) w[i] = digits[k + i];
                consider(v, w);
                u64 pos = 0;
                while (pos < 2 * k && ++digits[pos] == cfg.v_max) digits[pos++] = 0;
                if (pos == 2 * k) break;
            }
        } else {
            std::mt19937_64 rng = point_rng(cfg.seed, g.index);
            std::vector<u64> v(k), w(k);
            for (u64 s = 0; s < cfg.samples; ++s) {
                for (auto& d : v) d = bounded_draw(rng, cfg.v_max);
                for (auto& d : w) d = bounded_draw(rng, cfg.v_max);
                consider(v, w);
            }
        }
    } catch (const Error& e) {
        mark_failed(row, g.index, e);
    }
    row.add("n_checked", checked);
    row.add("n_diagonal", diagonal);
    row.add("diag_exact", diag_exact);
    row.add("violations", violations);
    row.add("max_ratio", max_ratio);
    row.add("bound", bound);
    row.add("strict_variant", cfg.weil_strict);
    row.add("wall_ms", elapsed_ms(t0));
    return row;
}

ResultRow inverses_row(const ExperimentConfig& cfg, const SequenceSpec& spec, const GridPoint& g,
                       int inner_threads) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prime p(g.prime);
    const ResidueInterval interval(cfg.interval_K, cfg.interval_H, p);
    const TheoryInputs th = theory_inputs(cfg);

    ResultRow row;
    add_prologue(row, cfg, g.index);
    row.add("sequence", cfg.sequence);
    row.add("p", g.prime);
    row.add("N", cfg.N);
    row.add("interval_K", cfg.interval_K);
    row.add("interval_H", cfg.interval_H);

    u64 count = 0, skipped = 0;
    double main_h = 0, main_card = 0, error = 0, budget = 0;
    try {
        const InverseCountResult res = count_inverses(spec, cfg.N, p, interval, inner_threads);
        count = res.count;
        skipped = res.skipped;
        main_h = res.main_term;
        main_card = main_term(cfg.N, cfg.interval_H - 1, p);
        error = res.error;
        if (th.have) {
            const double pd = static_cast<double>(g.prime);
            budget = static_cast<double>(cfg.N) * std::pow(pd, -th.delta) * std::log(pd);
        }
    } catch (const Error& e) {
        mark_failed(row, g.index, e);
    }
    row.add("count", count);
    row.add("skipped", skipped);
    row.add("main_term", main_h);
    row.add("main_term_card", main_card);
    row.add("error", error);
    row.add("budget", budget);
    row.add("wall_ms", elapsed_ms(t0));
    return row;
}

ResultRow discrepancy_row(const ExperimentConfig& cfg, const SequenceSpec& spec,
                          const GridPoint& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prime p(g.prime);
    const u64 pv = g.prime;

    ResultRow row;
    add_prologue(row, cfg, g.index);
    row.add("sequence", cfg.sequence);
    row.add("p", g.prime);
    row.add("N", cfg.N);

    u64 n_points = 0;
    double d_star = 0, et = 0;
    try {
        // Inverse residues of floor(f(n)) for n <= N, in n order.
        std::vector<u64> nonzero;
        nonzero.reserve(cfg.N);
        for (u64 n = 1; n <= cfg.N; ++n) {
            const u64 u = mod_reduce(floor_f(spec, n), p);
            if (u != 0) nonzero.push_back(u);
        }
        const std::vector<u64> inverses = batch_mod_inverse(nonzero, p);
        std::vector<double> points(inverses.size());
        for (std::size_t i = 0; i < inverses.size(); ++i)
            points[i] = static_cast<double>(inverses[i]) / static_cast<double>(pv);
        n_points = points.size();

        d_star = star_discrepancy(points);

        const UnityRoots roots(p);
        std::vector<Complex> sums(cfg.Kmax);
        for (u64 k = 1; k <= cfg.Kmax; ++k) {
            KahanSum acc;
            for (u64 r : inverses) acc.add(roots[mul_mod(k % pv, r, pv)]);
            sums[k - 1] = acc.value();
        }
        et = erdos_turan_bound(sums, n_points, cfg.Kmax, cfg.c_et);
    } catch (const Error& e) {
        mark_failed(row, g.index, e);
    }
    row.add("n_points", n_points);
    row.add("d_star", d_star);
    row.add("et_bound", et);
    row.add("margin", et - d_star);
    row.add("Kmax", cfg.Kmax);
    row.add("c_et", cfg.c_et);
    row.add("wall_ms", elapsed_ms(t0));
    return row;
}

ResultRow existence_row(const ExperimentConfig& cfg, const SequenceSpec& spec,
                        const GridPoint& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prime p(g.prime);
    const ResidueInterval interval(cfg.interval_K, cfg.interval_H, p);

    ResultRow row;
    add_prologue(row, cfg, g.index);
    row.add("sequence", cfg.sequence);
    row.add("p", g.prime);
    row.add("N", cfg.N);
    row.add("interval_K", cfg.interval_K);
    row.add("interval_H", cfg.interval_H);

    ExistenceResult res;
    try {
        res = existence_search(spec, p, cfg.N, interval);
    } catch (const Error& e) {
        mark_failed(row, g.index, e);
        res = ExistenceResult{};
    }
    row.add("witness_found", res.witness.has_value());
    row.add("witness", res.witness.value_or(0));
    row.add("N0", res.N0);
    row.add("xi_used", res.xi_used);
    row.add("cond_p_ge_H", res.cond_p_ge_H);
    row.add("cond_p_ge_N", res.cond_p_ge_N);
    row.add("cond_HN", res.cond_HN);
    row.add("wall_ms", elapsed_ms(t0));
    return row;
}

ResultRow constants_row(const ExperimentConfig& cfg, const GridPoint& g, bool have_prime) {
    const auto t0 = std::chrono::steady_clock::now();
    ResultRow row;
    add_prologue(row, cfg, g.index);
    row.add("eps", cfg.eps);
    row.add("kappa", cfg.kappa);

    double delta = 0, delta0 = 0, c = 0, xi = 0;
    u64 n_min = 0, n_max = 0;
    try {
        delta = theorem_delta(cfg.eps, cfg.kappa);
        delta0 = delta0_short(cfg.eps);
        c = c_constant(cfg.eps, cfg.kappa);
        xi = existence_xi(cfg.kappa);
        if (have_prime) {
            const NRange r = admissible_N_range(Prime(g.prime), cfg.eps, cfg.kappa);
            n_min = r.n_min;
            n_max = r.n_max;
        }
    } catch (const Error& e) {
        mark_failed(row, g.index, e);
    }
    row.add("delta", delta);
    row.add("delta0", delta0);
    row.add("c", c);
    row.add("xi_max", xi);
    row.add("p", g.prime);
    row.add("n_min", n_min);
    row.add("n_max", n_max);
    row.add("wall_ms", elapsed_ms(t0));
    return row;
}

// ---------------------------------------------------------------------------
// Validation: every field the kind will read is checked before any
// computation starts.

bool needs_sequence(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::LongSum:
        case ExperimentKind::ShortSum:
        case ExperimentKind::Inverses:
        case ExperimentKind::Discrepancy:
        case ExperimentKind::Existence:
        case ExperimentKind::Sweep:
            return true;
        default:
            return false;
    }
}

void validate_config(const ExperimentConfig& cfg) {
    const bool constants = cfg.kind == ExperimentKind::Constants;
    if (cfg.primes.empty() && !constants) throw ConfigError("config needs at least one prime");
    for (u64 p : cfg.primes) {
        if (!is_prime_u64(p)) throw ConfigError("not prime: " + std::to_string(p));
        if (p >= (u64(1) << 62))
            throw ConfigError("prime too large for experiments: " + std::to_string(p));
    }
    if (needs_sequence(cfg.kind)) {
        sequence_from_descriptor(cfg.sequence); // throws ConfigError when bad
    }
    switch (cfg.kind) {
        case ExperimentKind::LongSum:
        case ExperimentKind::Sweep:
            if (cfg.N < 1) throw ConfigError("N must be >= 1");
            break;
        case ExperimentKind::ShortSum:
            if (!(cfg.K >= 0.0)) throw ConfigError("K must be >= 0");
            break;
        case ExperimentKind::DoubleSum:
            if (cfg.set_size < 1) throw ConfigError("set_size must be >= 1");
            if (cfg.samples < 1) throw ConfigError("samples must be >= 1");
            if (cfg.k < 1) throw ConfigError("k must be >= 1");
            for (u64 p : cfg.primes)
                if (cfg.set_size > p)
                    throw ConfigError("set_size exceeds the residue count of p=" +
                                      std::to_string(p));
            break;
        case ExperimentKind::WeilCheck:
            if (cfg.k < 1) throw ConfigError("k must be >= 1");
            if (cfg.v_max < 1) throw ConfigError("v_max must be >= 1");
            if (cfg.samples < 1) throw ConfigError("samples must be >= 1");
            for (u64 p : cfg.primes) {
                if (cfg.v_max > p) throw ConfigError("v_max exceeds p=" + std::to_string(p));
                if (p <= cfg.k)
                    throw ConfigError("rational sums need p > k; p=" + std::to_string(p));
            }
            break;
        case ExperimentKind::Inverses:
        case ExperimentKind::Existence:
            if (cfg.N < 1) throw ConfigError("N must be >= 1");
            for (u64 p : cfg.primes) {
                try {
                    ResidueInterval(cfg.interval_K, cfg.interval_H, Prime(p));
                } catch (const DomainError& e) {
                    throw ConfigError(std::string("bad interval: ") + e.what());
                }
            }
            break;
        case ExperimentKind::Discrepancy:
            if (cfg.N < 1) throw ConfigError("N must be >= 1");
            if (cfg.Kmax < 1) throw ConfigError("Kmax must be >= 1");
            if (!(cfg.c_et > 0.0)) throw ConfigError("c_et must be > 0");
            break;
        case ExperimentKind::Constants:
            if (!(cfg.eps > 0.0)) throw ConfigError("constants needs eps > 0");
            if (!(cfg.kappa > 2.0 / 3.0 && cfg.kappa < 1.0))
                throw ConfigError("constants needs kappa in (2/3, 1)");
            break;
    }
}

} // namespace

// ---------------------------------------------------------------------------

u64 bounded_draw(std::mt19937_64& rng, u64 n) {
    if (n == 0) throw DomainError("bounded_draw needs n >= 1");
    const u64 rem = (std::numeric_limits<u64>::max() % n + 1) % n;
    const u64 limit = std::numeric_limits<u64>::max() - rem;
    for (;;) {
        const u64 r = rng();
        if (r <= limit) return r % n;
    }
}

ExperimentKind kind_from_name(const std::string& name) {
    if (name == "long-sum") return ExperimentKind::LongSum;
    if (name == "short-sum") return ExperimentKind::ShortSum;
    if (name == "double-sum") return ExperimentKind::DoubleSum;
    if (name == "weil-check") return ExperimentKind::WeilCheck;
    if (name == "inverses") return ExperimentKind::Inverses;
    if (name == "discrepancy") return ExperimentKind::Discrepancy;
    if (name == "existence") return ExperimentKind::Existence;
    if (name == "constants") return ExperimentKind::Constants;
    if (name == "sweep") return ExperimentKind::Sweep;
    throw ConfigError("unknown experiment kind: " + name);
}

std::string kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::LongSum: return "long-sum";
        case ExperimentKind::ShortSum: return "short-sum";
        case ExperimentKind::DoubleSum: return "double-sum";
        case ExperimentKind::WeilCheck: return "weil-check";
        case ExperimentKind::Inverses: return "inverses";
        case ExperimentKind::Discrepancy: return "discrepancy";
        case ExperimentKind::Existence: return "existence";
        case ExperimentKind::Constants: return "constants";
        case ExperimentKind::Sweep: return "sweep";
    }
    return "unknown";
}

OutputFormat format_from_name(const std::string& name) {
    if (name == "csv") return OutputFormat::Csv;
    if (name == "jsonl" || name == "json-lines") return OutputFormat::Jsonl;
    throw ConfigError("unknown output format: " + name);
}

SequenceSpec sequence_from_descriptor(const std::string& descriptor) {
    if (descriptor.rfind("power:", 0) == 0) {
        std::string rest = descriptor.substr(6);
        bool theorem = false;
        const std::size_t colon = rest.find(':');
        if (colon != std::string::npos) {
            const std::string tag = rest.substr(colon + 1);
            if (tag != "theorem")
                throw ConfigError("bad power sequence descriptor: " + descriptor);
            theorem = true;
            rest = rest.substr(0, colon);
        }
        double c = 0;
        try {
            c = parse_double(rest, "sequence");
        } catch (const ConfigError&) {
            throw ConfigError("bad power exponent in: " + descriptor);
        }
        try {
            return SequenceSpec::power(c, theorem);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("bad sequence: ") + e.what());
        }
    }
    if (descriptor.rfind("custom:", 0) == 0) {
        const std::string name = descriptor.substr(7);
        if (name == "half-square") {
            return SequenceSpec::custom([](double t) { return 0.5 * t * t; },
                                        [](double t) { return t; }, [](double) { return 1.0; },
                                        0.0);
        }
        throw ConfigError("unknown custom sequence: " + name);
    }
    throw ConfigError("bad sequence descriptor: " + descriptor);
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base) {
    ExperimentConfig cfg = std::move(base);
    std::stringstream ss(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        std::string line = raw;
        const std::size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') continue; // cosmetic section header
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");

        if (key == "kind") cfg.kind = kind_from_name(val);
        else if (key == "sequence") cfg.sequence = val;
        else if (key == "primes") cfg.primes = parse_u64_list(val, key);
        else if (key == "N") cfg.N = parse_u64(val, key);
        else if (key == "K") cfg.K = parse_double(val, key);
        else if (key == "L") cfg.L = parse_double(val, key);
        else if (key == "x") cfg.x = parse_i64(val, key);
        else if (key == "y") cfg.y = parse_i64(val, key);
        else if (key == "pairs") cfg.pairs = parse_u64(val, key);
        else if (key == "eps") cfg.eps = parse_double(val, key);
        else if (key == "kappa") cfg.kappa = parse_double(val, key);
        else if (key == "interval_K") cfg.interval_K = parse_i64(val, key);
        else if (key == "interval_H") cfg.interval_H = parse_i64(val, key);
        else if (key == "k") cfg.k = parse_u64(val, key);
        else if (key == "v_max") cfg.v_max = parse_u64(val, key);
        else if (key == "samples") cfg.samples = parse_u64(val, key);
        else if (key == "set_size") cfg.set_size = parse_u64(val, key);
        else if (key == "bins") cfg.bins = parse_u64(val, key);
        else if (key == "Kmax") cfg.Kmax = parse_u64(val, key);
        else if (key == "c_et") cfg.c_et = parse_double(val, key);
        else if (key == "log_base") cfg.log_base = parse_double(val, key);
        else if (key == "weil_strict") cfg.weil_strict = parse_bool(val, key);
        else if (key == "out") cfg.out = val;
        else if (key == "format") cfg.format = format_from_name(val);
        else if (key == "seed") cfg.seed = parse_u64(val, key);
        else if (key == "threads") cfg.threads = static_cast<int>(parse_i64(val, key));
        else if (key == "strict") cfg.strict = parse_bool(val, key);
        else if (key == "resume") cfg.resume = parse_bool(val, key);
        else throw ConfigError("unknown config key: " + key);
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), std::move(base));
}

std::string format_value(const ResultRow::Value& value) {
    if (std::holds_alternative<u64>(value)) return std::to_string(std::get<u64>(value));
    if (std::holds_alternative<i64>(value)) return std::to_string(std::get<i64>(value));
    if (std::holds_alternative<double>(value)) return format_double(std::get<double>(value));
    if (std::holds_alternative<bool>(value)) return std::get<bool>(value) ? "true" : "false";
    return std::get<std::string>(value);
}

RowSink::RowSink(const std::string& path, OutputFormat format, bool resume) : format_(format) {
    if (path == "-") {
        file_ = stdout;
        owns_file_ = false;
        return;
    }
    if (resume) {
        // Collect the grid indices already present before reopening to append.
        std::ifstream in(path);
        if (in) {
            std::string line;
            bool first = true;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                if (format_ == OutputFormat::Csv) {
                    if (first && line.rfind("grid_index", 0) == 0) {
                        first = false;
                        need_header_ = false;
                        continue;
                    }
                    first = false;
                    try {
                        completed_.insert(parse_u64(line.substr(0, line.find(',')), "resume"));
                        need_header_ = false;
                    } catch (const ConfigError&) {
                        throw IoError("resume: unparsable line in " + path);
                    }
                } else {
                    try {
                        const auto obj = nlohmann::json::parse(line);
                        completed_.insert(obj.at("grid_index").get<u64>());
                        need_header_ = false;
                    } catch (const nlohmann::json::exception&) {
                        throw IoError("resume: unparsable line in " + path);
                    }
                }
            }
        }
        file_ = std::fopen(path.c_str(), "ab");
    } else {
        file_ = std::fopen(path.c_str(), "wb");
    }
    if (!file_) throw IoError("cannot open output file: " + path);
    owns_file_ = true;
}

RowSink::~RowSink() {
    if (file_ && owns_file_) std::fclose(file_);
}

void RowSink::write(const ResultRow& row) {
    std::string text;
    if (format_ == OutputFormat::Csv) {
        if (need_header_) {
            text = csv_header_line(row);
            text += '\n';
            need_header_ = false;
        }
        text += csv_data_line(row);
    } else {
        need_header_ = false;
        text = json_data_line(row);
    }
    text += '\n';
    if (std::fwrite(text.data(), 1, text.size(), file_) != text.size())
        throw IoError("write failed");
    if (std::fflush(file_) != 0) throw IoError("flush failed");
}

std::vector<ResultRow> run(const ExperimentConfig& config, RowSink* sink) {
    validate_config(config);

    std::optional<SequenceSpec> spec;
    if (needs_sequence(config.kind)) spec = sequence_from_descriptor(config.sequence);

    // One grid point per (prime, pair) for the sum kinds, per (prime, sample)
    // for double-sum, per prime otherwise. Constants without primes gets a
    // single synthetic point.
    std::vector<GridPoint> grid;
    switch (config.kind) {
        case ExperimentKind::LongSum:
        case ExperimentKind::ShortSum:
        case ExperimentKind::Sweep:
            grid = build_grid(config);
            break;
        case ExperimentKind::DoubleSum: {
            u64 index = 0;
            for (u64 p : config.primes)
                for (u64 s = 0; s < config.samples; ++s)
                    grid.push_back(GridPoint{index++, p, 0, 0});
            break;
        }
        case ExperimentKind::Constants: {
            if (config.primes.empty()) {
                grid.push_back(GridPoint{0, 0, 0, 0});
            } else {
                u64 index = 0;
                for (u64 p : config.primes) grid.push_back(GridPoint{index++, p, 0, 0});
            }
            break;
        }
        default: {
            u64 index = 0;
            for (u64 p : config.primes) grid.push_back(GridPoint{index++, p, 0, 0});
            break;
        }
    }

    const int budget = resolve_threads(config.threads);
    const int inner_threads = grid.size() == 1 ? budget : 1;

    auto compute = [&](const GridPoint& g) -> ResultRow {
        switch (config.kind) {
            case ExperimentKind::LongSum:
            case ExperimentKind::Sweep:
                return long_sum_row(config, *spec, g, inner_threads);
            case ExperimentKind::ShortSum:
                return short_sum_row(config, *spec, g, inner_threads);
            case ExperimentKind::DoubleSum:
                return double_sum_row(config, g);
            case ExperimentKind::WeilCheck:
                return weil_check_row(config, g);
            case ExperimentKind::Inverses:
                return inverses_row(config, *spec, g, inner_threads);
            case ExperimentKind::Discrepancy:
                return discrepancy_row(config, *spec, g);
            case ExperimentKind::Existence:
                return existence_row(config, *spec, g);
            case ExperimentKind::Constants:
                return constants_row(config, g, g.prime != 0);
        }
        throw ComputeError("unhandled experiment kind");
    };

    std::vector<GridPoint> pending;
    for (const GridPoint& g : grid)
        if (!sink || !sink->completed().count(g.index)) pending.push_back(g);

    std::vector<ResultRow> rows;
    rows.reserve(pending.size());

    // Batches of one worker-pool width: inside a batch the points run in
    // parallel, then the batch is appended (and streamed) in grid order, so
    // output order and content never depend on scheduling.
    const std::size_t batch = static_cast<std::size_t>(budget);
    for (std::size_t start = 0; start < pending.size(); start += batch) {
        const std::size_t count = std::min(batch, pending.size() - start);
        std::vector<ResultRow> slot(count);
        parallel_chunks(count, budget, [&](u64 i) { slot[i] = compute(pending[start + i]); });
        for (std::size_t i = 0; i < count; ++i) {
            const ResultRow::Value* status = slot[i].find("status");
            if (config.strict && status && std::get<std::string>(*status) == "error")
                throw ComputeError("grid point " + std::to_string(pending[start + i].index) +
                                   " failed (rerun with KLOOSTLAB_LOG=warn for details)");
            if (sink) sink->write(slot[i]);
            rows.push_back(std::move(slot[i]));
        }
    }
    return rows;
}

void emit(const std::vector<ResultRow>& rows, const std::string& path, OutputFormat format) {
    if (rows.empty()) throw IoError("emit called with no rows");
    RowSink sink(path, format, false);
    for (const ResultRow& row : rows) sink.write(row);
}

std::vector<std::pair<std::string, std::string>> plotdata(const std::vector<ResultRow>& rows,
                                                          const std::string& x_field,
                                                          const std::string& y_field) {
    std::vector<std::pair<std::string, std::string>> table;
    table.reserve(rows.size());
    for (const ResultRow& row : rows) {
        const ResultRow::Value* x = row.find(x_field);
        const ResultRow::Value* y = row.find(y_field);
        if (!x) throw FieldError("no such field: " + x_field);
        if (!y) throw FieldError("no such field: " + y_field);
        table.emplace_back(format_value(*x), format_value(*y));
    }
    return table;
}

} // namespace kloostlab
