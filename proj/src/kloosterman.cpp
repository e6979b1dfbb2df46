#include "kloostlab/kloosterman.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kloostlab/log.hpp"
#include "kloostlab/parallel.hpp"

namespace kloostlab {

namespace {

// Fixed chunk size: the reduction merges per-chunk partials in index order,
// so the chunking (not the worker count) determines the rounding pattern.
constexpr u64 kChunk = 4096;

// Sum of eval_psi(params, floor(f(n)) mod p) over the inclusive range
// [first, last] of n, chunked and compensated.
SumRecord sum_over_range(const SequenceSpec& spec, const PsiParams& params, u64 first, u64 last,
                         int threads) {
    SumRecord rec(params);
    if (last < first) return rec;

    const Prime p = params.p;
    const u64 pv = p.value();
    const u64 total = last - first + 1;
    const u64 n_chunks = (total + kChunk - 1) / kChunk;

    std::vector<Complex> partial(n_chunks, Complex{0.0, 0.0});
    std::vector<u64> zero_count(n_chunks, 0);

    parallel_chunks(n_chunks, threads, [&](u64 ci) {
        const u64 lo = first + ci * kChunk;
        const u64 hi = std::min(last, lo + (kChunk - 1));
        const std::size_t m = static_cast<std::size_t>(hi - lo + 1);

        std::vector<u64> residue(m);
        std::vector<u64> nonzero;
        nonzero.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            residue[i] = mod_reduce(floor_f(spec, lo + i), p);
            if (residue[i] != 0) nonzero.push_back(residue[i]);
        }
        const std::vector<u64> inv = batch_mod_inverse(nonzero, p);

        KahanSum acc;
        std::size_t k = 0;
        u64 zeros = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const u64 u = residue[i];
            if (u == 0) {
                ++zeros;
                continue;
            }
            const u64 expo = add_mod(mul_mod(params.x, u, pv), mul_mod(params.y, inv[k++], pv), pv);
            acc.add(e_p(expo, p));
        }
        partial[ci] = acc.value();
        zero_count[ci] = zeros;
    });

    KahanSum acc;
    u64 zeros = 0;
    for (u64 ci = 0; ci < n_chunks; ++ci) {
        acc.add(partial[ci]);
        zeros += zero_count[ci];
    }

    rec.value = acc.value();
    rec.n_terms = total;
    rec.trivial_bound = static_cast<double>(total);
    rec.ratio = std::abs(rec.value) / static_cast<double>(total);
    rec.zero_terms = zeros;
    return rec;
}

void require_theorem_params(double eps, double kappa) {
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    if (!(kappa > 2.0 / 3.0 && kappa < 1.0)) throw DomainError("kappa must lie in (2/3, 1)");
}

} // namespace

SumRecord long_sum(const SequenceSpec& spec, const PsiParams& params, u64 N, int threads) {
    if (N < 1) throw DomainError("long_sum requires N >= 1");
    SumRecord rec = sum_over_range(spec, params, 1, N, threads);
    rec.range_start = 0.0;
    rec.range_end = static_cast<double>(N);
    return rec;
}

SumRecord short_sum(const SequenceSpec& spec, const PsiParams& params, double K, double L,
                    int threads) {
    if (!(K >= 0.0)) throw DomainError("short_sum requires K >= 0");
    SumRecord rec(params);
    rec.range_start = K;
    rec.range_end = K + L;
    if (L < 1.0) return rec; // empty range by convention
    const u64 first = static_cast<u64>(std::floor(K)) + 1;
    const u64 last = static_cast<u64>(std::floor(K + L));
    SumRecord body = sum_over_range(spec, params, first, last, threads);
    body.range_start = K;
    body.range_end = K + L;
    return body;
}

double theorem_delta(double eps, double kappa) {
    require_theorem_params(eps, kappa);
    return eps * eps * kappa * kappa * kappa * kappa / 2048.0;
}

double delta0_short(double eps) {
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    return eps * eps / 26.0;
}

double c_constant(double eps, double kappa) {
    require_theorem_params(eps, kappa);
    return eps * kappa * kappa / (1.0 + 6.0 * kappa + 2.0 * eps * kappa);
}

NRange admissible_N_range(Prime p, double eps, double kappa) {
    require_theorem_params(eps, kappa);
    const double pd = static_cast<double>(p.value());
    const double lo = std::ceil(std::pow(pd, 1.0 / (2.0 * kappa) + eps));
    const double hi = std::ceil(std::pow(pd, 1.0 / (2.0 - kappa)));
    if (lo >= 1.8e19 || hi >= 1.8e19) throw DomainError("N range endpoint exceeds 64 bits");
    NRange r;
    r.n_min = static_cast<u64>(lo);
    r.n_max = static_cast<u64>(hi) - 1;
    return r;
}

std::array<bool, 4> range_check_2_1(u64 N, Prime p, double c, double kappa) {
    const double ln_n = std::log(static_cast<double>(N));
    const double ln_p = std::log(static_cast<double>(p.value()));
    return {
        (1.0 - kappa / 2.0) * ln_n >= 3.0 * c * ln_p,
        (kappa / 2.0 - c) * ln_n >= 3.0 * c * ln_p,
        ln_n >= (0.5 + 3.0 * c) * ln_p,
        (kappa - c) * ln_n >= (0.5 + 3.0 * c) * ln_p,
    };
}

std::array<bool, 3> range_check_short(double K, double L, Prime p, double eps, double kappa) {
    if (!(K >= 1.0 && L >= 1.0)) throw DomainError("range_check_short requires K, L >= 1");
    const double ln_k = std::log(K);
    const double ln_l = std::log(L);
    const double ln_p = std::log(static_cast<double>(p.value()));
    const bool window =
        (kappa - eps) * ln_k >= ln_l && ln_l >= (kappa / 2.0) * ln_k + eps * ln_p;
    return {
        window,
        ln_k <= ln_p / (2.0 - kappa),
        ln_l >= (0.5 + eps) * ln_p,
    };
}

Decomposition decomposition(u64 N, Prime p, double c, double kappa, double log_base) {
    if (!(c > 0.0 && c < 1.0)) throw DomainError("decomposition requires c in (0, 1)");
    if (log_base != 0.0 && !(log_base > 1.0))
        throw DomainError("log base must exceed 1 (0 selects natural log)");
    const double pd = static_cast<double>(p.value());
    const double nd = static_cast<double>(N);
    const double lg = log_base == 0.0 ? std::log(pd) : std::log(pd) / std::log(log_base);
    const double r_real = std::pow(nd, 1.0 + c - kappa) * lg * lg;
    if (!(r_real >= 1.0)) throw DegenerateDecompositionError("decomposition has R < 1");

    Decomposition d;
    d.R = static_cast<u64>(std::floor(r_real));
    d.c = c;
    const double ln_p = std::log(pd);
    const double step = c / static_cast<double>(d.R);
    d.Delta = std::expm1(step * ln_p); // p^{c/R} - 1, cancellation-free
    d.boundaries.resize(d.R + 1);
    for (u64 j = 0; j <= d.R; ++j)
        d.boundaries[j] = nd * std::exp(-static_cast<double>(j) * step * ln_p);

    // eq-style segment relation K_{j-1} - K_j = Delta K_j, plus both endpoints.
    const double tol = 1e-9;
    if (std::abs(d.boundaries[0] - nd) > tol * nd)
        throw ComputeError("decomposition endpoint K_0 != N");
    const double k_r_expected = nd * std::pow(pd, -c);
    if (std::abs(d.boundaries[d.R] - k_r_expected) > tol * k_r_expected)
        throw ComputeError("decomposition endpoint K_R != N p^{-c}");
    for (u64 j = 1; j <= d.R; ++j) {
        const double lhs = d.boundaries[j - 1] - d.boundaries[j];
        const double rhs = d.Delta * d.boundaries[j];
        if (std::abs(lhs - rhs) > tol * rhs) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "segment relation fails at j=%llu",
                          static_cast<unsigned long long>(j));
            throw ComputeError(buf);
        }
    }
    return d;
}

Xi0Result xi0_search(const SequenceSpec& spec, double K, u64 H, u64 bins) {
    if (bins < 2 || H < bins) throw DomainError("xi0_search requires H >= bins >= 2");
    const double fp = spec.f_prime(K);
    std::vector<double> pts(H);
    for (u64 h = 1; h <= H; ++h) {
        const double v = static_cast<double>(h) * fp;
        pts[h - 1] = v - std::floor(v);
    }
    std::sort(pts.begin(), pts.end());

    // Slide a width-1/bins window over the circle; only windows starting at a
    // point can be maximal, so scan those. Ties keep the first start in
    // sorted order.
    const double width = 1.0 / static_cast<double>(bins);
    auto at = [&](u64 j) { return j < H ? pts[j] : pts[j - H] + 1.0; };
    Xi0Result best{pts[0], 0};
    u64 j = 0;
    for (u64 i = 0; i < H; ++i) {
        if (j < i) j = i;
        while (j < i + H && at(j) - pts[i] < width) ++j;
        const u64 count = j - i;
        if (count > best.count) {
            best.count = count;
            best.xi0 = pts[i];
        }
    }
    log::debug("xi0_search: H=%llu bins=%llu -> count=%llu",
               static_cast<unsigned long long>(H), static_cast<unsigned long long>(bins),
               static_cast<unsigned long long>(best.count));
    return best;
}

double bound_ratio(const SumRecord& record, double delta) {
    if (record.n_terms == 0) return 0.0;
    const double scale = static_cast<double>(record.n_terms) *
                         std::pow(static_cast<double>(record.params.p.value()), -delta);
    return std::abs(record.value) / scale;
}

} // namespace kloostlab
