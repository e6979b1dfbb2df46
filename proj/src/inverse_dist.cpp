#include "kloostlab/inverse_dist.hpp"

#include <algorithm>
#include <cmath>

#include "kloostlab/parallel.hpp"

namespace kloostlab {

namespace {

constexpr u64 kChunk = 4096;

} // namespace

ResidueInterval::ResidueInterval(i64 K, i64 H, Prime p) : k_(K), h_(H), p_(p) {
    if (H < 2) throw DomainError("residue interval requires H >= 2");
    if (K + 1 < 0) throw DomainError("residue interval starts below 0");
    const i64 top = K + H - 1;
    if (top > static_cast<i64>(p.value() - 1))
        throw DomainError("residue interval exceeds p - 1");
}

InverseCountResult count_inverses(const SequenceSpec& spec, u64 N, Prime p,
                                  const ResidueInterval& interval, int threads) {
    if (N < 1) throw DomainError("count_inverses requires N >= 1");
    if (interval.prime() != p) throw DomainError("interval built for a different prime");

    const u64 n_chunks = (N + kChunk - 1) / kChunk;
    std::vector<u64> hits(n_chunks, 0), zeros(n_chunks, 0);

    parallel_chunks(n_chunks, threads, [&](u64 ci) {
        const u64 lo = 1 + ci * kChunk;
        const u64 hi = std::min(N, lo + (kChunk - 1));
        std::vector<u64> nonzero;
        nonzero.reserve(static_cast<std::size_t>(hi - lo + 1));
        u64 z = 0;
        for (u64 n = lo; n <= hi; ++n) {
            const u64 u = mod_reduce(floor_f(spec, n), p);
            if (u == 0)
                ++z;
            else
                nonzero.push_back(u);
        }
        const std::vector<u64> inv = batch_mod_inverse(nonzero, p);
        u64 h = 0;
        for (u64 v : inv)
            if (interval.contains(v)) ++h;
        hits[ci] = h;
        zeros[ci] = z;
    });

    InverseCountResult res;
    for (u64 ci = 0; ci < n_chunks; ++ci) {
        res.count += hits[ci];
        res.skipped += zeros[ci];
    }
    res.main_term = main_term(N, interval.H(), p);
    res.error = static_cast<double>(res.count) - res.main_term;
    return res;
}

double main_term(u64 N, i64 H, Prime p) {
    return static_cast<double>(H) * static_cast<double>(N) / static_cast<double>(p.value());
}

double star_discrepancy(std::span<const double> points) {
    if (points.empty()) throw DomainError("star_discrepancy requires a nonempty point set");
    std::vector<double> x(points.begin(), points.end());
    for (double v : x)
        if (!(v >= 0.0 && v < 1.0)) throw DomainError("points must lie in [0, 1)");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 1; i <= x.size(); ++i) {
        const double xi = x[i - 1];
        d = std::max(d, static_cast<double>(i) / n - xi);
        d = std::max(d, xi - static_cast<double>(i - 1) / n);
    }
    return d;
}

double erdos_turan_bound(std::span<const Complex> sums, u64 N, u64 Kmax, double c_et) {
    if (Kmax < 1) throw DomainError("erdos_turan_bound requires Kmax >= 1");
    if (N < 1) throw DomainError("erdos_turan_bound requires N >= 1");
    if (sums.size() < Kmax) throw DomainError("need S_k for every k <= Kmax");
    double tail = 0.0;
    for (u64 k = 1; k <= Kmax; ++k) tail += std::abs(sums[k - 1]) / static_cast<double>(k);
    return c_et * (1.0 / static_cast<double>(Kmax + 1) + tail / static_cast<double>(N));
}

double existence_xi(double kappa) {
    if (!(kappa > 2.0 / 3.0 && kappa < 1.0)) throw DomainError("kappa must lie in (2/3, 1)");
    return std::min(0.25, 1.0 - 1.0 / (2.0 - kappa));
}

ExistenceResult existence_search(const SequenceSpec& spec, Prime p, u64 N,
                                 const ResidueInterval& interval) {
    if (interval.prime() != p) throw DomainError("interval built for a different prime");
    ExistenceResult res;

    const double pd = static_cast<double>(p.value());
    const double n_cap = std::ceil(std::pow(pd, 1.0 / (2.0 - spec.kappa()))) - 1.0;
    res.N0 = std::min(N, static_cast<u64>(std::max(n_cap, 0.0)));

    // Flags use the supremum of admissible xi (the weakest version of the
    // HN >= p^{2-xi} condition); kappa outside the theorem window falls back
    // to the unconditional xi = 1/4 cap.
    double xi = 0.25;
    if (spec.kappa() > 2.0 / 3.0 && spec.kappa() < 1.0) xi = existence_xi(spec.kappa());
    res.xi_used = xi;
    res.cond_p_ge_H = static_cast<i64>(p.value()) >= interval.H();
    res.cond_p_ge_N = p.value() >= N;
    res.cond_HN = static_cast<double>(interval.H()) * static_cast<double>(N) >=
                  std::pow(pd, 2.0 - xi);

    for (u64 lo = 1; lo <= N; lo += kChunk) {
        const u64 hi = std::min(N, lo + (kChunk - 1));
        std::vector<u64> residue(static_cast<std::size_t>(hi - lo + 1));
        std::vector<u64> nonzero;
        nonzero.reserve(residue.size());
        for (u64 n = lo; n <= hi; ++n) {
            residue[n - lo] = mod_reduce(floor_f(spec, n), p);
            if (residue[n - lo] != 0) nonzero.push_back(residue[n - lo]);
        }
        const std::vector<u64> inv = batch_mod_inverse(nonzero, p);
        std::size_t k = 0;
        for (u64 n = lo; n <= hi; ++n) {
            if (residue[n - lo] == 0) continue;
            if (interval.contains(inv[k++])) {
                res.witness = n;
                return res;
            }
        }
    }
    return res;
}

} // namespace kloostlab
