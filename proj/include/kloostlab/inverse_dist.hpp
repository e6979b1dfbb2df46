#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kloostlab/mod_arith.hpp"
#include "kloostlab/sequence.hpp"

namespace kloostlab {

// The target interval I = [K+1, K+H-1] of residues, a subset of [0, p-1]
// with H - 1 members.
class ResidueInterval {
public:
    ResidueInterval(i64 K, i64 H, Prime p);

    i64 K() const { return k_; }
    i64 H() const { return h_; }
    u64 cardinality() const { return static_cast<u64>(h_ - 1); }
    bool contains(u64 residue) const {
        const i64 r = static_cast<i64>(residue);
        return r >= k_ + 1 && r <= k_ + h_ - 1;
    }
    Prime prime() const { return p_; }

private:
    i64 k_;
    i64 h_;
    Prime p_;
};

// T_f(N, I) and its comparison against the expected main term H N / p.
struct InverseCountResult {
    u64 count = 0;        // # of n <= N with floor(f(n))^{-1} in the interval
    double main_term = 0; // H N / p
    double error = 0;     // count - main_term
    u64 skipped = 0;      // # of n with p | floor(f(n)), which have no inverse
};

// Count n <= N whose inverse of floor(f(n)) mod p lands in the interval.
// Parallel over fixed chunks; the counts are exact integers, so the merge is
// order-independent.
InverseCountResult count_inverses(const SequenceSpec& spec, u64 N, Prime p,
                                  const ResidueInterval& interval, int threads = 0);

// H N / p. Pass H - 1 for the cardinality normalization.
double main_term(u64 N, i64 H, Prime p);

// Exact star discrepancy of points in [0,1) by the sorted formula
// D*_N = max_i max(i/N - x_(i), x_(i) - (i-1)/N).
double star_discrepancy(std::span<const double> points);

// The Erdos-Turan bound c_et * (1/(Kmax+1) + (1/N) sum_{k<=Kmax} |S_k|/k).
// sums[k-1] holds S_k = sum_n e(k x_n); only the first Kmax entries are read.
double erdos_turan_bound(std::span<const Complex> sums, u64 N, u64 Kmax, double c_et = 4.0);

// Supremum of admissible xi: min(1/4, 1 - 1/(2-kappa)), exclusive.
double existence_xi(double kappa);

// Witness search for T_f(N, I) > 0, with the precondition flags reported
// rather than enforced.
struct ExistenceResult {
    std::optional<u64> witness;   // smallest n <= N with inverse in the interval
    u64 N0 = 0;                   // min(N, ceil(p^{1/(2-kappa)}) - 1)
    double xi_used = 0;           // the xi at which cond_HN was evaluated
    bool cond_p_ge_H = false;     // p >= H
    bool cond_p_ge_N = false;     // p >= N
    bool cond_HN = false;         // H N >= p^{2-xi}
};
ExistenceResult existence_search(const SequenceSpec& spec, Prime p, u64 N,
                                 const ResidueInterval& interval);

} // namespace kloostlab
