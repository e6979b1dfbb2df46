#pragma once

#include <array>
#include <optional>

#include "kloostlab/mod_arith.hpp"
#include "kloostlab/sequence.hpp"

namespace kloostlab {

// One computed exponential sum with its diagnostics.
struct SumRecord {
    explicit SumRecord(PsiParams pr) : params(pr) {}
    Complex value{0.0, 0.0};
    u64 n_terms = 0;           // number of summands
    double trivial_bound = 0;  // = n_terms; each summand has modulus <= 1
    std::optional<double> theory_bound; // N p^{-delta}, filled by the caller
    double ratio = 0;          // |value| / n_terms (0 for an empty sum)
    PsiParams params;
    double range_start = 0;    // the sum runs over integers n in (start, end]
    double range_end = 0;
    u64 zero_terms = 0;        // # of n with p | floor(f(n)); each contributes 0
};

// sum_{n=1}^{N} psi_{x,y;p}(floor(f(n))). Internally parallel over fixed-size
// chunks merged in index order: the result is bit-identical for every thread
// count. threads = 0 picks the hardware concurrency.
SumRecord long_sum(const SequenceSpec& spec, const PsiParams& params, u64 N, int threads = 0);

// Same sum over integers n in (K, K+L]. L < 1 is treated as an empty range.
SumRecord short_sum(const SequenceSpec& spec, const PsiParams& params, double K, double L,
                    int threads = 0);

// The saving exponent delta = 2^{-11} eps^2 kappa^4.
double theorem_delta(double eps, double kappa);

// Short-interval saving delta_0 = eps^2 / 26.
double delta0_short(double eps);

// c = eps kappa^2 / (1 + 6 kappa + 2 eps kappa), always in (0, 1).
double c_constant(double eps, double kappa);

// The admissible window p^{1/(2 kappa) + eps} <= N < p^{1/(2 - kappa)};
// empty when n_min > n_max.
struct NRange {
    u64 n_min = 0;
    u64 n_max = 0;
    bool empty() const { return n_min > n_max; }
};
NRange admissible_N_range(Prime p, double eps, double kappa);

// The four inequalities tying N, p, c, kappa together, in display order:
//   N^{1-kappa/2} >= p^{3c},  N^{kappa/2-c} >= p^{3c},
//   N >= p^{1/2+3c},          N^{kappa-c} >= p^{1/2+3c}.
// Evaluated in log space.
std::array<bool, 4> range_check_2_1(u64 N, Prime p, double c, double kappa);

// Short-interval admissibility: the window K^{kappa-eps} >= L >= K^{kappa/2} p^eps,
// then K <= p^{1/(2-kappa)}, then L >= p^{1/2+eps}.
std::array<bool, 3> range_check_short(double K, double L, Prime p, double eps, double kappa);

// Geometric segment boundaries N = K_0 > K_1 > ... > K_R = N p^{-c} with
// K_{j-1} - K_j = Delta K_j.
struct Decomposition {
    u64 R = 0;
    double Delta = 0;
    std::vector<double> boundaries; // size R+1
    double c = 0;
};

// R = floor(N^{1+c-kappa} log^2 p), Delta = p^{c/R} - 1, K_j = p^{-jc/R} N.
// The log base is a knob (natural log by default). Throws
// DegenerateDecompositionError when R < 1; the segment relation is verified
// before returning.
Decomposition decomposition(u64 N, Prime p, double c, double kappa, double log_base = 0.0);

// Pigeonhole search for the shift xi0: maximize the number of h <= H with
// frac(h f'(K) - xi0) < 1/bins. The window start is scanned over the point
// multiset itself, which dominates every other window position; the count is
// therefore >= H/bins.
struct Xi0Result {
    double xi0 = 0;
    u64 count = 0;
};
Xi0Result xi0_search(const SequenceSpec& spec, double K, u64 H, u64 bins);

// |value| / (n_terms * p^{-delta}): the empirical stand-in for the theorem's
// implied constant.
double bound_ratio(const SumRecord& record, double delta);

} // namespace kloostlab
