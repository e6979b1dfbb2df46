#pragma once

#include <span>
#include <vector>

#include "kloostlab/mod_arith.hpp"

namespace kloostlab {

// A set of residues u with complex weights a_u, |a_u| <= A. Elements are
// strictly increasing (hence distinct) and live in [0, p).
class WeightedSet {
public:
    WeightedSet(std::vector<u64> elements, std::vector<Complex> weights, Prime p);

    // All weights equal to 1.
    static WeightedSet unit(std::vector<u64> elements, Prime p);

    const std::vector<u64>& elements() const { return elements_; }
    const std::vector<Complex>& weights() const { return weights_; }
    u64 size() const { return elements_.size(); }
    double A() const { return a_; } // max weight modulus (0 for an empty set)
    Prime prime() const { return p_; }

private:
    std::vector<u64> elements_;
    std::vector<Complex> weights_;
    double a_ = 0.0;
    Prime p_;
};

// Pole tuples (v, w) of the rational function R_{v,w}(X) = sum 1/(X+v_r) -
// sum 1/(X+w_s). Both tuples have the same length k >= 1 and reduced entries.
struct PoleVectors {
    PoleVectors(std::vector<u64> v_in, std::vector<u64> w_in, Prime p);

    // Reduce mixed-sign tuples into [0, p) first.
    static PoleVectors reduced(std::span<const i64> v_in, std::span<const i64> w_in, Prime p);

    u64 k() const { return v.size(); }

    std::vector<u64> v;
    std::vector<u64> w;
};

// The bilinear sum S = sum_{u in U} sum_{v in V} a_u b_v psi_{x,y;p}(u+v) by
// direct O(|U||V|) evaluation with compensated summation.
Complex double_sum_direct(const WeightedSet& U, const WeightedSet& V, const PsiParams& params);

// Same value through the completion identity
//   S = (1/p) sum_lambda T[(x-lambda) mod p] * Ahat[lambda] * Bhat[lambda],
// where T is the complete twisted-sum array and Ahat/Bhat are the
// additive-character transforms of the dense weight vectors. O(p log p + |U| + |V|),
// agreeing with double_sum_direct to 1e-8 relative.
Complex double_sum_completed(const WeightedSet& U, const WeightedSet& V, const PsiParams& params);

// T[mu] = sum_{w != 0} e_p(mu*w + y*w^{-1}), all mu at once via one length-p
// transform of w -> e_p(y*w^{-1}).
std::vector<Complex> complete_psi_sums(u64 y, Prime p);

// A·B·U^{1-1/(2k)}·(V^{1/2} p^{1/(2k)} + V p^{1/(4k)}), implied constant 1.
double lemma31_bound(u64 u_card, u64 v_card, double A, double B, u64 k, Prime p);

// A·B·U·V·p^{-eps^2} with the internally chosen Hoelder power k = ceil(1/(2 eps)).
// Requires U >= p^{1/2+eps} and V >= p^{eps}.
struct CorEpsBound {
    double bound = 0;
    u64 k = 0;
};
CorEpsBound cor_eps_bound(u64 u_card, u64 v_card, double A, double B, double eps, Prime p);

// A·B·sqrt(U·V·p), the completed-sum bound (stronger when U and V are large).
double prop42_bound(u64 u_card, u64 v_card, double A, double B, Prime p);

// sum* over u of e_p(R_{v,w}(u)), restricted to u with every u+v_r and u+w_s
// nonzero mod p. Exact brute force over F_p. Requires p > k.
Complex rational_sum(const PoleVectors& pv, Prime p);
// Table-reusing variant for sweeps over many pole tuples at one p.
Complex rational_sum(const PoleVectors& pv, const UnityRoots& roots, const InverseTable& inv);

// True iff w is a permutation of v (multiset equality); the diagonal case in
// which R_{v,w} vanishes identically.
bool is_diagonal(const PoleVectors& pv);

// Weil-type threshold for |rational_sum|: 2k*sqrt(p) by default, or the
// stricter (2k-1)*sqrt(p) + 2k variant.
double weil_bound(u64 k, Prime p, bool strict_variant = false);

// One Hoelder step: lhs = |S|^{2k}, rhs = A^{2k} U^{2k-1} sum_{u in F_p} |inner(u)|^{2k}.
// Small instances only (cost O(p |V|)); callers assert lhs <= rhs.
struct HolderCheck {
    double lhs = 0;
    double rhs = 0;
};
HolderCheck holder_step_check(const WeightedSet& U, const WeightedSet& V, const PsiParams& params,
                              u64 k);

} // namespace kloostlab
