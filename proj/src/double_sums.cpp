#include "kloostlab/double_sums.hpp"

#include <algorithm>
#include <cmath>

#include "kloostlab/fft.hpp"

namespace kloostlab {

namespace {

// Above this modulus the dense O(p) tables are no longer worth their memory
// for direct evaluation; fall back to per-pair inversion.
constexpr u64 kTableLimit = u64(1) << 22;

void check_same_prime(const WeightedSet& U, const WeightedSet& V, const PsiParams& params) {
    if (U.prime() != params.p || V.prime() != params.p)
        throw DomainError("weighted sets and psi parameters use different primes");
}

} // namespace

WeightedSet::WeightedSet(std::vector<u64> elements, std::vector<Complex> weights, Prime p)
    : elements_(std::move(elements)), weights_(std::move(weights)), p_(p) {
    if (elements_.size() != weights_.size())
        throw DomainError("weighted set needs one weight per element");
    for (std::size_t i = 0; i < elements_.size(); ++i) {
        if (elements_[i] >= p_.value()) throw DomainError("weighted set element not reduced mod p");
        if (i > 0 && elements_[i - 1] >= elements_[i])
            throw DomainError("weighted set elements must be strictly increasing");
    }
    for (const Complex& w : weights_) a_ = std::max(a_, std::abs(w));
}

WeightedSet WeightedSet::unit(std::vector<u64> elements, Prime p) {
    std::vector<Complex> w(elements.size(), Complex{1.0, 0.0});
    return WeightedSet(std::move(elements), std::move(w), p);
}

PoleVectors::PoleVectors(std::vector<u64> v_in, std::vector<u64> w_in, Prime p)
    : v(std::move(v_in)), w(std::move(w_in)) {
    if (v.empty() || v.size() != w.size())
        throw DomainError("pole vectors need equal nonzero length");
    for (u64 a : v)
        if (a >= p.value()) throw DomainError("pole entry not reduced mod p");
    for (u64 a : w)
        if (a >= p.value()) throw DomainError("pole entry not reduced mod p");
}

PoleVectors PoleVectors::reduced(std::span<const i64> v_in, std::span<const i64> w_in, Prime p) {
    std::vector<u64> v(v_in.size()), w(w_in.size());
    for (std::size_t i = 0; i < v_in.size(); ++i) v[i] = mod_reduce(v_in[i], p);
    for (std::size_t i = 0; i < w_in.size(); ++i) w[i] = mod_reduce(w_in[i], p);
    return PoleVectors(std::move(v), std::move(w), p);
}

Complex double_sum_direct(const WeightedSet& U, const WeightedSet& V, const PsiParams& params) {
    check_same_prime(U, V, params);
    const u64 pv = params.p.value();

    // Dense psi table when the pair count amortizes it; identical values
    // either way since both paths go through eval_psi.
    std::vector<Complex> table;
    if (pv <= kTableLimit && U.size() * V.size() >= pv) {
        table.resize(pv);
        for (u64 s = 0; s < pv; ++s) table[s] = eval_psi(params, s);
    }

    KahanSum acc;
    for (std::size_t i = 0; i < U.size(); ++i) {
        const u64 u = U.elements()[i];
        const Complex au = U.weights()[i];
        for (std::size_t j = 0; j < V.size(); ++j) {
            const u64 s = add_mod(u, V.elements()[j], pv);
            const Complex psi = table.empty() ? eval_psi(params, s) : table[s];
            acc.add(au * V.weights()[j] * psi);
        }
    }
    return acc.value();
}

std::vector<Complex> complete_psi_sums(u64 y, Prime p) {
    const u64 pv = p.value();
    y %= pv;
    const InverseTable inv(p);
    const UnityRoots roots(p);
    std::vector<Complex> g(pv, Complex{0.0, 0.0});
    for (u64 w = 1; w < pv; ++w) g[w] = roots[mul_mod(y, inv[w], pv)];
    return additive_char_transform(g, p);
}

Complex double_sum_completed(const WeightedSet& U, const WeightedSet& V, const PsiParams& params) {
    check_same_prime(U, V, params);
    const u64 pv = params.p.value();

    const std::vector<Complex> T = complete_psi_sums(params.y, params.p);

    std::vector<Complex> a(pv, Complex{0.0, 0.0}), b(pv, Complex{0.0, 0.0});
    for (std::size_t i = 0; i < U.size(); ++i) a[U.elements()[i]] = U.weights()[i];
    for (std::size_t j = 0; j < V.size(); ++j) b[V.elements()[j]] = V.weights()[j];
    const std::vector<Complex> a_hat = additive_char_transform(a, params.p);
    const std::vector<Complex> b_hat = additive_char_transform(b, params.p);

    KahanSum acc;
    for (u64 lam = 0; lam < pv; ++lam)
        acc.add(T[sub_mod(params.x, lam, pv)] * a_hat[lam] * b_hat[lam]);
    return acc.value() / static_cast<double>(pv);
}

double lemma31_bound(u64 u_card, u64 v_card, double A, double B, u64 k, Prime p) {
    if (k < 1) throw DomainError("lemma31_bound requires k >= 1");
    const double u = static_cast<double>(u_card);
    const double v = static_cast<double>(v_card);
    const double pd = static_cast<double>(p.value());
    const double kk = 2.0 * static_cast<double>(k);
    return A * B * std::pow(u, 1.0 - 1.0 / kk) *
           (std::sqrt(v) * std::pow(pd, 1.0 / kk) + v * std::pow(pd, 0.5 / kk));
}

CorEpsBound cor_eps_bound(u64 u_card, u64 v_card, double A, double B, double eps, Prime p) {
    if (!(eps > 0.0)) throw DomainError("cor_eps_bound requires eps > 0");
    const double ln_p = std::log(static_cast<double>(p.value()));
    if (std::log(static_cast<double>(u_card)) < (0.5 + eps) * ln_p)
        throw RangeError("cor_eps_bound requires U >= p^{1/2+eps}");
    if (std::log(static_cast<double>(v_card)) < eps * ln_p)
        throw RangeError("cor_eps_bound requires V >= p^{eps}");
    CorEpsBound out;
    out.k = static_cast<u64>(std::ceil(1.0 / (2.0 * eps)));
    out.bound = A * B * static_cast<double>(u_card) * static_cast<double>(v_card) *
                std::pow(static_cast<double>(p.value()), -eps * eps);
    return out;
}

double prop42_bound(u64 u_card, u64 v_card, double A, double B, Prime p) {
    return A * B *
           std::sqrt(static_cast<double>(u_card) * static_cast<double>(v_card) *
                     static_cast<double>(p.value()));
}

Complex rational_sum(const PoleVectors& pv, const UnityRoots& roots, const InverseTable& inv) {
    const u64 p = roots.prime();
    if (p <= pv.k()) throw DomainError("rational_sum requires p > k");
    const u64 k = pv.k();
    KahanSum acc;
    for (u64 u = 0; u < p; ++u) {
        u64 expo = 0;
        bool admissible = true;
        for (u64 r = 0; r < k && admissible; ++r) {
            const u64 s = add_mod(u, pv.v[r], p);
            if (s == 0)
                admissible = false;
            else
                expo = add_mod(expo, inv[s], p);
        }
        for (u64 s_i = 0; s_i < k && admissible; ++s_i) {
            const u64 s = add_mod(u, pv.w[s_i], p);
            if (s == 0)
                admissible = false;
            else
                expo = sub_mod(expo, inv[s], p);
        }
        if (admissible) acc.add(roots[expo]);
    }
    return acc.value();
}

Complex rational_sum(const PoleVectors& pv, Prime p) {
    const UnityRoots roots(p);
    const InverseTable inv(p);
    return rational_sum(pv, roots, inv);
}

bool is_diagonal(const PoleVectors& pv) {
    std::vector<u64> a = pv.v, b = pv.w;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

double weil_bound(u64 k, Prime p, bool strict_variant) {
    const double kd = static_cast<double>(k);
    const double sq = std::sqrt(static_cast<double>(p.value()));
    return strict_variant ? (2.0 * kd - 1.0) * sq + 2.0 * kd : 2.0 * kd * sq;
}

HolderCheck holder_step_check(const WeightedSet& U, const WeightedSet& V, const PsiParams& params,
                              u64 k) {
    if (k < 1) throw DomainError("holder_step_check requires k >= 1");
    check_same_prime(U, V, params);
    const u64 pv = params.p.value();

    std::vector<Complex> psi(pv);
    for (u64 s = 0; s < pv; ++s) psi[s] = eval_psi(params, s);

    double inner_pow_sum = 0.0;
    for (u64 u = 0; u < pv; ++u) {
        KahanSum inner;
        for (std::size_t j = 0; j < V.size(); ++j)
            inner.add(V.weights()[j] * psi[add_mod(u, V.elements()[j], pv)]);
        inner_pow_sum += std::pow(std::norm(inner.value()), static_cast<double>(k));
    }

    HolderCheck out;
    out.lhs = std::pow(std::norm(double_sum_direct(U, V, params)), static_cast<double>(k));
    out.rhs = std::pow(U.A() * U.A(), static_cast<double>(k)) *
              std::pow(static_cast<double>(U.size()), 2.0 * static_cast<double>(k) - 1.0) *
              inner_pow_sum;
    return out;
}

} // namespace kloostlab
