#include "kloostlab/mod_arith.hpp"

#include <cmath>
#include <numbers>

namespace kloostlab {

namespace {

// Miller-Rabin witness check; n odd, n > 2, d*2^r = n-1 with d odd.
bool witness_composite(u64 a, u64 d, int r, u64 n) {
    a %= n;
    if (a == 0) return false;
    u64 x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) return false;
    for (int i = 1; i < r; ++i) {
        x = mul_mod(x, x, n);
        if (x == n - 1) return false;
    }
    return true;
}

} // namespace

bool is_prime_u64(u64 n) {
    if (n < 2) return false;
    for (u64 q : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        if (n == q) return true;
        if (n % q == 0) return false;
    }
    u64 d = n - 1;
    int r = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++r;
    }
    // This base set is deterministic for all 64-bit integers.
    for (u64 a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        if (witness_composite(a, d, r, n)) return false;
    }
    return true;
}

Prime::Prime(u64 p) : p_(p) {
    if (!is_prime_u64(p))
        throw DomainError("Prime: " + std::to_string(p) + " failed the primality check");
}

u64 mod_reduce(i64 a, Prime p) {
    i64 m = static_cast<i64>(p.value());
    i64 r = a % m;
    if (r < 0) r += m;
    return static_cast<u64>(r);
}

u64 pow_mod(u64 base, u64 exp, u64 p) {
    u64 result = 1 % p;
    base %= p;
    while (exp > 0) {
        if (exp & 1) result = mul_mod(result, base, p);
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    return result;
}

u64 mod_inverse(u64 a, Prime p) {
    const u64 m = p.value();
    a %= m;
    if (a == 0) throw ZeroInverseError("mod_inverse: argument is 0 mod p");
    // Extended Euclid on (a, m); m prime so gcd is always 1. Bezout
    // coefficients stay below m in magnitude, which can exceed int64 for
    // moduli near 2^64, hence the 128-bit accumulators.
    __int128 t = 0, new_t = 1;
    u64 r = m, new_r = a;
    while (new_r != 0) {
        u64 q = r / new_r;
        __int128 tmp_t = t - static_cast<__int128>(q) * new_t;
        t = new_t;
        new_t = tmp_t;
        u64 tmp_r = r - q * new_r;
        r = new_r;
        new_r = tmp_r;
    }
    if (t < 0) t += m;
    return static_cast<u64>(t);
}

void batch_mod_inverse(std::span<const u64> in, std::span<u64> out, Prime p) {
    if (in.size() != out.size())
        throw DomainError("batch_mod_inverse: size mismatch");
    const std::size_t n = in.size();
    if (n == 0) return;
    const u64 m = p.value();
    // Prefix products, one gcd, then walk back.
    std::vector<u64> prefix(n);
    u64 acc = 1;
    for (std::size_t i = 0; i < n; ++i) {
        u64 a = in[i] % m;
        if (a == 0) throw ZeroInverseError("batch_mod_inverse: element is 0 mod p");
        prefix[i] = acc;
        acc = mul_mod(acc, a, m);
    }
    u64 inv_acc = mod_inverse(acc, p);
    for (std::size_t i = n; i-- > 0;) {
        out[i] = mul_mod(inv_acc, prefix[i], m);
        inv_acc = mul_mod(inv_acc, in[i] % m, m);
    }
}

std::vector<u64> batch_mod_inverse(std::span<const u64> in, Prime p) {
    std::vector<u64> out(in.size());
    batch_mod_inverse(in, out, p);
    return out;
}

namespace {

Complex unit_phase(u64 r, u64 p) {
    double angle = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(p);
    return {std::cos(angle), std::sin(angle)};
}

} // namespace

Complex e_p(u64 a, Prime p) { return unit_phase(a % p.value(), p.value()); }

Complex e_p(i64 a, Prime p) { return unit_phase(mod_reduce(a, p), p.value()); }

PsiParams::PsiParams(i64 x_in, i64 y_in, Prime p_in)
    : x(mod_reduce(x_in, p_in)), y(mod_reduce(y_in, p_in)), p(p_in) {}

Complex eval_psi(const PsiParams& params, u64 u) {
    const u64 m = params.p.value();
    u %= m;
    if (u == 0) return {0.0, 0.0};
    u64 exponent = add_mod(mul_mod(params.x, u, m), mul_mod(params.y, mod_inverse(u, params.p), m), m);
    return unit_phase(exponent, m);
}

UnityRoots::UnityRoots(Prime p) : p_(p.value()), roots_(p.value()) {
    for (u64 r = 0; r < p_; ++r) roots_[r] = unit_phase(r, p_);
}

InverseTable::InverseTable(Prime p) : p_(p.value()), inv_(p.value(), 0) {
    // inv[a] = -(p/a) * inv[p mod a], the standard linear-time recurrence.
    if (p_ >= 2) inv_[1] = 1;
    for (u64 a = 2; a < p_; ++a) inv_[a] = mul_mod(p_ - p_ / a, inv_[p_ % a], p_);
}

} // namespace kloostlab
