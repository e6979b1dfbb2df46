#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "kloostlab/errors.hpp"

namespace kloostlab {

using u64 = std::uint64_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;
using Complex = std::complex<double>;

// Deterministic Miller-Rabin, valid for the full 64-bit range.
bool is_prime_u64(u64 n);

// A prime modulus, checked at construction.
class Prime {
public:
    explicit Prime(u64 p);
    u64 value() const { return p_; }
    friend bool operator==(Prime a, Prime b) { return a.p_ == b.p_; }
    friend bool operator!=(Prime a, Prime b) { return a.p_ != b.p_; }

private:
    u64 p_;
};

// Reduce a mixed-sign integer into [0, p).
u64 mod_reduce(i64 a, Prime p);

inline u64 add_mod(u64 a, u64 b, u64 p) {
    u64 s = a + b; // a, b < p <= 2^63 handled below via u128 when needed
    return s >= p || s < a ? static_cast<u64>((u128(a) + b) % p) : s;
}

inline u64 sub_mod(u64 a, u64 b, u64 p) { return a >= b ? a - b : a + (p - b); }

inline u64 mul_mod(u64 a, u64 b, u64 p) { return static_cast<u64>(u128(a) * b % p); }

u64 pow_mod(u64 base, u64 exp, u64 p);

// Modular inverse by extended Euclid. Requires 0 < a mod p; throws
// ZeroInverseError for a = 0 mod p (the excluded case of the twisted
// exponential).
u64 mod_inverse(u64 a, Prime p);

// Montgomery's batch trick: one inversion plus 3(n-1) multiplications.
// Results are bit-identical to per-element mod_inverse. All inputs must be
// nonzero mod p.
void batch_mod_inverse(std::span<const u64> in, std::span<u64> out, Prime p);
std::vector<u64> batch_mod_inverse(std::span<const u64> in, Prime p);

// e_p(a) = exp(2*pi*i*a/p); the argument is reduced mod p first.
Complex e_p(i64 a, Prime p);
Complex e_p(u64 a, Prime p);

// Parameters (x, y, p) of the twisted exponential psi_{x,y;p}. Inputs are
// reduced into [0, p) at construction.
struct PsiParams {
    PsiParams(i64 x, i64 y, Prime p);
    u64 x;
    u64 y;
    Prime p;
};

// psi_{x,y;p}(u): 0 when u = 0 mod p, e_p(x*u + y*u^{-1}) otherwise.
Complex eval_psi(const PsiParams& params, u64 u);

// Precomputed table of the p-th roots of unity: roots[r] = e_p(r).
// Entry values are identical to what e_p(r, p) returns.
class UnityRoots {
public:
    explicit UnityRoots(Prime p);
    const Complex& operator[](u64 r) const { return roots_[r]; }
    u64 prime() const { return p_; }

private:
    u64 p_;
    std::vector<Complex> roots_;
};

// Precomputed table of inverses mod p; table[0] = 0 as a sentinel.
// Entries agree with mod_inverse on every nonzero residue.
class InverseTable {
public:
    explicit InverseTable(Prime p);
    u64 operator[](u64 a) const { return inv_[a]; }
    u64 prime() const { return p_; }

private:
    u64 p_;
    std::vector<u64> inv_;
};

// Numerically compensated (Kahan) accumulator for complex sums. Summation
// order fully determines the result.
class KahanSum {
public:
    void add(Complex v) {
        Complex y = v - comp_;
        Complex t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    Complex value() const { return sum_; }

private:
    Complex sum_{0.0, 0.0};
    Complex comp_{0.0, 0.0};
};

} // namespace kloostlab
