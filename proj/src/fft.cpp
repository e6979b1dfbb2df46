#include "kloostlab/fft.hpp"

#include <cmath>
#include <numbers>

#include "kloostlab/errors.hpp"

namespace kloostlab {

namespace {

std::size_t next_pow2(std::size_t n) {
    std::size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

// chirp(t) = exp(sign * pi * i * t^2 / n). t^2 is reduced mod 2n first so the
// angle stays small; the reduction is exact because the chirp has period 2n
// in t^2.
Complex chirp(u64 t, u64 n, int sign) {
    u64 tr = t % (2 * n);
    u64 q = static_cast<u64>(u128(tr) * tr % (2 * n));
    double angle = std::numbers::pi * static_cast<double>(q) / static_cast<double>(n);
    return {std::cos(angle), sign > 0 ? std::sin(angle) : -std::sin(angle)};
}

} // namespace

void fft_pow2(std::vector<Complex>& a, int sign) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw DomainError("fft_pow2: length must be a power of two");
    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double angle = 2.0 * std::numbers::pi / static_cast<double>(len);
        if (sign < 0) angle = -angle;
        Complex wlen(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                Complex u = a[i + j];
                Complex v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<Complex> cyclic_dft(const std::vector<Complex>& in, int sign) {
    const std::size_t n = in.size();
    if (n == 0) throw DomainError("cyclic_dft: empty input");
    if (sign != 1 && sign != -1) throw DomainError("cyclic_dft: sign must be +1 or -1");
    if ((n & (n - 1)) == 0) {
        std::vector<Complex> a = in;
        fft_pow2(a, sign);
        return a;
    }
    // Bluestein: tk = (t^2 + k^2 - (k-t)^2)/2, so the transform is a
    // convolution of chirped inputs with the conjugate chirp.
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<Complex> a(m, Complex{0.0, 0.0});
    std::vector<Complex> b(m, Complex{0.0, 0.0});
    for (std::size_t t = 0; t < n; ++t) a[t] = in[t] * chirp(t, n, sign);
    b[0] = chirp(0, n, -sign);
    for (std::size_t t = 1; t < n; ++t) b[t] = b[m - t] = chirp(t, n, -sign);
    fft_pow2(a, -1);
    fft_pow2(b, -1);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, 1);
    const double scale = 1.0 / static_cast<double>(m);
    std::vector<Complex> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * scale * chirp(k, n, sign);
    return out;
}

std::vector<Complex> additive_char_transform(const std::vector<Complex>& vec, Prime p) {
    if (vec.size() != p.value())
        throw DomainError("additive_char_transform: vector length must equal p");
    return cyclic_dft(vec, +1);
}

} // namespace kloostlab
