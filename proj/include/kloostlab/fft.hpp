#pragma once

#include <cstdint>
#include <vector>

#include "kloostlab/mod_arith.hpp"

namespace kloostlab {

// In-place power-of-two FFT. sign = -1 gives the forward kernel
// exp(-2*pi*i*jk/n), sign = +1 the inverse kernel (unnormalized).
void fft_pow2(std::vector<Complex>& a, int sign);

// Cyclic discrete transform of arbitrary length n:
//   out[k] = sum_t in[t] * exp(sign * 2*pi*i * t*k / n),
// unnormalized. Power-of-two lengths go straight to fft_pow2; everything
// else runs through a Bluestein chirp-z reduction to a 2^m convolution.
std::vector<Complex> cyclic_dft(const std::vector<Complex>& in, int sign);

// C[lambda] = sum_t vec[t] * e_p(lambda * t), the additive-character
// transform used by the completed double-sum path (positive-sign kernel).
std::vector<Complex> additive_char_transform(const std::vector<Complex>& vec, Prime p);

} // namespace kloostlab
