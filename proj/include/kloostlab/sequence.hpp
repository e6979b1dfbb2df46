#pragma once

#include <functional>

#include "kloostlab/mod_arith.hpp"

namespace kloostlab {

enum class SequenceKind { Power, Custom };

// An evaluable (f, f', f'') triple with growth exponent kappa, defining the
// integer sequence floor(f(n)). Power specs f(t) = t^c carry kappa = 2 - c
// and get certified floor evaluation; custom specs are trusted evaluators
// whose shape is only sampled at construction.
class SequenceSpec {
public:
    // f(t) = t^c. Plain construction accepts c in (1, 2); with
    // theorem_range = true the window narrows to c in (1, 4/3) so that
    // kappa = 2 - c lies in (2/3, 1).
    static SequenceSpec power(double c, bool theorem_range = false);

    // User-supplied evaluators. kappa in [0, 1). The factory samples f for
    // monotonicity and f'' for positivity/non-increase on a log grid; it
    // checks shape, it does not prove the growth condition.
    static SequenceSpec custom(std::function<double(double)> f,
                               std::function<double(double)> f_prime,
                               std::function<double(double)> f_double_prime,
                               double kappa);

    SequenceKind kind() const { return kind_; }
    double kappa() const { return kappa_; }
    // Power exponent c; DomainError for custom specs.
    double exponent() const;

    double f(double t) const;
    double f_prime(double t) const;
    double f_double_prime(double t) const;

private:
    SequenceSpec() = default;
    SequenceKind kind_ = SequenceKind::Power;
    double c_ = 0.0;
    double kappa_ = 0.0;
    std::function<double(double)> f_, fp_, fpp_;
};

// Exactly floor(f(n)). For power specs the result is certified by interval
// evaluation with directed rounding, doubling the working precision until the
// enclosure contains no integer; PrecisionExhaustedError if the ceiling
// (4096 bits) is reached. Custom specs evaluate in double precision and are
// not certified.
i64 floor_f(const SequenceSpec& spec, u64 n);

// -log f''(t) / log t for each t; the caller watches convergence to kappa.
std::vector<double> kappa_estimate(const SequenceSpec& spec, const std::vector<double>& t_values);

// The four pieces of f(n+h) = f(n) + h f'(K) + I + J.
struct TaylorSplit {
    double main;   // f(n)
    double linear; // h * f'(K)
    double I;      // h * integral_K^n f''
    double J;      // integral_n^{n+h} f''(u) (n+h-u) du
    double total() const { return main + linear + I + J; }
};

// I and J come from closed-form antiderivatives of f'' for power specs and
// from adaptive Simpson quadrature (relative tolerance 1e-10) otherwise.
TaylorSplit taylor_split(const SequenceSpec& spec, double K, u64 n, u64 h);

// The carry correction eta = floor(f(n+h)) - floor(f(n)+xi0) - floor(h f'(K)-xi0).
// Lies in {0, 1, 2} whenever 0 <= I+J < 1. Power specs evaluate all three
// floors with certified interval arithmetic.
i64 carry_term(const SequenceSpec& spec, double K, u64 n, u64 h, double xi0);

// Adaptive Simpson quadrature, exposed for the custom taylor_split path and
// for tests. Throws QuadratureError if the tolerance cannot be met.
double adaptive_simpson(const std::function<double(double)>& g, double a, double b,
                        double rel_tol = 1e-10);

} // namespace kloostlab
