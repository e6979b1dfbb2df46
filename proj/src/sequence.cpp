#include "kloostlab/sequence.hpp"

#include <mpfr.h>

#include <cmath>
#include <limits>

namespace kloostlab {

namespace {

constexpr mpfr_prec_t kStartPrec = 96;
constexpr mpfr_prec_t kMaxPrec = 4096;

// floor(s1 * s2 * base^expo + shift) with the whole expression evaluated
// twice, once rounding every step down and once up. base >= 1 and
// s1, s2 > 0, so directed rounding propagates through the products.
// Certification succeeds when both floors agree.
i64 certified_floor_power_term(double base, double expo, double s1, double s2, double shift) {
    i64 result = 0;
    bool certified = false;
    for (mpfr_prec_t prec = kStartPrec; prec <= kMaxPrec && !certified; prec *= 2) {
        mpfr_t b, e, lo, hi;
        mpfr_inits2(prec, b, e, lo, hi, static_cast<mpfr_ptr>(nullptr));
        mpfr_set_d(b, base, MPFR_RNDN);  // doubles are exact here
        mpfr_set_d(e, expo, MPFR_RNDN);
        mpfr_pow(lo, b, e, MPFR_RNDD);
        mpfr_pow(hi, b, e, MPFR_RNDU);
        mpfr_mul_d(lo, lo, s1, MPFR_RNDD);
        mpfr_mul_d(hi, hi, s1, MPFR_RNDU);
        mpfr_mul_d(lo, lo, s2, MPFR_RNDD);
        mpfr_mul_d(hi, hi, s2, MPFR_RNDU);
        mpfr_add_d(lo, lo, shift, MPFR_RNDD);
        mpfr_add_d(hi, hi, shift, MPFR_RNDU);
        bool fits = mpfr_fits_slong_p(lo, MPFR_RNDD) && mpfr_fits_slong_p(hi, MPFR_RNDD);
        long fl = 0, fh = 0;
        if (fits) {
            fl = mpfr_get_si(lo, MPFR_RNDD); // rounding toward -inf == floor
            fh = mpfr_get_si(hi, MPFR_RNDD);
        }
        mpfr_clears(b, e, lo, hi, static_cast<mpfr_ptr>(nullptr));
        if (!fits)
            throw DomainError("certified floor: value does not fit in a 64-bit integer");
        if (fl == fh) {
            result = fl;
            certified = true;
        }
    }
    if (!certified)
        throw PrecisionExhaustedError(
            "certified floor: enclosure still contains an integer at 4096 bits");
    return result;
}

i64 floor_to_i64(double v, const char* what) {
    if (!std::isfinite(v) || std::abs(v) >= 9.2e18)
        throw DomainError(std::string(what) + ": value does not fit in a 64-bit integer");
    return static_cast<i64>(std::floor(v));
}

double simpson_rule(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double simpson_recurse(const std::function<double(double)>& g, double a, double b, double fa,
                       double fm, double fb, double whole, double tol, int depth) {
    if (depth > 60) throw QuadratureError("adaptive_simpson: recursion limit reached");
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = g(lm), frm = g(rm);
    double left = simpson_rule(a, m, fa, flm, fm);
    double right = simpson_rule(m, b, fm, frm, fb);
    double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_recurse(g, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           simpson_recurse(g, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& g, double a, double b,
                        double rel_tol) {
    if (a == b) return 0.0;
    double m = 0.5 * (a + b);
    double fa = g(a), fm = g(m), fb = g(b);
    double whole = simpson_rule(a, b, fa, fm, fb);
    double tol = rel_tol * std::max(std::abs(whole), 1e-300);
    return simpson_recurse(g, a, b, fa, fm, fb, whole, tol, 0);
}

SequenceSpec SequenceSpec::power(double c, bool theorem_range) {
    if (!(c > 1.0 && c < 2.0))
        throw DomainError("SequenceSpec::power: exponent must lie in (1, 2)");
    if (theorem_range && !(c < 4.0 / 3.0))
        throw DomainError("SequenceSpec::power: theorem range requires c in (1, 4/3)");
    SequenceSpec s;
    s.kind_ = SequenceKind::Power;
    s.c_ = c;
    s.kappa_ = 2.0 - c;
    return s;
}

SequenceSpec SequenceSpec::custom(std::function<double(double)> f,
                                  std::function<double(double)> f_prime,
                                  std::function<double(double)> f_double_prime, double kappa) {
    if (!f || !f_prime || !f_double_prime)
        throw DomainError("SequenceSpec::custom: all three evaluators are required");
    if (!(kappa >= 0.0 && kappa < 1.0))
        throw DomainError("SequenceSpec::custom: kappa must lie in [0, 1)");
    // Shape check on a log grid: f increasing, f'' positive and non-increasing.
    double prev_f = f(2.0);
    double prev_fpp = f_double_prime(2.0);
    for (double t = 4.0; t <= 1.0e6; t *= 2.3) {
        double ft = f(t), fppt = f_double_prime(t);
        if (!(ft > prev_f))
            throw DomainError("SequenceSpec::custom: f is not increasing on the sample grid");
        if (!(fppt > 0.0))
            throw DomainError("SequenceSpec::custom: f'' is not positive on the sample grid");
        if (fppt > prev_fpp * (1.0 + 1e-9))
            throw DomainError("SequenceSpec::custom: f'' increases on the sample grid");
        prev_f = ft;
        prev_fpp = fppt;
    }
    SequenceSpec s;
    s.kind_ = SequenceKind::Custom;
    s.kappa_ = kappa;
    s.f_ = std::move(f);
    s.fp_ = std::move(f_prime);
    s.fpp_ = std::move(f_double_prime);
    return s;
}

double SequenceSpec::exponent() const {
    if (kind_ != SequenceKind::Power)
        throw DomainError("SequenceSpec::exponent: not a power spec");
    return c_;
}

double SequenceSpec::f(double t) const {
    return kind_ == SequenceKind::Power ? std::pow(t, c_) : f_(t);
}

double SequenceSpec::f_prime(double t) const {
    return kind_ == SequenceKind::Power ? c_ * std::pow(t, c_ - 1.0) : fp_(t);
}

double SequenceSpec::f_double_prime(double t) const {
    return kind_ == SequenceKind::Power ? c_ * (c_ - 1.0) * std::pow(t, c_ - 2.0) : fpp_(t);
}

i64 floor_f(const SequenceSpec& spec, u64 n) {
    if (n < 1) throw DomainError("floor_f: n must be >= 1");
    if (spec.kind() == SequenceKind::Power)
        return certified_floor_power_term(static_cast<double>(n), spec.exponent(), 1.0, 1.0, 0.0);
    return floor_to_i64(spec.f(static_cast<double>(n)), "floor_f");
}

std::vector<double> kappa_estimate(const SequenceSpec& spec, const std::vector<double>& t_values) {
    std::vector<double> out;
    out.reserve(t_values.size());
    for (double t : t_values) {
        if (!(t > 1.0)) throw DomainError("kappa_estimate: t must be > 1");
        double fpp = spec.f_double_prime(t);
        if (!(fpp > 0.0)) throw DomainError("kappa_estimate: f''(t) must be positive");
        out.push_back(-std::log(fpp) / std::log(t));
    }
    return out;
}

TaylorSplit taylor_split(const SequenceSpec& spec, double K, u64 n, u64 h) {
    double nd = static_cast<double>(n);
    double hd = static_cast<double>(h);
    if (!(K <= nd)) throw DomainError("taylor_split: requires K <= n");
    TaylorSplit split;
    split.main = spec.f(nd);
    split.linear = hd * spec.f_prime(K);
    if (spec.kind() == SequenceKind::Power) {
        double c = spec.exponent();
        // Antiderivative routes, independent of the identity being checked:
        //   I = h (f'(n) - f'(K)),   f' = c t^{c-1}
        //   J = c (n+h) ((n+h)^{c-1} - n^{c-1}) - (c-1) ((n+h)^c - n^c)
        split.I = hd * c * (std::pow(nd, c - 1.0) - std::pow(K, c - 1.0));
        double nh = nd + hd;
        split.J = c * nh * (std::pow(nh, c - 1.0) - std::pow(nd, c - 1.0)) -
                  (c - 1.0) * (std::pow(nh, c) - std::pow(nd, c));
    } else {
        auto fpp = [&spec](double u) { return spec.f_double_prime(u); };
        split.I = (K == nd || h == 0) ? 0.0 : hd * adaptive_simpson(fpp, K, nd);
        double nh = nd + hd;
        auto weighted = [&spec, nh](double u) { return spec.f_double_prime(u) * (nh - u); };
        split.J = (h == 0) ? 0.0 : adaptive_simpson(weighted, nd, nh);
    }
    return split;
}

i64 carry_term(const SequenceSpec& spec, double K, u64 n, u64 h, double xi0) {
    if (!(xi0 >= 0.0 && xi0 < 1.0)) throw DomainError("carry_term: xi0 must lie in [0, 1)");
    double nd = static_cast<double>(n);
    if (!(K <= nd)) throw DomainError("carry_term: requires K <= n");
    if (spec.kind() == SequenceKind::Power) {
        double c = spec.exponent();
        i64 lhs = certified_floor_power_term(nd + static_cast<double>(h), c, 1.0, 1.0, 0.0);
        i64 base = certified_floor_power_term(nd, c, 1.0, 1.0, xi0);
        // h f'(K) = h * c * K^{c-1}; c-1 is exact (Sterbenz).
        i64 lin = (h == 0 && xi0 == 0.0)
                      ? 0
                      : certified_floor_power_term(K, c - 1.0, static_cast<double>(h), c, -xi0);
        return lhs - base - lin;
    }
    double fn_h = spec.f(nd + static_cast<double>(h));
    double fn = spec.f(nd);
    double lin = static_cast<double>(h) * spec.f_prime(K);
    return floor_to_i64(fn_h, "carry_term") - floor_to_i64(fn + xi0, "carry_term") -
           floor_to_i64(lin - xi0, "carry_term");
}

} // namespace kloostlab
