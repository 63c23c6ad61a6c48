// Small numeric kernels shared across the library: adaptive Simpson
// quadrature, bracketed bisection, and order-independent pairwise summation.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace screenlab {

namespace detail {

template <typename F>
double simpson_ad(const F& f, double a, double c, double b, double fa, double fc, double fb,
                  double whole, double tol, int depth) {
    const double ca = 0.5 * (a + c);
    const double cb = 0.5 * (c + b);
    const double fca = f(ca);
    const double fcb = f(cb);
    const double left = (c - a) / 6.0 * (fa + 4.0 * fca + fc);
    const double right = (b - c) / 6.0 * (fc + 4.0 * fcb + fb);
    const double err = (left + right - whole) / 15.0;
    if (std::abs(err) <= tol || depth <= 0) return left + right + err;
    return simpson_ad(f, a, ca, c, fa, fca, fc, left, 0.5 * tol, depth - 1) +
           simpson_ad(f, c, cb, b, fc, fcb, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive composite Simpson with Richardson correction. abs_tol is an
// absolute tolerance on the whole interval; max recursion depth 20 caps the
// subdivision count at 2^20 panels.
template <typename F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10) {
    if (a == b) return 0.0;
    const double c = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fc = f(c);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    return detail::simpson_ad(f, a, c, b, fa, fc, fb, whole, abs_tol, 20);
}

// Bisection for f(x)=target on [lo,hi], f nondecreasing. Converges to x
// within abs_tol. Endpoints are assumed to bracket the target.
template <typename F>
double bisect_increasing(const F& f, double lo, double hi, double target, double abs_tol = 1e-12) {
    double a = lo, b = hi;
    while (b - a > abs_tol) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;  // hit double resolution
        if (f(m) < target)
            a = m;
        else
            b = m;
    }
    return 0.5 * (a + b);
}

// Pairwise (cascade) summation. Deterministic for a fixed element order and
// independent of how the elements were produced.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;  // sample sd / sqrt(n)
};

inline MeanStderr mean_stderr(std::span<const double> xs) {
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) return {};
    const double mean = pairwise_sum(xs) / n;
    if (xs.size() == 1) return {mean, 0.0};
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

}  // namespace screenlab
