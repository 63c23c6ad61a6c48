// Cost distributions: density, CDF, mean, and the CDF integral
// I(x) = ∫_lo^x F, which is the quantity the payment and payoff formulas
// consume. Also the distributional assumption checks and the virtual cost
// G(θ) = θ + F(θ)/f(θ) with its inverse.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "screenlab/numeric.hpp"

namespace screenlab {

struct Support {
    double lo;
    double hi;

    Support(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw std::invalid_argument("Support: need finite lo < hi, got [" +
                                        std::to_string(lo_) + ", " + std::to_string(hi_) + "]");
    }
    double width() const { return hi - lo; }
};

class CostDistribution {
  public:
    using Fn = std::function<double(double)>;

    CostDistribution(std::string name, Support support, Fn density, Fn cdf, double mean,
                     Fn cdf_integral, Fn quantile = nullptr)
        : name_(std::move(name)),
          support_(support),
          density_(std::move(density)),
          cdf_(std::move(cdf)),
          mean_(mean),
          cdf_integral_(std::move(cdf_integral)),
          quantile_(std::move(quantile)) {}

    const std::string& name() const { return name_; }
    const Support& support() const { return support_; }
    double lo() const { return support_.lo; }
    double hi() const { return support_.hi; }
    double mean() const { return mean_; }

    double density(double x) const { return density_(clamp(x)); }

    double cdf(double x) const {
        if (x <= support_.lo) return 0.0;
        if (x >= support_.hi) return 1.0;
        return cdf_(x);
    }

    // I(x) = ∫_lo^x F(θ) dθ. Nonnegative, nondecreasing, convex;
    // I(hi) = hi - mean by integration by parts.
    double cdf_integral(double x) const {
        if (x <= support_.lo) return 0.0;
        if (x >= support_.hi) return support_.hi - mean_;
        return cdf_integral_(x);
    }

    // Inverse CDF. Analytic when provided, otherwise bisection on F to 1e-12.
    double quantile(double u) const {
        if (u <= 0.0) return support_.lo;
        if (u >= 1.0) return support_.hi;
        if (quantile_) return quantile_(u);
        return bisect_increasing([this](double x) { return cdf_(x); }, support_.lo, support_.hi,
                                 u, 1e-12);
    }

  private:
    double clamp(double x) const {
        if (x < support_.lo) return support_.lo;
        if (x > support_.hi) return support_.hi;
        return x;
    }

    std::string name_;
    Support support_;
    Fn density_;
    Fn cdf_;
    double mean_;
    Fn cdf_integral_;
    Fn quantile_;
};

inline CostDistribution make_uniform(double lo, double hi) {
    Support s(lo, hi);
    const double w = s.width();
    return CostDistribution(
        "uniform", s, [w](double) { return 1.0 / w; },
        [lo, w](double x) { return (x - lo) / w; }, 0.5 * (lo + hi),
        [lo, w](double x) { return (x - lo) * (x - lo) / (2.0 * w); },
        [lo, w](double u) { return lo + u * w; });
}

inline CostDistribution make_truncated_normal(double mu, double sigma, double lo, double hi) {
    if (!(sigma > 0.0)) throw std::invalid_argument("make_truncated_normal: sigma must be > 0");
    Support s(lo, hi);
    const double inv_s = 1.0 / sigma;
    auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); };
    auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const double za = (lo - mu) * inv_s, zb = (hi - mu) * inv_s;
    const double Z = Phi(zb) - Phi(za);
    if (!(Z > 0.0)) throw std::invalid_argument("make_truncated_normal: empty mass on support");
    // standard truncated-normal mean
    const double mean = mu + sigma * (phi(za) - phi(zb)) / Z;
    auto density = [=](double x) { return phi((x - mu) * inv_s) * inv_s / Z; };
    auto cdf = [=](double x) { return (Phi((x - mu) * inv_s) - Phi(za)) / Z; };
    auto integral = [=, support = s](double x) {
        return integrate([&cdf](double t) { return cdf(t); }, support.lo, x, 1e-10);
    };
    return CostDistribution("truncnorm", s, density, cdf, mean, integral);
}

namespace detail {

// Regularized incomplete beta by continued fraction (Lentz).
inline double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return h;
}

inline double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lnb = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(lnb);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Beta(a,b) rescaled to [lo,hi]. Shapes below 1 give unbounded density at an
// endpoint, which the model's f > 0 requirement rules out.
inline CostDistribution make_scaled_beta(double a, double b, double lo, double hi) {
    if (!(a >= 1.0) || !(b >= 1.0))
        throw std::invalid_argument("make_scaled_beta: shape parameters must be >= 1");
    Support s(lo, hi);
    const double w = s.width();
    const double lnB = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    auto density = [=](double x) {
        const double u = (x - lo) / w;
        if (u <= 0.0) return (a == 1.0) ? std::exp(-lnB) * std::pow(1.0 - u, b - 1.0) / w : 0.0;
        if (u >= 1.0) return (b == 1.0) ? std::exp(-lnB) * std::pow(u, a - 1.0) / w : 0.0;
        return std::exp((a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) - lnB) / w;
    };
    auto cdf = [=](double x) { return detail::betai(a, b, (x - lo) / w); };
    const double mean = lo + w * a / (a + b);
    auto integral = [=, support = s](double x) {
        return integrate([&cdf](double t) { return cdf(t); }, support.lo, x, 1e-10);
    };
    return CostDistribution("scaledbeta", s, density, cdf, mean, integral);
}

// Virtual cost G(θ) = θ + F(θ)/f(θ). At θ = lo the ratio is 0/0 with limit 0,
// so G(lo) = lo.
inline double virtual_cost(const CostDistribution& d, double theta) {
    if (theta < d.lo() || theta > d.hi())
        throw std::invalid_argument("virtual_cost: theta outside support");
    const double F = d.cdf(theta);
    if (F == 0.0) return theta;
    const double f = d.density(theta);
    if (f <= 0.0) return std::numeric_limits<double>::infinity();
    return theta + F / f;
}

// Inverse of G by bisection to 1e-12; requires G nondecreasing on the support.
inline double virtual_cost_inverse(const CostDistribution& d, double y) {
    const double g_lo = virtual_cost(d, d.lo());
    const double g_hi = virtual_cost(d, d.hi());
    if (y < g_lo || y > g_hi) {
        std::ostringstream os;
        os << "virtual_cost_inverse: y=" << y << " outside [G(lo), G(hi)] = [" << g_lo << ", "
           << g_hi << "]; clamped endpoint would be " << (y < g_lo ? d.lo() : d.hi());
        throw std::domain_error(os.str());
    }
    return bisect_increasing([&d](double t) { return virtual_cost(d, t); }, d.lo(), d.hi(), y,
                             1e-12);
}

struct AssumptionReport {
    bool a1_holds = false;
    bool a2_g_monotone = false;
    bool a2_density_bound = false;
    std::string details;
};

// lo + E(θ) >= hi, equality counts as holding.
inline bool check_assumption1(const CostDistribution& d) {
    return d.lo() + d.mean() >= d.hi();
}

inline constexpr int kGridPoints = 10001;      // fixed grid for the monotonicity surrogate
inline constexpr double kMonotoneSlack = 1e-9;

inline AssumptionReport check_assumption2(const CostDistribution& d, int periods) {
    if (periods < 2) throw std::invalid_argument("check_assumption2: N must be >= 2");
    AssumptionReport rep;
    rep.a1_holds = check_assumption1(d);

    rep.a2_g_monotone = true;
    double prev = virtual_cost(d, d.lo());
    double worst = 0.0;
    const double step = d.support().width() / (kGridPoints - 1);
    for (int i = 1; i < kGridPoints; ++i) {
        const double x = (i == kGridPoints - 1) ? d.hi() : d.lo() + step * i;
        const double g = virtual_cost(d, x);
        if (g < prev - kMonotoneSlack) {
            rep.a2_g_monotone = false;
            worst = std::max(worst, prev - g);
        }
        prev = g;
    }

    const double bound = 1.0 / ((periods - 1) * (d.hi() - d.mean()));
    rep.a2_density_bound = d.density(d.hi()) <= bound;

    std::ostringstream os;
    os << "A1 lo+E-hi=" << (d.lo() + d.mean() - d.hi()) << "; G monotone on " << kGridPoints
       << "-point grid (slack " << kMonotoneSlack << "): " << (rep.a2_g_monotone ? "yes" : "no");
    if (!rep.a2_g_monotone) os << " (max drop " << worst << ")";
    os << "; f(hi)=" << d.density(d.hi()) << " vs bound " << bound;
    rep.details = os.str();
    return rep;
}

}  // namespace screenlab
