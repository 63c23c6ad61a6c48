// ThresholdProfile: one cutoff per interior tree node (2^N - 1 of them),
// indexed by the working-status history that precedes the decision.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "screenlab/dist.hpp"
#include "screenlab/history.hpp"

namespace screenlab {

class ThresholdProfile {
  public:
    ThresholdProfile(int periods, std::vector<double> cutoffs, const Support& support)
        : periods_(periods), cutoffs_(std::move(cutoffs)) {
        if (periods < 1 || periods > kMaxPeriods)
            throw std::invalid_argument("ThresholdProfile: N out of range");
        if (cutoffs_.size() != node_count(periods))
            throw std::invalid_argument("ThresholdProfile: expected " +
                                        std::to_string(node_count(periods)) + " cutoffs, got " +
                                        std::to_string(cutoffs_.size()));
        for (double c : cutoffs_)
            if (!(c >= support.lo && c <= support.hi))
                throw std::invalid_argument("ThresholdProfile: cutoff outside support");
    }

    // All-cutoffs-equal helper, mostly for the always-working profile.
    static ThresholdProfile constant(int periods, double cutoff, const Support& support) {
        return ThresholdProfile(periods, std::vector<double>(node_count(periods), cutoff),
                                support);
    }

    static std::size_t node_count(int periods) { return (std::size_t{1} << periods) - 1; }

    int periods() const { return periods_; }

    // Cutoff applied in period w.length+1 after history w.
    double cutoff(const WorkHistory& w) const {
        if (w.length >= periods_)
            throw std::runtime_error("ThresholdProfile: no cutoff for node \"" + w.str() +
                                     "\" (depth exceeds N=" + std::to_string(periods_) + ")");
        return cutoffs_[index(w)];
    }
    double& cutoff(const WorkHistory& w) {
        if (w.length >= periods_)
            throw std::runtime_error("ThresholdProfile: no cutoff for node \"" + w.str() + "\"");
        return cutoffs_[index(w)];
    }

    const std::vector<double>& raw() const { return cutoffs_; }
    std::vector<double>& raw() { return cutoffs_; }

    static std::size_t index(const WorkHistory& w) {
        return ((std::size_t{1} << w.length) - 1) + w.bits;
    }
    static WorkHistory node_at(std::size_t idx) {
        int len = 0;
        std::size_t base = 0;
        while (idx - base >= (std::size_t{1} << len)) {
            base += std::size_t{1} << len;
            ++len;
        }
        return {len, static_cast<std::uint32_t>(idx - base)};
    }

    friend bool operator==(const ThresholdProfile& a, const ThresholdProfile& b) {
        return a.periods_ == b.periods_ && a.cutoffs_ == b.cutoffs_;
    }

  private:
    int periods_;
    std::vector<double> cutoffs_;  // heap layout: offset (2^t - 1) + bitmask
};

// Pr(w) under the threshold rules: product over periods of F(c) on work steps
// and 1-F(c) on shirk steps. Ties at the cutoff count as work.
inline double path_probability(const ThresholdProfile& profile, const CostDistribution& d,
                               const WorkHistory& w) {
    if (w.length > profile.periods())
        throw std::runtime_error("path_probability: node \"" + w.str() + "\" deeper than N");
    double p = 1.0;
    for (int t = 0; t < w.length; ++t) {
        const double F = d.cdf(profile.cutoff(w.prefix(t)));
        p *= w.worked(t) ? F : 1.0 - F;
        if (p == 0.0) return 0.0;
    }
    return p;
}

}  // namespace screenlab
