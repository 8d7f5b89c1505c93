#include "crosstalk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace crosstalk::detect {

double mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double percentile(std::span<const double> xs, double q) {
    if (xs.empty()) return 0.0;
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    double idx = q * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(idx);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

TTestResult t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw DegenerateSample("t_test requires at least two observations per sample");

    TTestResult r;
    r.mean_a = mean(a);
    r.mean_b = mean(b);
    double va = variance(a);
    double vb = variance(b);
    double na = static_cast<double>(a.size());
    double nb = static_cast<double>(b.size());

    if (va == 0.0 && vb == 0.0) {
        r.dof = na + nb - 2.0;
        if (r.mean_a == r.mean_b) {
            r.t_stat = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_stat = r.mean_a > r.mean_b ? std::numeric_limits<double>::infinity()
                                           : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }

    double se2 = va / na + vb / nb;
    r.t_stat = (r.mean_a - r.mean_b) / std::sqrt(se2);
    // Welch-Satterthwaite. With one zero variance this collapses to n-1 of
    // the varying sample.
    double denom = 0.0;
    if (va > 0.0) denom += (va / na) * (va / na) / (na - 1.0);
    if (vb > 0.0) denom += (vb / nb) * (vb / nb) / (nb - 1.0);
    r.dof = se2 * se2 / denom;

    boost::math::students_t_distribution<double> dist(r.dof);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_stat)));
    return r;
}

}  // namespace crosstalk::detect
