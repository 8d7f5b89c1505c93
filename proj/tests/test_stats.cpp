#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crosstalk/rng.hpp"
#include "crosstalk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace crosstalk;
using detect::t_test;

namespace {

std::vector<double> normal_sample(std::uint64_t seed, std::size_t n, double mean, double sd) {
    SubStream s(seed, "normal");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = mean + sd * s.normal(i);
    return out;
}

// Label-permutation reference: p = fraction of relabelings whose Welch
// statistic is at least as extreme as the observed one.
double permutation_p(const std::vector<double>& a, const std::vector<double>& b,
                     std::uint64_t seed, int resamples) {
    double observed = std::abs(t_test(a, b).t_stat);
    std::vector<double> pool(a);
    pool.insert(pool.end(), b.begin(), b.end());
    SubStream s(seed, "perm");
    int hits = 0;
    std::vector<double> shuffled(pool);
    for (int r = 0; r < resamples; ++r) {
        // Fisher-Yates with per-draw indexed randomness.
        for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
            std::size_t j = s.bits(static_cast<std::uint64_t>(r) * 1000 + i) % (i + 1);
            std::swap(shuffled[i], shuffled[j]);
        }
        std::vector<double> pa(shuffled.begin(), shuffled.begin() + a.size());
        std::vector<double> pb(shuffled.begin() + a.size(), shuffled.end());
        if (std::abs(t_test(pa, pb).t_stat) >= observed) ++hits;
    }
    return static_cast<double>(hits) / resamples;
}

}  // namespace

TEST_CASE("identical samples give t=0, p=1") {
    std::vector<double> a = {10, 11, 12, 13, 14};
    auto r = t_test(a, a);
    CHECK(r.t_stat == doctest::Approx(0.0));
    CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("clearly separated normals are detected with p < 1e-6") {
    auto a = normal_sample(11, 1000, 100.0, 5.0);
    auto b = normal_sample(12, 1000, 130.0, 5.0);
    auto r = t_test(a, b);
    CHECK(r.p_value < 1e-6);
    CHECK(r.mean_a < r.mean_b);
    CHECK(r.t_stat < 0);
}

TEST_CASE("swapping the samples negates t and keeps p") {
    auto a = normal_sample(21, 200, 50.0, 4.0);
    auto b = normal_sample(22, 220, 52.0, 6.0);
    auto r1 = t_test(a, b);
    auto r2 = t_test(b, a);
    CHECK(r1.t_stat == doctest::Approx(-r2.t_stat));
    CHECK(r1.p_value == doctest::Approx(r2.p_value));
}

TEST_CASE("welch p agrees with a permutation oracle within 0.02 on 20 sample pairs") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        double gap = static_cast<double>(trial % 5);  // 0..4 units of effect
        auto a = normal_sample(100 + trial, 14, 100.0, 5.0);
        auto b = normal_sample(200 + trial, 14, 100.0 + gap * 2.0, 5.0);
        double welch = t_test(a, b).p_value;
        double perm = permutation_p(a, b, 300 + trial, 40000);
        CAPTURE(trial);
        CAPTURE(welch);
        CAPTURE(perm);
        CHECK(std::abs(welch - perm) <= 0.02);
    }
}

TEST_CASE("degenerate inputs") {
    std::vector<double> tiny = {1.0};
    std::vector<double> ok = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(t_test(tiny, ok), detect::DegenerateSample);

    // Both variances zero: p pinned by the means.
    std::vector<double> c1 = {5, 5, 5};
    std::vector<double> c2 = {5, 5, 5, 5};
    auto same = t_test(c1, c2);
    CHECK(same.t_stat == 0.0);
    CHECK(same.p_value == 1.0);
    std::vector<double> c3 = {6, 6, 6};
    auto diff = t_test(c3, c1);
    CHECK(diff.p_value == 0.0);
    CHECK(std::isinf(diff.t_stat));

    // One variance zero: Welch's formula still applies, dof collapses to n-1.
    auto r = t_test(c1, ok);
    CHECK(std::isfinite(r.t_stat));
    CHECK(r.dof == doctest::Approx(2.0));
    CHECK(r.p_value > 0.0);
}

TEST_CASE("percentile interpolates") {
    std::vector<double> xs = {4, 1, 3, 2};
    CHECK(detect::percentile(xs, 0.0) == doctest::Approx(1.0));
    CHECK(detect::percentile(xs, 1.0) == doctest::Approx(4.0));
    CHECK(detect::percentile(xs, 0.5) == doctest::Approx(2.5));
}
