#pragma once

#include <span>
#include <stdexcept>

namespace crosstalk::detect {

struct DegenerateSample : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Welch's unequal-variance two-sample test. p_value is two-sided.
//
// Degenerate inputs are resolved rather than rejected: if both samples have
// zero variance, p is 1 when the means agree and 0 otherwise; if only one
// variance is zero the Welch statistic is still well defined and is used
// as-is. Fewer than two observations per sample throws DegenerateSample.
struct TTestResult {
    double t_stat = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    double mean_a = 0.0;
    double mean_b = 0.0;

    bool significant(double alpha = 0.05) const { return p_value < alpha; }
};

TTestResult t_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);  // sample variance, n-1
double percentile(std::span<const double> xs, double q);  // q in [0,1]

}  // namespace crosstalk::detect
