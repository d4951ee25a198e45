#pragma once

#include <vector>

#include "vesselnav/error.hpp"

namespace vn {

// Small statistics kit for the evaluation reports: summary moments and the
// paired two-tailed Student's t-test used for variant comparisons.

double mean_of(const std::vector<double>& xs);

/// Spread of a finite set treated as the whole population (divide by n).
/// Used for the report's "mean ± sd" cells.
double population_sd(const std::vector<double>& xs);

/// Unbiased spread of a sample (divide by n - 1). Used inside the t-test.
double sample_sd(const std::vector<double>& xs);

/// Regularized incomplete beta function I_x(a, b), by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a Student's t statistic with `df` degrees of freedom,
/// via p = I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided_p(double t, int df);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
};

/// Paired two-tailed Student's t-test on equal-length samples. Identical
/// samples give (t = 0, p = 1); otherwise zero variance of the differences is
/// a degenerate sample and an error (the caller decides how to report it).
TTestResult paired_ttest(const std::vector<double>& a,
                         const std::vector<double>& b);

} // namespace vn
