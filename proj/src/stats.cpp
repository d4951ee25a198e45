#include "vesselnav/stats.hpp"

#include <cmath>
#include <cstddef>

namespace vn {

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) fail(ErrorKind::Parameter, "mean of an empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

namespace {

double sum_sq_dev(const std::vector<double>& xs, double m) {
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s;
}

} // namespace

double population_sd(const std::vector<double>& xs) {
    if (xs.empty()) fail(ErrorKind::Parameter, "sd of an empty sample");
    double m = mean_of(xs);
    return std::sqrt(sum_sq_dev(xs, m) / static_cast<double>(xs.size()));
}

double sample_sd(const std::vector<double>& xs) {
    if (xs.size() < 2)
        fail(ErrorKind::Parameter, "sample sd needs at least two values");
    double m = mean_of(xs);
    return std::sqrt(sum_sq_dev(xs, m) / static_cast<double>(xs.size() - 1));
}

namespace {

/// Continued-fraction kernel of the incomplete beta function (modified
/// Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0))
        fail(ErrorKind::Parameter, "beta parameters must be positive");
    if (!(x >= 0.0) || !(x <= 1.0))
        fail(ErrorKind::Parameter, "beta argument must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(log_front);
    // Use the continued fraction on whichever tail converges fast.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, int df) {
    if (df < 1) fail(ErrorKind::Parameter, "degrees of freedom must be >= 1");
    if (std::isnan(t)) fail(ErrorKind::Parameter, "t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    double v = static_cast<double>(df);
    double x = v / (v + t * t);
    double p = regularized_incomplete_beta(0.5 * v, 0.5, x);
    if (p < 0.0) p = 0.0;
    if (p > 1.0) p = 1.0;
    return p;
}

TTestResult paired_ttest(const std::vector<double>& a,
                         const std::vector<double>& b) {
    if (a.size() != b.size())
        fail(ErrorKind::Parameter, "paired samples must have equal length");
    if (a.size() < 2)
        fail(ErrorKind::Parameter, "paired t-test needs at least two pairs");
    std::vector<double> d(a.size());
    bool all_zero = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
        if (d[i] != 0.0) all_zero = false;
    }
    // Identical samples: no evidence of any difference, not a failure.
    if (all_zero) return {0.0, 1.0};
    double m = mean_of(d);
    double s = sample_sd(d);
    if (s == 0.0)
        fail(ErrorKind::Parameter,
             "zero variance of the paired differences (degenerate sample)");
    int df = static_cast<int>(a.size()) - 1;
    double t = m / (s / std::sqrt(static_cast<double>(a.size())));
    return {t, student_t_two_sided_p(t, df)};
}

} // namespace vn
