#pragma once

#include <cstdint>
#include <vector>

namespace nrlearn {

double mean(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs); // ddof = 1
double stderr_of_mean(const std::vector<double>& xs);
double percentile(std::vector<double> xs, double q); // q in [0,100], linear interpolation

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// regularized incomplete gamma functions P(a,x), Q(a,x)
double gammp(double a, double x);
double gammq(double a, double x);

// survival function of the chi-square distribution
double chi2_sf(double x, int dof);

// goodness-of-fit p-value of observed counts against expected probabilities
double chi_square_gof_pvalue(const std::vector<std::int64_t>& counts,
                             const std::vector<double>& probs);

// one-sample Kolmogorov-Smirnov statistic against Exponential(rate)
double ks_statistic_exponential(std::vector<double> samples, double rate);
// asymptotic critical value sqrt(-ln(alpha/2) / (2n))
double ks_critical_value(double alpha, std::size_t n);

} // namespace nrlearn
