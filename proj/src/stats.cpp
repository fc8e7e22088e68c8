#include "nrlearn/stats.hpp"

#include <algorithm>
#include <cmath>

#include "nrlearn/errors.hpp"

namespace nrlearn {

double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw ConfigError("mean of empty series");
    double total = 0.0;
    for (const double x : xs) total += x;
    return total / static_cast<double>(xs.size());
}

double sample_stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (const double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double stderr_of_mean(const std::vector<double>& xs) {
    if (xs.empty()) throw ConfigError("stderr of empty series");
    return sample_stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

double percentile(std::vector<double> xs, double q) {
    if (xs.empty()) throw ConfigError("percentile of empty series");
    if (q < 0.0 || q > 100.0) throw ConfigError("percentile: q must be in [0,100]");
    std::sort(xs.begin(), xs.end());
    const double pos = q / 100.0 * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw ConfigError("linear_fit: need two same-length series with >= 2 points");
    const double mx = mean(xs);
    const double my = mean(ys);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) throw ConfigError("linear_fit: degenerate x values");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

namespace {

// series expansion of P(a,x), valid for x < a + 1
double gammp_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15)
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw NumericalError("incomplete gamma series did not converge");
}

// continued fraction for Q(a,x), valid for x >= a + 1
double gammq_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15)
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw NumericalError("incomplete gamma continued fraction did not converge");
}

} // namespace

double gammp(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw ConfigError("gammp: need a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    return x < a + 1.0 ? gammp_series(a, x) : 1.0 - gammq_cf(a, x);
}

double gammq(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw ConfigError("gammq: need a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    return x < a + 1.0 ? 1.0 - gammp_series(a, x) : gammq_cf(a, x);
}

double chi2_sf(double x, int dof) {
    if (dof < 1) throw ConfigError("chi2_sf: dof must be >= 1");
    return gammq(static_cast<double>(dof) / 2.0, x / 2.0);
}

double chi_square_gof_pvalue(const std::vector<std::int64_t>& counts,
                             const std::vector<double>& probs) {
    if (counts.size() != probs.size() || counts.size() < 2)
        throw ConfigError("chi_square_gof: need matching counts/probs with >= 2 cells");
    std::int64_t total = 0;
    for (const auto c : counts) total += c;
    if (total < 1) throw ConfigError("chi_square_gof: empty sample");
    double stat = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double expected = probs[i] * static_cast<double>(total);
        if (expected <= 0.0) throw ConfigError("chi_square_gof: nonpositive expected count");
        const double diff = static_cast<double>(counts[i]) - expected;
        stat += diff * diff / expected;
    }
    return chi2_sf(stat, static_cast<int>(counts.size()) - 1);
}

double ks_statistic_exponential(std::vector<double> samples, double rate) {
    if (samples.empty()) throw ConfigError("ks_statistic: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = -std::expm1(-rate * samples[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max({d, std::abs(cdf - lo), std::abs(hi - cdf)});
    }
    return d;
}

double ks_critical_value(double alpha, std::size_t n) {
    if (alpha <= 0.0 || alpha >= 1.0 || n == 0) throw ConfigError("ks_critical_value: bad inputs");
    return std::sqrt(-std::log(alpha / 2.0) / (2.0 * static_cast<double>(n)));
}

} // namespace nrlearn
