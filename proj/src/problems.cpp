#include "nrlearn/problems.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nrlearn/errors.hpp"

namespace nrlearn {

namespace {

// log(1 + exp(t)) without overflow
double log_one_exp(double t) {
    if (t > 0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void check_dim(const LossModel& model, const Vector& theta) {
    if (theta.size() != model.dim)
        throw ConfigError("loss model dimension " + std::to_string(model.dim) +
                          " does not match theta of size " + std::to_string(theta.size()));
}

// largest eigenvalue of a symmetric PSD matrix by power iteration
double power_iteration_lmax(const Matrix& m, double tol, int max_steps) {
    const auto n = m.rows();
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i);
    v.normalize();
    double lambda = 0.0;
    for (int step = 0; step < max_steps; ++step) {
        Vector w = m * v;
        const double norm = w.norm();
        if (norm < 1e-300) return 0.0; // zero matrix (or v in its null space only for m == 0)
        w /= norm;
        const double next = w.dot(m * w);
        if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) return next;
        lambda = next;
        v = w;
    }
    throw NumericalError("power iteration did not converge within " +
                         std::to_string(max_steps) + " steps");
}

double quad_value(const LossModel& model, const Vector& theta) {
    return 0.5 * theta.dot(model.quad * theta) - model.linear.dot(theta);
}

// global minimum of g(x) = 0.5 q x^2 - b x + c sin(w x) for q > 0.
// All stationary points satisfy |q x - b| <= c w, so we bracket sign changes
// of g' on that interval and polish by bisection.
double sine_1d_argmin(double q, double b, double c, double w) {
    if (c == 0.0 || w == 0.0) return b / q;
    const double half_width = c * w / q;
    const double lo = b / q - half_width - 1e-9;
    const double hi = b / q + half_width + 1e-9;
    auto dg = [&](double x) { return q * x - b + c * w * std::cos(w * x); };
    auto g = [&](double x) { return 0.5 * q * x * x - b * x + c * std::sin(w * x); };

    const int cells = std::max(64, static_cast<int>(std::ceil((hi - lo) * w * 16.0 / M_PI)));
    std::vector<double> candidates{lo, hi, b / q};
    double prev_x = lo, prev_d = dg(lo);
    for (int i = 1; i <= cells; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / cells;
        const double d = dg(x);
        if ((prev_d <= 0.0 && d >= 0.0) || (prev_d >= 0.0 && d <= 0.0)) {
            double a = prev_x, e = x, da = prev_d;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (a + e);
                const double dm = dg(mid);
                if ((da <= 0.0) == (dm <= 0.0)) {
                    a = mid;
                    da = dm;
                } else {
                    e = mid;
                }
            }
            candidates.push_back(0.5 * (a + e));
        }
        prev_x = x;
        prev_d = d;
    }
    double best = candidates.front();
    for (const double x : candidates)
        if (g(x) < g(best) || (g(x) == g(best) && x < best)) best = x;
    return best;
}

} // namespace

LossModel make_quadratic(Matrix q, Vector b) {
    if (q.rows() != q.cols() || q.rows() < 1) throw ConfigError("quadratic: Q must be square");
    if (b.size() != q.rows()) throw ConfigError("quadratic: b does not match Q");
    const double scale = std::max(1.0, q.norm());
    if ((q - q.transpose()).norm() > 1e-12 * scale)
        throw ConfigError("quadratic: Q must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(q, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale)
        throw ConfigError("quadratic: Q must be positive semi-definite");

    LossModel model;
    model.kind = LossKind::Quadratic;
    model.dim = static_cast<int>(q.rows());
    model.quad = std::move(q);
    model.linear = std::move(b);

    Vector minimizer = Vector::Zero(model.dim);
    if (model.linear.norm() > 0.0) {
        minimizer = model.quad.ldlt().solve(model.linear);
        if ((model.quad * minimizer - model.linear).norm() > 1e-8 * (1.0 + model.linear.norm()))
            throw ConfigError("quadratic: b outside range(Q), loss unbounded below");
    }
    model.minimizer = minimizer;
    model.shift = -quad_value(model, minimizer); // makes min loss exactly 0
    model.lipschitz = lipschitz_const(model);
    return model;
}

LossModel make_quadratic_spectrum(const Vector& eigenvalues) {
    return make_quadratic(Matrix(eigenvalues.asDiagonal()), Vector::Zero(eigenvalues.size()));
}

LossModel make_logistic(int samples, int dim, std::uint64_t seed) {
    if (samples < 1 || dim < 1) throw ConfigError("logistic: need samples >= 1 and dim >= 1");
    Rng rng(seed);
    LossModel model;
    model.kind = LossKind::Logistic;
    model.dim = dim;
    model.design.resize(samples, dim);
    for (int i = 0; i < samples; ++i)
        for (int j = 0; j < dim; ++j) model.design(i, j) = rng.normal();
    Vector planted(dim);
    rng.normal_fill(planted.data(), dim);
    planted *= 2.0 / std::sqrt(static_cast<double>(dim));
    model.labels.resize(samples);
    for (int i = 0; i < samples; ++i) {
        const double p = sigmoid(model.design.row(i).dot(planted));
        model.labels[i] = rng.uniform01() < p ? 1.0 : -1.0;
    }
    model.shift = 0.0; // log(1+exp(.)) is positive already
    model.lipschitz = lipschitz_const(model);
    return model;
}

LossModel make_nonconvex_sine(Vector qdiag, Vector b, double amp, double freq) {
    const auto p = qdiag.size();
    if (p < 1 || b.size() != p) throw ConfigError("sine: qdiag/b size mismatch");
    if (qdiag.minCoeff() <= 0.0) throw ConfigError("sine: quadratic part must be positive");
    if (amp < 0.0 || freq < 0.0) throw ConfigError("sine: amp and freq must be nonnegative");

    LossModel model;
    model.kind = LossKind::NonconvexSine;
    model.dim = static_cast<int>(p);
    model.quad = Matrix(qdiag.asDiagonal());
    model.linear = std::move(b);
    model.amp = amp;
    model.freq = freq;
    model.minimizer.resize(p);
    double min_value = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double x = sine_1d_argmin(qdiag[j], model.linear[j], amp, freq);
        model.minimizer[j] = x;
        min_value += 0.5 * qdiag[j] * x * x - model.linear[j] * x + amp * std::sin(freq * x);
    }
    model.shift = -min_value;
    model.lipschitz = lipschitz_const(model);
    return model;
}

double loss_eval(const LossModel& model, const Vector& theta) {
    check_dim(model, theta);
    switch (model.kind) {
    case LossKind::Quadratic:
        return quad_value(model, theta) + model.shift;
    case LossKind::Logistic: {
        const Vector margins = model.design * theta;
        double total = 0.0;
        for (Eigen::Index i = 0; i < margins.size(); ++i)
            total += log_one_exp(-model.labels[i] * margins[i]);
        return total / static_cast<double>(margins.size()) + model.shift;
    }
    case LossKind::NonconvexSine:
        return quad_value(model, theta) +
               model.amp * (theta.array() * model.freq).sin().sum() + model.shift;
    }
    throw ConfigError("unknown loss kind");
}

Vector grad_eval(const LossModel& model, const Vector& theta) {
    check_dim(model, theta);
    switch (model.kind) {
    case LossKind::Quadratic:
        return model.quad * theta - model.linear;
    case LossKind::Logistic: {
        const Vector margins = model.design * theta;
        Vector weights(margins.size());
        for (Eigen::Index i = 0; i < margins.size(); ++i)
            weights[i] = -model.labels[i] * sigmoid(-model.labels[i] * margins[i]);
        return model.design.transpose() * weights / static_cast<double>(margins.size());
    }
    case LossKind::NonconvexSine:
        return model.quad * theta - model.linear +
               model.amp * model.freq * (theta.array() * model.freq).cos().matrix();
    }
    throw ConfigError("unknown loss kind");
}

double lipschitz_const(const LossModel& model) {
    switch (model.kind) {
    case LossKind::Quadratic:
        return power_iteration_lmax(model.quad, 1e-10, 10000);
    case LossKind::Logistic: {
        const Matrix gram = model.design.transpose() * model.design;
        return 0.25 * power_iteration_lmax(gram, 1e-10, 10000) /
               static_cast<double>(model.design.rows());
    }
    case LossKind::NonconvexSine:
        return power_iteration_lmax(model.quad, 1e-10, 10000) +
               model.amp * model.freq * model.freq;
    }
    throw ConfigError("unknown loss kind");
}

Vector finite_diff_grad(const LossModel& model, const Vector& theta, double h) {
    check_dim(model, theta);
    if (h <= 0.0) throw ConfigError("finite_diff_grad: h must be positive");
    Vector grad(model.dim);
    Vector probe = theta;
    for (int j = 0; j < model.dim; ++j) {
        probe[j] = theta[j] + h;
        const double up = loss_eval(model, probe);
        probe[j] = theta[j] - h;
        const double down = loss_eval(model, probe);
        probe[j] = theta[j];
        grad[j] = (up - down) / (2.0 * h);
    }
    return grad;
}

NoiseSpec make_gaussian_noise(Vector sigmas) {
    if (sigmas.size() < 1 || sigmas.minCoeff() < 0.0)
        throw ConfigError("noise: sigmas must be nonnegative");
    NoiseSpec spec;
    spec.kind = NoiseKind::IsotropicGaussian;
    spec.sigma = std::move(sigmas);
    return spec;
}

NoiseSpec make_minibatch_noise(IndexVector batches, int dim, double sample_sigma,
                               int pool_size, std::uint64_t seed) {
    if (batches.size() < 1 || batches.minCoeff() < 1)
        throw ConfigError("noise: batch sizes must be >= 1");
    if (pool_size < 2 || dim < 1 || sample_sigma < 0.0)
        throw ConfigError("noise: bad minibatch pool parameters");
    NoiseSpec spec;
    spec.kind = NoiseKind::Minibatch;
    spec.batch = std::move(batches);
    Rng rng(seed);
    spec.pool.resize(dim, pool_size);
    for (int s = 0; s < pool_size; ++s)
        rng.normal_fill(spec.pool.col(s).data(), dim);
    spec.pool *= sample_sigma / std::sqrt(static_cast<double>(dim));
    spec.pool.colwise() -= Vector(spec.pool.rowwise().mean()); // exactly zero-mean pool
    // exact per-node variance of the averaged draw: pool second moment / b_i
    const double pool_sq = spec.pool.squaredNorm() / static_cast<double>(pool_size);
    spec.sigma.resize(spec.batch.size());
    for (Eigen::Index i = 0; i < spec.batch.size(); ++i)
        spec.sigma[i] = std::sqrt(pool_sq / static_cast<double>(spec.batch[i]));
    return spec;
}

Vector noisy_grad(const LossModel& model, const NoiseSpec& noise, int node,
                  const Vector& theta, Rng& rng) {
    if (node < 0 || node >= noise.nodes())
        throw ConfigError("noisy_grad: node index out of range");
    Vector grad = grad_eval(model, theta);
    if (noise.kind == NoiseKind::IsotropicGaussian) {
        const double sigma = noise.sigma[node];
        if (sigma > 0.0) {
            Vector eps(model.dim);
            rng.normal_fill(eps.data(), model.dim);
            grad += (sigma / std::sqrt(static_cast<double>(model.dim))) * eps;
        }
        return grad;
    }
    if (noise.pool.rows() != model.dim)
        throw ConfigError("noisy_grad: minibatch pool dimension mismatch");
    const int b = noise.batch[node];
    Vector eps = Vector::Zero(model.dim);
    for (int s = 0; s < b; ++s)
        eps += noise.pool.col(static_cast<Eigen::Index>(
            rng.uniform_below(static_cast<std::uint64_t>(noise.pool.cols()))));
    grad += eps / static_cast<double>(b);
    return grad;
}

double estimate_noise_sq(const LossModel& model, const NoiseSpec& noise, int node,
                         const Vector& theta, Rng& rng, int draws) {
    const Vector truth = grad_eval(model, theta);
    double total = 0.0;
    for (int s = 0; s < draws; ++s)
        total += (noisy_grad(model, noise, node, theta, rng) - truth).squaredNorm();
    return total / static_cast<double>(draws);
}

} // namespace nrlearn
