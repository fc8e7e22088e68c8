#pragma once

#include <cstdint>

#include "nrlearn/rng.hpp"
#include "nrlearn/types.hpp"

namespace nrlearn {

enum class LossKind { Quadratic, Logistic, NonconvexSine };

// A differentiable objective with analytically known gradient, a computable
// global Lipschitz constant, and a nonnegativity shift so that min loss == 0.
struct LossModel {
    LossKind kind = LossKind::Quadratic;
    int dim = 0;

    // quadratic part (also the backbone of the sine model, diagonal there)
    Matrix quad;   // p x p symmetric PSD
    Vector linear; // b in 0.5 th'Q th - b'th
    double shift = 0.0;

    // logistic
    Matrix design; // n x p
    Vector labels; // +-1

    // sine perturbation
    double amp = 0.0;
    double freq = 0.0;

    Vector minimizer; // known global minimizer; empty for logistic
    double lipschitz = 0.0;
};

LossModel make_quadratic(Matrix q, Vector b);
// diagonal Q with the given eigenvalues, b = 0
LossModel make_quadratic_spectrum(const Vector& eigenvalues);
// synthetic separable data: gaussian design, labels sampled from a planted model
LossModel make_logistic(int samples, int dim, std::uint64_t seed);
// 0.5 q_j x_j^2 - b_j x_j + amp * sin(freq * x_j), summed over coordinates
LossModel make_nonconvex_sine(Vector qdiag, Vector b, double amp, double freq);

double loss_eval(const LossModel& model, const Vector& theta);
Vector grad_eval(const LossModel& model, const Vector& theta);

// Global Lipschitz constant of the gradient: largest eigenvalue of Q by power
// iteration (tol 1e-10) for the quadratic, 0.25*||X'X||_2/n for the logistic,
// quadratic constant plus amp*freq^2 for the sine model.
double lipschitz_const(const LossModel& model);

Vector finite_diff_grad(const LossModel& model, const Vector& theta, double h);
inline double default_fd_step(const Vector& theta) { return 1e-6 * (1.0 + theta.norm()); }

enum class NoiseKind { IsotropicGaussian, Minibatch };

// Per-node gradient-noise sources. Both kinds are zero mean and independent
// across nodes and ticks, so every node sees the same expected gradient.
//   gaussian:  eps has iid components with variance sigma_i^2/p, E||eps||^2 = sigma_i^2
//   minibatch: node i averages batch_i draws from a shared pool of zero-mean
//              per-sample gradient residuals; E||eps||^2 = pool_var / batch_i
struct NoiseSpec {
    NoiseKind kind = NoiseKind::IsotropicGaussian;
    Vector sigma;      // per-node sigma_i (exact for both kinds)
    IndexVector batch; // minibatch sizes b_i
    Matrix pool;       // p x M centered residual pool (minibatch only)

    int nodes() const { return static_cast<int>(sigma.size()); }
    double sigma_sq_total() const { return sigma.squaredNorm(); } // sigma^2 = sum sigma_i^2
};

NoiseSpec make_gaussian_noise(Vector sigmas);
NoiseSpec make_minibatch_noise(IndexVector batches, int dim, double sample_sigma,
                               int pool_size, std::uint64_t seed);

Vector noisy_grad(const LossModel& model, const NoiseSpec& noise, int node,
                  const Vector& theta, Rng& rng);

// empirical E||eps||^2 at a fixed theta; the measured counterpart of sigma_i^2
double estimate_noise_sq(const LossModel& model, const NoiseSpec& noise, int node,
                         const Vector& theta, Rng& rng, int draws);

} // namespace nrlearn
