#include <doctest.h>

#include <cmath>

#include "nrlearn/errors.hpp"
#include "nrlearn/problems.hpp"

using namespace nrlearn;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

LossModel every_kind(int which, int dim) {
    switch (which) {
    case 0: {
        Vector spectrum = Vector::LinSpaced(dim, 0.3, 2.0);
        return make_quadratic_spectrum(spectrum);
    }
    case 1:
        return make_logistic(80, dim, 17);
    default:
        return make_nonconvex_sine(Vector::Constant(dim, 1.5), Vector::Constant(dim, 0.2), 0.5,
                                   2.0);
    }
}

} // namespace

TEST_CASE("quadratic loss values") {
    const auto model = make_quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
    CHECK(loss_eval(model, vec2(0, 0)) == doctest::Approx(0.0));
    CHECK(loss_eval(model, vec2(3, 4)) == doctest::Approx(12.5));
    CHECK(grad_eval(model, vec2(3, 4)).isApprox(vec2(3, 4)));
}

TEST_CASE("quadratic with linear term is shifted to zero minimum") {
    Matrix q(2, 2);
    q << 2.0, 0.5, 0.5, 1.0;
    const auto model = make_quadratic(q, vec2(1.0, -0.5));
    CHECK(loss_eval(model, model.minimizer) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(grad_eval(model, model.minimizer).norm() < 1e-10);
    CHECK(loss_eval(model, vec2(5, 5)) > 0.0);
}

TEST_CASE("sine model: zero loss and zero gradient at its global minimizer") {
    const auto model = make_nonconvex_sine(Vector::Constant(3, 1.0), Vector::Zero(3), 0.5, 2.0);
    CHECK(loss_eval(model, model.minimizer) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(grad_eval(model, model.minimizer).norm() < 1e-9);
    CHECK(loss_eval(model, Vector::Constant(3, 2.0)) > 0.0);
}

TEST_CASE("dimension mismatch is a configuration error") {
    const auto model = make_quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
    CHECK_THROWS_AS(loss_eval(model, Vector::Zero(3)), ConfigError);
    CHECK_THROWS_AS(grad_eval(model, Vector::Zero(3)), ConfigError);
}

TEST_CASE("quadratic rejects asymmetric and indefinite matrices") {
    Matrix bad(2, 2);
    bad << 1.0, 0.2, 0.0, 1.0;
    CHECK_THROWS_AS(make_quadratic(bad, Vector::Zero(2)), ConfigError);
    Matrix indefinite(2, 2);
    indefinite << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(make_quadratic(indefinite, Vector::Zero(2)), ConfigError);
}

TEST_CASE("lipschitz constants") {
    Vector d(2);
    d << 1.0, 4.0;
    CHECK(lipschitz_const(make_quadratic_spectrum(d)) == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(lipschitz_const(make_quadratic(Matrix::Identity(3, 3), Vector::Zero(3))) ==
          doctest::Approx(1.0));
    // sine adds amp * freq^2
    const auto sine = make_nonconvex_sine(Vector::Constant(2, 2.0), Vector::Zero(2), 0.5, 3.0);
    CHECK(sine.lipschitz == doctest::Approx(2.0 + 0.5 * 9.0));
}

TEST_CASE("sampled two-point lipschitz check never exceeds the constant") {
    Rng rng(31);
    for (int which = 0; which < 3; ++which) {
        const auto model = every_kind(which, 5);
        const double L = model.lipschitz;
        for (int trial = 0; trial < 1000; ++trial) {
            Vector a(5), b(5);
            rng.normal_fill(a.data(), 5);
            rng.normal_fill(b.data(), 5);
            a *= 3.0;
            b *= 3.0;
            const double lhs = (grad_eval(model, a) - grad_eval(model, b)).norm();
            CHECK(lhs <= L * (a - b).norm() * (1.0 + 1e-9) + 1e-12);
        }
    }
}

TEST_CASE("finite differences: direct cases") {
    const auto model = make_quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
    const Vector fd = finite_diff_grad(model, vec2(1, 1), 1e-6);
    CHECK((fd - vec2(1, 1)).norm() < 1e-8);

    const auto zero_model = make_quadratic(Matrix::Zero(2, 2), Vector::Zero(2));
    CHECK(finite_diff_grad(zero_model, vec2(0.3, -0.7), 1e-6).norm() == doctest::Approx(0.0));
    CHECK_THROWS_AS(finite_diff_grad(model, vec2(0, 0), 0.0), ConfigError);
}

TEST_CASE("gradient consistency across kinds: 100 random points each") {
    Rng rng(77);
    for (int which = 0; which < 3; ++which) {
        const auto model = every_kind(which, 6);
        for (int trial = 0; trial < 100; ++trial) {
            Vector theta(6);
            rng.normal_fill(theta.data(), 6);
            theta *= 2.0;
            const Vector g = grad_eval(model, theta);
            const Vector fd = finite_diff_grad(model, theta, default_fd_step(theta));
            CHECK((g - fd).norm() / (1.0 + g.norm()) < 1e-5);
        }
    }
}

TEST_CASE("loss stays nonnegative at 1000 random points for every kind") {
    Rng rng(123);
    for (int which = 0; which < 3; ++which) {
        const auto model = every_kind(which, 4);
        for (int trial = 0; trial < 1000; ++trial) {
            Vector theta(4);
            rng.normal_fill(theta.data(), 4);
            theta *= 4.0;
            CHECK(loss_eval(model, theta) >= 0.0);
        }
    }
}

TEST_CASE("zero-noise noisy_grad equals grad_eval exactly") {
    const auto model = every_kind(0, 4);
    const auto noise = make_gaussian_noise(Vector::Zero(3));
    Rng rng(1);
    Vector theta(4);
    theta << 1, -2, 0.5, 4;
    CHECK(noisy_grad(model, noise, 1, theta, rng) == grad_eval(model, theta));
}

TEST_CASE("gaussian noise calibration: E||eps||^2 = sigma^2 within 3 percent") {
    const auto model = make_quadratic(Matrix::Identity(4, 4), Vector::Zero(4));
    const auto noise = make_gaussian_noise(Vector::Ones(2));
    Rng rng(8);
    const Vector theta = Vector::Constant(4, 0.5);
    const Vector truth = grad_eval(model, theta);
    const int draws = 100000;
    double sum_sq = 0.0;
    Vector sum = Vector::Zero(4);
    for (int s = 0; s < draws; ++s) {
        const Vector eps = noisy_grad(model, noise, 0, theta, rng) - truth;
        sum_sq += eps.squaredNorm();
        sum += eps;
    }
    CHECK(sum_sq / draws > 0.97);
    CHECK(sum_sq / draws < 1.03);
    // CLT bound on the mean: each component has stddev 1/sqrt(p)
    const double bound = 4.0 / (std::sqrt(4.0) * std::sqrt(static_cast<double>(draws)));
    for (int j = 0; j < 4; ++j) CHECK(std::abs(sum[j] / draws) < bound);
}

TEST_CASE("noise independence across nodes: cross moment near zero") {
    const auto model = make_quadratic(Matrix::Identity(4, 4), Vector::Zero(4));
    const auto noise = make_gaussian_noise(Vector::Ones(2));
    Rng rng(9);
    const Vector theta = Vector::Zero(4);
    const Vector truth = grad_eval(model, theta);
    const int draws = 100000;
    double cross = 0.0, cross_sq = 0.0;
    for (int s = 0; s < draws; ++s) {
        const Vector e0 = noisy_grad(model, noise, 0, theta, rng) - truth;
        const Vector e1 = noisy_grad(model, noise, 1, theta, rng) - truth;
        const double dot = e0.dot(e1);
        cross += dot;
        cross_sq += dot * dot;
    }
    const double m = cross / draws;
    const double se = std::sqrt((cross_sq / draws - m * m) / draws);
    CHECK(std::abs(m) < 4.0 * se);
}

TEST_CASE("minibatch noise variance scales as 1/batch and matches its sigma") {
    IndexVector batches(2);
    batches << 1, 64;
    const auto noise = make_minibatch_noise(batches, 5, 2.0, 512, 99);
    CHECK(noise.sigma[0] / noise.sigma[1] == doctest::Approx(8.0));

    const auto model = make_quadratic(Matrix::Identity(5, 5), Vector::Zero(5));
    Rng rng(4);
    const Vector theta = Vector::Zero(5);
    for (int node = 0; node < 2; ++node) {
        const double measured = estimate_noise_sq(model, noise, node, theta, rng, 40000);
        CHECK(measured == doctest::Approx(noise.sigma[node] * noise.sigma[node]).epsilon(0.05));
    }
}

TEST_CASE("noisy_grad consumes a deterministic number of draws") {
    const auto model = make_quadratic(Matrix::Identity(5, 5), Vector::Zero(5));
    const auto noise = make_gaussian_noise(Vector::Ones(1));
    Rng a(6), b(6);
    (void)noisy_grad(model, noise, 0, Vector::Zero(5), a);
    for (int i = 0; i < 6; ++i) b.next_u64(); // 5 normals -> 3 pairs -> 6 uniforms
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("logistic model basics") {
    const auto model = make_logistic(120, 6, 5);
    CHECK(model.lipschitz > 0.0);
    CHECK(loss_eval(model, Vector::Zero(6)) == doctest::Approx(std::log(2.0)));
}
