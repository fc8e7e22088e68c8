#include <doctest.h>

#include <cmath>

#include "nrlearn/errors.hpp"
#include "nrlearn/schemes.hpp"

using namespace nrlearn;

namespace {

Matrix two_node_state() {
    Matrix thetas(2, 2);
    thetas.col(0) << 1.0, 0.0;
    thetas.col(1) << 0.0, 0.0;
    return thetas;
}

Graph random_graph(Rng& rng, int n) {
    const int pick = static_cast<int>(rng.uniform_below(3));
    if (pick == 0) return build_complete(n);
    if (pick == 1) return build_ring_lattice(n, 2);
    return build_watts_strogatz(n, 4, 0.3, rng);
}

Matrix random_state(Rng& rng, int p, int n, double scale = 2.0) {
    Matrix thetas(p, n);
    rng.normal_fill(thetas.data(), static_cast<long>(p) * n);
    return scale * thetas;
}

} // namespace

TEST_CASE("consensus potential: direct values and homogeneity") {
    const Graph g = build_complete(2);
    Matrix equal(3, 2);
    equal.colwise() = Vector::Constant(3, 1.7);
    CHECK(consensus_potential(equal, g) == 0.0);

    CHECK(consensus_potential(two_node_state(), g) == doctest::Approx(0.5));

    Rng rng(12);
    const Graph ws = build_watts_strogatz(8, 4, 0.5, rng);
    const Matrix state = random_state(rng, 3, 8);
    const double base = consensus_potential(state, ws);
    CHECK(consensus_potential(Matrix(3.0 * state), ws) == doctest::Approx(9.0 * base));
    CHECK(base >= 0.0);
}

TEST_CASE("consensus gradient: direct values and zero-sum identity") {
    const Graph g = build_complete(2);
    Matrix equal(3, 2);
    equal.colwise() = Vector::Constant(3, -0.4);
    CHECK(consensus_grad(equal, g, 0).norm() == 0.0);

    const Vector grad0 = consensus_grad(two_node_state(), g, 0);
    CHECK(grad0[0] == doctest::Approx(1.0));
    CHECK(grad0[1] == doctest::Approx(0.0));

    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const Graph graph = random_graph(rng, 7);
        const Matrix state = random_state(rng, 4, 7);
        Vector total = Vector::Zero(4);
        double max_norm = 0.0;
        for (int i = 0; i < 7; ++i) {
            total += consensus_grad(state, graph, i);
            max_norm = std::max(max_norm, state.col(i).norm());
        }
        CHECK(total.norm() <= 1e-10 * 7.0 * std::max(1.0, max_norm));
    }
}

TEST_CASE("nr_step hand-computed example") {
    // 1-d quadratic grad at theta0: 1; two nodes fully connected
    const Graph g = build_complete(2);
    NRState state;
    state.thetas.resize(1, 2);
    state.thetas << 1.0, 0.0;
    const HyperParams hp{0.1, 10.0};
    Vector gradient(1);
    gradient << 1.0; // exact gradient of 0.5 theta^2 at theta = 1
    const NRState next = nr_step(state, g, hp, 0, gradient);
    CHECK(next.thetas(0, 0) == doctest::Approx(-0.1));
    CHECK(next.thetas(0, 1) == 0.0);
    CHECK(next.k == 1);
}

TEST_CASE("nr_step with a = 0 is a local sgd step; inactive nodes bit-identical") {
    Rng rng(9);
    const Graph g = build_ring_lattice(6, 2);
    NRState state;
    state.thetas = random_state(rng, 3, 6);
    const Matrix before = state.thetas;
    Vector gradient(3);
    rng.normal_fill(gradient.data(), 3);
    const NRState next = nr_step(state, g, {0.05, 0.0}, 2, gradient);
    CHECK(next.thetas.col(2).isApprox(before.col(2) - 0.05 * gradient));
    for (int i = 0; i < 6; ++i) {
        if (i == 2) continue;
        for (int r = 0; r < 3; ++r) CHECK(next.thetas(r, i) == before(r, i));
    }
}

TEST_CASE("at consensus the regularizer vanishes: pure gradient step") {
    const Graph g = build_complete(4);
    NRState state;
    state.thetas = Matrix::Zero(2, 4);
    state.thetas.colwise() = Vector::Constant(2, 3.0);
    Vector gradient(2);
    gradient << 1.0, -2.0;
    const NRState next = nr_step(state, g, {0.1, 25.0}, 1, gradient);
    CHECK(next.thetas.col(1).isApprox(Vector::Constant(2, 3.0) - 0.1 * gradient));
}

TEST_CASE("w-form equals the direct form on 100 randomized cases") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 6 + static_cast<int>(rng.uniform_below(5));
        const Graph g = random_graph(rng, n);
        NRState state;
        state.thetas = random_state(rng, 5, n, 3.0);
        const HyperParams hp{0.001 + 0.1 * rng.uniform01(), 20.0 * rng.uniform01()};
        const int active = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n)));
        Vector gradient(5);
        rng.normal_fill(gradient.data(), 5);
        const NRState direct = nr_step(state, g, hp, active, gradient);
        const NRState mixed = nr_step_w_form(state, g, hp, active, gradient);
        CHECK((direct.thetas - mixed.thetas).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("fl_step basics") {
    FLState state;
    state.theta = Vector::Constant(1, 2.0);
    Vector gradient(1);
    gradient << 2.0; // gradient of 0.5 theta^2 at 2
    const FLState next = fl_step(state, {0.5, 0.0}, 0, gradient);
    CHECK(next.theta[0] == doctest::Approx(1.0));
    CHECK(next.k == 1);

    const FLState frozen = fl_step(state, {0.0, 0.0}, 0, gradient);
    CHECK(frozen.theta == state.theta);

    const FLState stationary = fl_step(state, {0.5, 0.0}, 0, Vector::Zero(1));
    CHECK(stationary.theta == state.theta);
}

TEST_CASE("non-finite updates raise divergence errors carrying the tick") {
    const Graph g = build_complete(2);
    NRState state;
    state.thetas = Matrix::Zero(1, 2);
    state.k = 41;
    Vector huge(1);
    huge << 1e308;
    CHECK_THROWS_AS(nr_step(state, g, {1e10, 0.0}, 0, huge), DivergenceError);
    try {
        (void)nr_step(state, g, {1e10, 0.0}, 0, huge);
    } catch (const DivergenceError& err) {
        CHECK(err.tick() == 42);
    }
}

TEST_CASE("consensus fixed point: both schemes are fixed at a stationary consensus") {
    const auto model = make_quadratic_spectrum(Vector::LinSpaced(3, 0.5, 1.0));
    const auto noise = make_gaussian_noise(Vector::Zero(4));
    const Graph g = build_complete(4);
    const auto rates = make_rates(Vector::Ones(4));
    const auto trace = sample_trace(rates, 50, 8);

    Matrix init(3, 4);
    init.colwise() = model.minimizer;
    const NRRun nr = run_nr(model, noise, g, {0.1, 5.0}, init, trace, 99);
    CHECK(nr.state.thetas == init);

    const FLRun fl = run_fl(model, noise, {0.1, 0.0}, model.minimizer, trace, 99);
    CHECK(fl.state.theta == model.minimizer);
}

TEST_CASE("pure-regularization sweep never increases the consensus potential") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_below(5));
        const Graph g = random_graph(rng, n);
        const double d_bar = static_cast<double>(max_degree(g));
        HyperParams hp{0.0, 0.0};
        hp.a = 0.2 + 2.0 * rng.uniform01();
        hp.gamma = 0.9 / (hp.a * d_bar); // gamma * a * d_bar < 1
        NRState state;
        state.thetas = random_state(rng, 3, n);
        double potential = consensus_potential(state.thetas, g);
        for (int i = 0; i < n; ++i) {
            state = nr_step(state, g, hp, i, Vector::Zero(3));
            const double next = consensus_potential(state.thetas, g);
            CHECK(next <= potential * (1.0 + 1e-12) + 1e-15);
            potential = next;
        }
    }
}

TEST_CASE("empty trace returns the initial state unchanged") {
    const auto model = make_quadratic_spectrum(Vector::Ones(2));
    const auto noise = make_gaussian_noise(Vector::Ones(3));
    const Graph g = build_complete(3);
    EventTrace empty;
    empty.seed = 1;
    const Matrix init = Matrix::Ones(2, 3);
    const NRRun run = run_nr(model, noise, g, {0.1, 1.0}, init, empty, 5);
    CHECK(run.state.thetas == init);
    CHECK(run.metrics.total_ticks == 0);
    CHECK(run.metrics.rows.empty());
}

TEST_CASE("deterministic contraction: noiseless nr drives the ensemble gradient to zero") {
    const auto model = make_quadratic_spectrum(Vector::LinSpaced(4, 0.5, 1.0));
    const auto noise = make_gaussian_noise(Vector::Zero(3));
    const Graph g = build_complete(3);
    const auto rates = make_rates(Vector::Ones(3));
    const auto trace = sample_trace(rates, 10000, 123);
    Rng rng(7);
    Matrix init(4, 3);
    rng.normal_fill(init.data(), 12);
    const NRRun run = run_nr(model, noise, g, {0.05, 2.0}, init, trace, 11);
    CHECK_FALSE(run.diverged);
    const Vector mean = run.state.ensemble_average();
    CHECK(grad_eval(model, mean).norm() < 1e-6);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
    const auto model = make_quadratic_spectrum(Vector::LinSpaced(3, 0.2, 1.0));
    const auto noise = make_gaussian_noise(Vector::Ones(4));
    const Graph g = build_ring_lattice(4, 2);
    const auto rates = make_rates(Vector::Ones(4));
    const auto trace = sample_trace(rates, 500, 21);
    const Matrix init = Matrix::Zero(3, 4);
    const NRRun a = run_nr(model, noise, g, {0.02, 3.0}, init, trace, 77);
    const NRRun b = run_nr(model, noise, g, {0.02, 3.0}, init, trace, 77);
    CHECK(a.state.thetas == b.state.thetas);
    REQUIRE(a.metrics.rows.size() == b.metrics.rows.size());
    for (std::size_t i = 0; i < a.metrics.rows.size(); ++i)
        CHECK(a.metrics.rows[i].grad_norm_sq == b.metrics.rows[i].grad_norm_sq);
}

TEST_CASE("run_fl records divergence instead of throwing") {
    const auto model = make_quadratic_spectrum(Vector::Ones(2)); // L = 1
    const auto noise = make_gaussian_noise(Vector::Ones(2));
    const auto rates = make_rates(Vector::Ones(2));
    const auto trace = sample_trace(rates, 2000, 3);
    // gamma far above the 2/L stability threshold
    const FLRun run = run_fl(model, noise, {2.5, 0.0}, Vector::Ones(2), trace, 5);
    CHECK(run.diverged);
    CHECK(run.diverged_at > 0);
    CHECK(run.metrics.total_ticks <= trace.ticks());
}

TEST_CASE("thinning records every m-th tick plus the last") {
    const auto model = make_quadratic_spectrum(Vector::Ones(2));
    const auto noise = make_gaussian_noise(Vector::Ones(3));
    const Graph g = build_complete(3);
    const auto rates = make_rates(Vector::Ones(3));
    const auto trace = sample_trace(rates, 103, 2);
    RunOptions options;
    options.thin = 10;
    const NRRun run = run_nr(model, noise, g, {0.01, 1.0}, Matrix::Zero(2, 3), trace, 3, options);
    REQUIRE(run.metrics.rows.size() == 11); // k = 10,20,...,100 and the final k = 103
    CHECK(run.metrics.rows.front().k == 10);
    CHECK(run.metrics.rows.back().k == 103);
    // running averages stay exact despite thinning
    CHECK(run.metrics.total_ticks == 103);
}
