#include "nrlearn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "nrlearn/errors.hpp"

namespace nrlearn {

Graph build_complete(int n) {
    if (n < 2) throw ConfigError("complete graph needs n >= 2");
    Graph g;
    g.n = n;
    g.adj = Matrix::Ones(n, n);
    g.adj.diagonal().setZero();
    return g;
}

Graph build_ring_lattice(int n, int k) {
    if (k < 2 || k % 2 != 0) throw ConfigError("ring lattice needs even k >= 2");
    if (n <= k) throw ConfigError("ring lattice needs n > k");
    Graph g;
    g.n = n;
    g.adj = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 1; j <= k / 2; ++j) {
            const int right = (i + j) % n;
            g.adj(i, right) = 1.0;
            g.adj(right, i) = 1.0;
        }
    }
    return g;
}

Graph build_watts_strogatz(int n, int k, double beta, Rng& rng) {
    if (beta < 0.0 || beta > 1.0) throw ConfigError("watts_strogatz needs beta in [0,1]");
    for (int attempt = 0; attempt < 100; ++attempt) {
        Graph g = build_ring_lattice(n, k);
        // classic pass order: distance ring j = 1..k/2, then node i
        for (int j = 1; j <= k / 2; ++j) {
            for (int i = 0; i < n; ++i) {
                if (rng.uniform01() >= beta) continue;
                const int old_target = (i + j) % n;
                if (g.degree(i) >= n - 1) continue; // no free endpoint to rewire to
                int target;
                do {
                    target = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n)));
                } while (target == i || g.adj(i, target) == 1.0);
                g.adj(i, old_target) = 0.0;
                g.adj(old_target, i) = 0.0;
                g.adj(i, target) = 1.0;
                g.adj(target, i) = 1.0;
            }
        }
        if (is_connected(g)) return g;
    }
    throw NumericalError("watts_strogatz: no connected graph after 100 attempts");
}

bool is_connected(const Graph& g) {
    if (g.n <= 0) return false;
    std::vector<char> seen(static_cast<std::size_t>(g.n), 0);
    std::vector<int> queue{0};
    seen[0] = 1;
    int reached = 1;
    while (!queue.empty()) {
        const int u = queue.back();
        queue.pop_back();
        for (int v = 0; v < g.n; ++v) {
            if (g.adj(u, v) != 0.0 && !seen[v]) {
                seen[v] = 1;
                ++reached;
                queue.push_back(v);
            }
        }
    }
    return reached == g.n;
}

int max_degree(const Graph& g) {
    int best = 0;
    for (int i = 0; i < g.n; ++i) best = std::max(best, g.degree(i));
    return best;
}

Matrix laplacian(const Graph& g) {
    Matrix lap = -g.adj;
    lap.diagonal() = g.adj.colwise().sum();
    return lap;
}

namespace {

double off_diagonal_norm(const Matrix& m) {
    double total = 0.0;
    for (Eigen::Index p = 0; p < m.rows(); ++p)
        for (Eigen::Index q = 0; q < m.cols(); ++q)
            if (p != q) total += m(p, q) * m(p, q);
    return std::sqrt(total);
}

} // namespace

Vector jacobi_eigenvalues(Matrix m, double tol, int max_sweeps) {
    const auto n = m.rows();
    if (n != m.cols()) throw ConfigError("jacobi: matrix must be square");
    if (n == 1) return m.diagonal();
    const double scale = std::max(1.0, m.norm());
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_diagonal_norm(m) <= tol * scale) {
            // one extra sweep past the threshold lands near machine precision
            if (converged) break;
            converged = true;
        }
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double tau = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double mrp = m(r, p);
                    const double mrq = m(r, q);
                    m(r, p) = c * mrp - s * mrq;
                    m(r, q) = s * mrp + c * mrq;
                }
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double mpr = m(p, r);
                    const double mqr = m(q, r);
                    m(p, r) = c * mpr - s * mqr;
                    m(q, r) = s * mpr + c * mqr;
                }
            }
        }
    }
    if (!converged && off_diagonal_norm(m) > tol * scale)
        throw NumericalError("jacobi eigensolver did not converge within " +
                             std::to_string(max_sweeps) + " sweeps");
    Vector evals = m.diagonal();
    std::sort(evals.data(), evals.data() + n);
    return evals;
}

SpectralSummary spectral(const Graph& g) {
    SpectralSummary summary;
    summary.laplacian = laplacian(g);
    summary.eigenvalues = jacobi_eigenvalues(summary.laplacian);
    summary.lambda2 = summary.eigenvalues.size() > 1 ? summary.eigenvalues[1] : 0.0;
    summary.max_degree = max_degree(g);
    return summary;
}

void write_edge_list(const Graph& g, std::ostream& out) {
    for (int i = 0; i < g.n; ++i)
        for (int j = i + 1; j < g.n; ++j)
            if (g.adj(i, j) != 0.0) out << i << ' ' << j << '\n';
}

} // namespace nrlearn
