#pragma once

#include <cstdint>
#include <iosfwd>

#include "nrlearn/rng.hpp"
#include "nrlearn/types.hpp"

namespace nrlearn {

// Undirected simple graph over nodes 0..n-1, dense 0/1 adjacency.
struct Graph {
    int n = 0;
    Matrix adj; // symmetric, zero diagonal

    int degree(int i) const { return static_cast<int>(adj.col(i).sum()); }
};

Graph build_complete(int n);
// node i adjacent to i +- 1 .. i +- k/2 (mod n); k even, n > k >= 2
Graph build_ring_lattice(int n, int k);
// standard Watts-Strogatz rewiring of the ring lattice; regenerated until
// connected (at most 100 attempts)
Graph build_watts_strogatz(int n, int k, double beta, Rng& rng);

bool is_connected(const Graph& g);
int max_degree(const Graph& g);
Matrix laplacian(const Graph& g); // l_ii = deg(i), l_ij = -a_ij

struct SpectralSummary {
    Matrix laplacian;
    Vector eigenvalues; // ascending
    double lambda2 = 0.0;
    int max_degree = 0;
};

// Full symmetric eigendecomposition of the Laplacian via cyclic Jacobi.
SpectralSummary spectral(const Graph& g);

// Eigenvalues of a symmetric matrix, ascending. Cyclic Jacobi sweeps until the
// off-diagonal Frobenius norm falls below tol (relative to ||m||_F).
Vector jacobi_eigenvalues(Matrix m, double tol = 1e-12, int max_sweeps = 100);

// one "i j" pair per line, i < j
void write_edge_list(const Graph& g, std::ostream& out);

} // namespace nrlearn
