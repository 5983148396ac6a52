#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "solrcmf/datamodel.hpp"

// Synthetic ground truth: dense and sparse orthonormal factors, signals
// from per-key singular-value vectors, and Gaussian noise calibrated to a
// target signal-to-noise ratio ||Z||_F^2 / E||E||_F^2.

namespace solrcmf {

struct Scenario {
    std::vector<Index> view_dims;
    std::vector<MatrixKey> keys;
    std::vector<Vector> scales_truth;  // per key, length k
    Real sparsity = 0.0;               // fraction of zeros per factor column
    Real snr = 0.5;
    std::uint64_t seed = 0;

    Index k() const { return scales_truth.empty() ? 0 : scales_truth.front().size(); }
};

struct GroundTruth {
    std::vector<Matrix> factors;  // per view, orthonormal
    DataCollection data;
    std::vector<Matrix> signals;  // per key
    std::vector<Real> sigma2;     // per key noise variance
};

/// Uniform random draw from the Stiefel manifold (QR of a Gaussian matrix).
Matrix simulate_dense_orthogonal(Index p, Index k, std::uint64_t seed);
Matrix simulate_dense_orthogonal(Index p, Index k, std::mt19937_64& rng);

/// Sparse orthonormal factors: a Gaussian draw is truncated per column to
/// its ceil((1 - sparsity) * p) largest-magnitude entries (ties keep the
/// lower index) and orthogonalized with a zero-preserving Gram-Schmidt
/// sweep, iterated to a fixed point so the result is orthonormal to full
/// precision with the truncated zero pattern intact.
Matrix simulate_sparse_orthogonal(Index p, Index k, Real sparsity,
                                  std::uint64_t seed);
Matrix simulate_sparse_orthogonal(Index p, Index k, Real sparsity,
                                  std::mt19937_64& rng);

/// Simulates factors for every view, forms the signals and adds Gaussian
/// noise with per-key variance ||Z||_F^2 / (snr * p_i * p_j).
GroundTruth build_scenario(const Scenario& sc);

/// The two built-in scenarios used in the simulation studies. Passing a
/// different seed (and, for the second scenario, sparsity level) varies the
/// replication.
Scenario scenario_sim1(std::uint64_t seed);
Scenario scenario_sim2(std::uint64_t seed, Real sparsity = 0.0,
                       bool half_dims = false);

/// Looks up a built-in scenario by name ("sim1" or "sim2").
Scenario builtin_scenario(const std::string& name, std::uint64_t seed);

}  // namespace solrcmf
