#pragma once

#include <cstdint>
#include <random>

#include "solrcmf/admm.hpp"
#include "solrcmf/datamodel.hpp"

// Starting states for the solver: random orthonormal initialization, a
// structured initialization for fully observed multiview layouts, and
// best-of-restarts selection via short unpenalized runs.

namespace solrcmf {

enum class InitStrategy { Random, Multiview };

struct InitConfig {
    Index k = 0;
    int n_init = 5;
    std::uint64_t seed = 0;
    InitStrategy strategy = InitStrategy::Random;
};

/// First k columns of Q from the QR factorization of a standard-normal
/// draw, with column signs fixed by the diagonal of R so that the result is
/// Haar-distributed on the Stiefel manifold.
Matrix haar_orthonormal(Index p, Index k, std::mt19937_64& rng);

/// Random feasible state: orthonormal factors from QR of Gaussian draws,
/// sparse factors equal to the factors, zero slack, scales uniform on
/// (-1, 1), signals equal to the reconstructions and zero multipliers. Both
/// constraints hold exactly at the initial point.
SolverState random_init(const DataCollection& data, Index k,
                        std::uint64_t seed);

/// Structured initialization for layouts where every matrix shares
/// `common_view` as its column view (or, symmetrically, its row view) and
/// the remaining views are distinct: the matrices are concatenated along
/// the shared view, an SVD of the concatenation initializes the shared
/// factor block, and the per-matrix sections of the left singular vectors
/// are re-orthonormalized to initialize the other views. Requires fully
/// observed matrices.
SolverState multiview_init(const DataCollection& data, Index k,
                           ViewId common_view);

struct BestInit {
    SolverState initial;   // the selected random starting state
    SolverState warm;      // the state the unpenalized run converged to
    Real objective = 0.0;  // final Lagrangian of the selected run
    int restart_index = 0;
};

/// Runs an unpenalized fit with a loose relative tolerance from each of
/// cfg.n_init random states and keeps the starting state whose run reached
/// the smallest augmented Lagrangian (ties broken by restart index). The
/// converged state is retained for warm starting.
BestInit best_of_restarts(const DataCollection& data, const InitConfig& cfg,
                          const Hyperparams& h);

}  // namespace solrcmf
