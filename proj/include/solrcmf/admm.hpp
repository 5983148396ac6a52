#pragma once

#include <string>
#include <vector>

#include "solrcmf/datamodel.hpp"
#include "solrcmf/types.hpp"

// Multi-block ADMM engine. The optimization variables are split into a
// sequentially updated group (orthonormal factors, factor scales, sparse
// unit-column factors) and a simultaneously updated group (factor slack and
// signal estimates), followed by the scaled multiplier update. Every block
// subproblem has a closed-form solution; one sweep over all blocks is one
// iteration, and the run terminates when the decrease of the augmented
// Lagrangian falls below the absolute or relative tolerance.

namespace solrcmf {

struct Hyperparams {
    Real lambda1 = 0.0;  // penalty on factor scales (singular values)
    Real lambda2 = 0.0;  // penalty on sparse factor entries
    Real mu = 1.0;       // slack magnitude penalty
    Real rho = 0.0;      // step size; <= 0 selects 1.01 * rho_lower_bound
    Real alpha = 1e-3;   // proximal weight on manifold blocks

    // Penalty weight vectors; empty selects the defaults (all ones for
    // scale and slack weights, 1/sqrt(p_l) for factor weights).
    std::vector<Vector> scale_weights;  // per key, length k
    Vector factor_weights;              // per view
    Vector slack_weights;               // per view, positive

    Real eps_abs = 1e-10;
    Real eps_rel = 1e-8;
    int max_iter = 10000;
};

/// Step sizes above this bound guarantee global convergence to a local
/// minimum. Evaluates
///   max(2, 2 mu (max w2)^2 / min w2,
///       (1 + mu max w2) / 2 * (1 + 2 max w2 / min w2)^2).
Real rho_lower_bound(Real mu, const Vector& slack_weights);

/// Fills default weights, resolves an automatic step size and validates an
/// explicit one against the admissibility bound.
Hyperparams resolve_hyperparams(Hyperparams h, const DataCollection& data,
                                Index k);

struct SolverState {
    Index k = 0;
    std::vector<Matrix> factors;         // per view, orthonormal columns
    std::vector<Vector> scales;          // per key, model singular values
    std::vector<Matrix> sparse_factors;  // per view, unit-norm columns
    std::vector<Matrix> slack;           // per view
    std::vector<Matrix> signals;         // per key, signal estimates
    std::vector<Matrix> dual_split;      // per view, scaled multipliers
    std::vector<Matrix> dual_signal;     // per key, scaled multipliers
};

/// Fixed zero pattern imposed during constrained refits: inactive scale
/// entries and sparse-factor entries bypass their prox and are pinned to 0.
struct SupportClamp {
    std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> scale_active;  // per key
    std::vector<Mask> factor_active;                                  // per view
};

struct FitResult {
    SolverState state;
    std::vector<Real> lagrangian_trace;
    std::vector<Real> split_residuals;   // ||U - V - V'||_F per view
    std::vector<Real> signal_residuals;  // ||Z - V D V^T||_F per key
    int iterations = 0;
    bool converged = false;
    Real objective = 0.0;  // penalized objective at the solution
    std::vector<std::string> warnings;
};

// Block updates. All functions expect resolved hyperparameters (see
// resolve_hyperparams) and 0-based view/key indices following the
// collection's order. The sequential factor update reads the latest values
// of the other views' factors, so sweeps must apply it in ascending view
// order to reproduce the solver.

/// Stiefel-projected update of one view's orthonormal factor block.
Matrix updated_factor(const SolverState& state, const DataCollection& data,
                      const Hyperparams& h, Index view);

/// Soft-thresholded update of one matrix's factor scales.
Vector updated_scales(const SolverState& state, const DataCollection& data,
                      const Hyperparams& h, Index key,
                      const SupportClamp* clamp = nullptr);

/// Oblique-prox update of one view's sparse factor block. Appends a note to
/// `warnings` when the effective column threshold is in the degenerate
/// regime (lambda2 too large).
Matrix updated_sparse_factor(const SolverState& state, const Hyperparams& h,
                             Index view, const SupportClamp* clamp = nullptr,
                             std::vector<std::string>* warnings = nullptr);

/// Simultaneous update of all slack blocks and signal estimates. When
/// `models` is given it receives the reconstructions V_i D V_j^T per key.
void update_delta(SolverState& state, const DataCollection& data,
                  const Hyperparams& h, std::vector<Matrix>* models = nullptr);

/// Scaled multiplier update; `models` may pass the reconstructions computed
/// by update_delta to avoid recomputing them.
void update_multipliers(SolverState& state, const DataCollection& data,
                        const std::vector<Matrix>* models = nullptr);

/// Value of the augmented Lagrangian at the given state.
Real augmented_lagrangian(const SolverState& state, const DataCollection& data,
                          const Hyperparams& h,
                          const std::vector<Matrix>* models = nullptr);

/// Penalized objective (loss at the factorized model plus both penalties).
Real objective_value(const SolverState& state, const DataCollection& data,
                     const Hyperparams& h,
                     const std::vector<Matrix>* models = nullptr);

/// Runs the solver from `init` until the Lagrangian decrease test triggers
/// or `max_iter` sweeps are exhausted.
FitResult fit(const DataCollection& data, const Hyperparams& h,
              const SolverState& init, const SupportClamp* clamp = nullptr);

}  // namespace solrcmf
