#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "solrcmf/admm.hpp"
#include "solrcmf/datamodel.hpp"
#include "solrcmf/init.hpp"

// Two-step hyperparameter selection: penalized fits over sampled
// (lambda1, lambda2) pairs record zero patterns; unique patterns are scored
// with Wold-type K-fold cross-validation under unpenalized, support-clamped
// refits; the one-standard-error rule picks the sparsest pattern within one
// standard error of the best score; a final clamped refit on all data
// removes the shrinkage of the penalized stage.

namespace solrcmf {

struct StructurePattern {
    // True marks an active entry. scale_support follows the collection's
    // key order; factor_support is per view.
    std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> scale_support;
    std::vector<Mask> factor_support;
    Real lambda1 = 0.0;  // pair that produced the pattern
    Real lambda2 = 0.0;

    bool same_supports(const StructurePattern& other) const;
    int sparsity_score() const;  // count of inactive entries
    SupportClamp clamp() const;
};

struct CVRecord {
    StructurePattern pattern;
    std::vector<Real> fold_mses;
    Real mean_mse = 0.0;
    Real se = 0.0;  // standard error of the fold MSEs
    int sparsity_score = 0;
};

/// n pairs with both coordinates independently log-uniform on [lo, hi].
std::vector<std::pair<Real, Real>> sample_hyperparams(int n, Real lo, Real hi,
                                                      std::uint64_t seed);

/// Reads the zero pattern of a fitted state: an entry is active when its
/// magnitude exceeds `tol` (soft-thresholding produces exact zeros, so the
/// default tolerance only guards against numerical dust). A factor column
/// that is entirely inactive in a view deactivates that factor's scale in
/// every matrix touching the view.
StructurePattern extract_structure(const FitResult& fit,
                                   const DataCollection& data,
                                   Real tol = 1e-9);

/// Restores consistency between factor supports and scale supports.
void apply_consistency_closure(StructurePattern& pattern,
                               const DataCollection& data);

/// Copy of the collection with the given fold's entries marked missing;
/// the training mask the cross-validation fits see.
DataCollection masked_for_fold(const DataCollection& data,
                               const FoldAssignment& folds, int fold);

/// Scores a fixed pattern: for every fold, its entries are treated as
/// missing, an unpenalized support-clamped fit is run from `init`, and the
/// held-out entries are predicted by the reconstruction. MSEs are pooled
/// over matrices and aggregated across folds.
CVRecord cv_score(const DataCollection& data, const StructurePattern& pattern,
                  const FoldAssignment& folds, const SolverState& init,
                  const Hyperparams& h);

/// One-standard-error rule: among records whose mean MSE is within one
/// standard error of the best, returns the one with the most sparsity.
/// Ties prefer larger lambda1, then larger lambda2, then input order.
const CVRecord& select_one_se(const std::vector<CVRecord>& records);

/// Unpenalized fit on all observed data with the pattern's supports
/// clamped; the final, unshrunk estimate.
FitResult refit_fixed_pattern(const DataCollection& data,
                              const StructurePattern& pattern,
                              const SolverState& init, const Hyperparams& h);

struct SelectionResult {
    StructurePattern pattern;
    FitResult refit;
    std::vector<CVRecord> records;
    std::vector<StructurePattern> grid_patterns;  // one per grid pair
};

/// The full two-step procedure over a hyperparameter grid.
SelectionResult select_model(const DataCollection& data,
                             const std::vector<std::pair<Real, Real>>& grid,
                             const FoldAssignment& folds,
                             const SolverState& init, const Hyperparams& h);

}  // namespace solrcmf
