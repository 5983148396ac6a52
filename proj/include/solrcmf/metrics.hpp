#pragma once

#include <vector>

#include "solrcmf/admm.hpp"
#include "solrcmf/datamodel.hpp"

// Quantification of fitted models: proportion of variation, directed R^2
// between matrices sharing a view, noise and SNR estimates, rank summaries,
// factor matching against ground truth, sparsity confusion rates, structure
// graphs, and a reporting-time sign canonicalization.

namespace solrcmf {

/// ||Z_hat||_F^2 / ||X||_F^2, with the squared signal norm evaluated as the
/// sum of squared factor scales and the data norm over observed entries.
Real proportion_of_variation(const FitResult& fit, const DataCollection& data,
                             const MatrixKey& key);

/// Fraction of the dependent matrix's variation linearly predicted by the
/// predictor's signal through the factors active in both. The two matrices
/// must share a view (in either orientation).
Real directed_r2(const FitResult& fit, const DataCollection& data,
                 const MatrixKey& dep, const MatrixKey& pred);

struct NoiseEstimate {
    Real sigma2_hat = 0.0;
    Real snr_hat = 0.0;
};
NoiseEstimate estimate_noise(const FitResult& fit, const DataCollection& data,
                             const MatrixKey& key);

/// Number of factor scales with magnitude above `tol` in one matrix, and in
/// a pair of matrices jointly.
int estimated_rank(const FitResult& fit, const DataCollection& data,
                   const MatrixKey& key, Real tol = 1e-12);
int shared_rank(const FitResult& fit, const DataCollection& data,
                const MatrixKey& a, const MatrixKey& b, Real tol = 1e-12);

struct VariationReport {
    std::vector<MatrixKey> keys;
    std::vector<Real> variation;            // per key
    std::vector<NoiseEstimate> noise;       // per key
    // directed R^2 for every valid ordered pair (dependent, predictor).
    struct DirectedEntry {
        MatrixKey dep;
        MatrixKey pred;
        Real value = 0.0;
    };
    std::vector<DirectedEntry> directed;
};
VariationReport make_variation_report(const FitResult& fit,
                                      const DataCollection& data);

struct FactorMatching {
    struct Pair {
        Index est = 0;
        Index truth = 0;
        Real dot = 0.0;  // signed scalar product of normalized columns
    };
    std::vector<Pair> pairs;
    Real threshold = 0.75;
};

/// Greedy matching of estimated factor columns to ground-truth columns by
/// descending absolute scalar product; each column is used at most once and
/// pairs below the threshold are discarded. Columns are normalized
/// internally. `optimal` switches to exhaustive assignment (maximum total
/// |dot|), feasible for the small ranks used here.
FactorMatching match_factors(const Matrix& est, const Matrix& truth,
                             Real threshold = 0.75, bool optimal = false);

struct ConfusionRates {
    Index est_column = 0;
    Index truth_column = 0;
    Real tpr = 0.0;
    Real fpr = 0.0;
};

/// Per matched factor: true and false positive rates of the estimated
/// nonzero pattern against the ground-truth pattern.
std::vector<ConfusionRates> sparsity_confusion(const Mask& est_support,
                                               const Mask& truth_support,
                                               const FactorMatching& matching);

struct StructureGraph {
    struct Edge {
        MatrixKey dep;
        MatrixKey pred;
        Real weight = 0.0;  // directed R^2 of dep predicted by pred
    };
    std::vector<Edge> edges;
};

/// Directed graph over data matrices with an edge predictor -> dependent
/// whenever the two share a view and the directed R^2 is positive.
StructureGraph structure_graph(const FitResult& fit, const DataCollection& data);

/// Reporting-only sign normalization: per factor, signs of factor columns
/// are flipped across views so that as many scales as possible become
/// non-negative, resolved deterministically along a spanning tree of the
/// view graph (cycles can leave a residual negative sign). Reconstructions
/// V_i D V_j^T are unchanged at every key.
void canonicalize_signs(FitResult& fit, const DataCollection& data);

}  // namespace solrcmf
