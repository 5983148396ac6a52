#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "solrcmf/types.hpp"

// Data collections: views with dimensions, observed matrices indexed by
// (row view, column view, layer) with missingness masks, preprocessing
// (bicentering, normalization to observed Frobenius norm n_obs / (p_i p_j))
// and Wold-type cross-validation fold construction.
//
// Note on normalization targets: the model discussion suggests ||X||_F = 1
// while the estimation guidance uses n_obs / (p_i p_j). The two coincide
// only for fully observed matrices; this implementation follows the latter.

namespace solrcmf {

struct ObservedMatrix {
    MatrixKey key;
    Matrix values;  // unobserved positions are stored as 0
    Mask mask;      // true = observed
    Index n_obs = 0;

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

/// Makes an ObservedMatrix from values and mask, zeroing unobserved
/// positions and counting observations.
ObservedMatrix make_observed(MatrixKey key, Matrix values, Mask mask);

/// Fully observed convenience overload.
ObservedMatrix make_observed(MatrixKey key, Matrix values);

struct PreprocessRecord {
    MatrixKey key;
    Vector row_means;  // cumulative means removed from rows
    Vector col_means;  // cumulative means removed from columns
    Real scale = 1.0;  // original = stored * scale
    bool bicentered = false;
    bool normalized = false;
};

struct DataCollection {
    // views[v] is the dimension of view id v + 1; ids are dense 1..m.
    std::vector<Index> view_dims;
    // insertion order is preserved; it defines the sweep order over keys.
    std::vector<ObservedMatrix> matrices;
    std::vector<PreprocessRecord> preprocessing_log;

    Index n_views() const { return static_cast<Index>(view_dims.size()); }
    Index n_matrices() const { return static_cast<Index>(matrices.size()); }
    Index dim(ViewId v) const { return view_dims[static_cast<size_t>(v - 1)]; }

    const ObservedMatrix& at(const MatrixKey& key) const;
    bool contains(const MatrixKey& key) const;
    Index index_of(const MatrixKey& key) const;
};

/// Validates view dimensions, key uniqueness and shape consistency and
/// assembles a collection. View list entries are (id, dimension).
DataCollection build_collection(
    const std::vector<std::pair<ViewId, Index>>& views,
    std::vector<ObservedMatrix> entries);

/// Removes observed-entry row and column means by alternating sweeps until
/// all means are below `tol` in absolute value (at most `max_sweeps`
/// alternations). Unobserved entries are untouched. The returned vectors
/// hold the cumulative means, so original = centered + r 1^T + 1 c^T on
/// observed entries.
struct BicenterResult {
    ObservedMatrix matrix;
    Vector row_means;
    Vector col_means;
    int sweeps = 0;
};
BicenterResult bicenter(const ObservedMatrix& matrix, Real tol = 1e-8,
                        int max_sweeps = 100);

/// Scales a matrix so that its observed-entry Frobenius norm equals
/// n_obs / (p_i p_j). Returns the scale with original = normalized * scale.
struct NormalizeResult {
    ObservedMatrix matrix;
    Real scale = 1.0;
};
NormalizeResult normalize(const ObservedMatrix& matrix);

/// Bicenters then normalizes every matrix in place and appends the applied
/// transformations to the collection's preprocessing log.
void preprocess_collection(DataCollection& data, bool do_bicenter = true,
                           bool do_normalize = true);

/// Per-matrix fold labels for Wold-type K-fold cross-validation. Labels are
/// 1..K at observed positions and 0 elsewhere.
struct FoldAssignment {
    int n_folds = 0;
    std::vector<Eigen::ArrayXXi> labels;  // aligned with collection order
};

/// Randomly partitions the observed entries of every matrix into K folds of
/// near-equal size (sizes differ by at most one). Deterministic in `seed`.
FoldAssignment make_folds(const DataCollection& collection, int n_folds,
                          std::uint64_t seed);

}  // namespace solrcmf
