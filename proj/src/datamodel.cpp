#include "solrcmf/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace solrcmf {

ObservedMatrix make_observed(MatrixKey key, Matrix values, Mask mask) {
    if (values.rows() != mask.rows() || values.cols() != mask.cols()) {
        throw DimensionMismatch("mask shape does not match values for matrix " +
                                key.str());
    }
    ObservedMatrix out;
    out.key = key;
    out.n_obs = mask.count();
    for (Index c = 0; c < values.cols(); ++c) {
        for (Index r = 0; r < values.rows(); ++r) {
            if (mask(r, c)) {
                if (!std::isfinite(values(r, c))) {
                    throw DimensionMismatch("non-finite observed value in matrix " +
                                            key.str());
                }
            } else {
                values(r, c) = 0.0;
            }
        }
    }
    out.values = std::move(values);
    out.mask = std::move(mask);
    return out;
}

ObservedMatrix make_observed(MatrixKey key, Matrix values) {
    Mask mask = Mask::Constant(values.rows(), values.cols(), true);
    return make_observed(key, std::move(values), std::move(mask));
}

const ObservedMatrix& DataCollection::at(const MatrixKey& key) const {
    return matrices[static_cast<size_t>(index_of(key))];
}

bool DataCollection::contains(const MatrixKey& key) const {
    for (const auto& m : matrices) {
        if (m.key == key) return true;
    }
    return false;
}

Index DataCollection::index_of(const MatrixKey& key) const {
    for (size_t i = 0; i < matrices.size(); ++i) {
        if (matrices[i].key == key) return static_cast<Index>(i);
    }
    throw ConfigError("matrix " + key.str() + " not present in collection");
}

DataCollection build_collection(
    const std::vector<std::pair<ViewId, Index>>& views,
    std::vector<ObservedMatrix> entries) {
    DataCollection data;
    data.view_dims.assign(views.size(), 0);
    std::vector<bool> seen(views.size(), false);
    for (const auto& [id, dim] : views) {
        if (id < 1 || static_cast<size_t>(id) > views.size()) {
            throw ConfigError("view ids must be dense in 1.." +
                              std::to_string(views.size()) + ", got " +
                              std::to_string(id));
        }
        if (seen[static_cast<size_t>(id - 1)]) {
            throw DuplicateKey("view id " + std::to_string(id) + " listed twice");
        }
        if (dim < 1) {
            throw ConfigError("view " + std::to_string(id) +
                              " must have dimension >= 1");
        }
        seen[static_cast<size_t>(id - 1)] = true;
        data.view_dims[static_cast<size_t>(id - 1)] = dim;
    }

    std::set<MatrixKey> keys;
    for (auto& m : entries) {
        const MatrixKey key = m.key;
        if (key.row_view == key.col_view) {
            throw SelfRelation("matrix " + key.str() +
                               " relates a view to itself");
        }
        if (key.row_view < 1 || key.row_view > data.n_views() ||
            key.col_view < 1 || key.col_view > data.n_views()) {
            throw ConfigError("matrix " + key.str() + " references unknown view");
        }
        if (key.layer < 1) {
            throw ConfigError("matrix " + key.str() + " has layer < 1");
        }
        if (!keys.insert(key).second) {
            throw DuplicateKey("matrix " + key.str() + " listed twice");
        }
        if (m.rows() != data.dim(key.row_view) || m.cols() != data.dim(key.col_view)) {
            throw DimensionMismatch(
                "matrix " + key.str() + " has shape " + std::to_string(m.rows()) +
                "x" + std::to_string(m.cols()) + ", expected " +
                std::to_string(data.dim(key.row_view)) + "x" +
                std::to_string(data.dim(key.col_view)));
        }
        data.matrices.push_back(std::move(m));
    }
    return data;
}

BicenterResult bicenter(const ObservedMatrix& matrix, Real tol, int max_sweeps) {
    const Index rows = matrix.rows();
    const Index cols = matrix.cols();

    Eigen::ArrayXd row_counts = Eigen::ArrayXd::Zero(rows);
    Eigen::ArrayXd col_counts = Eigen::ArrayXd::Zero(cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            if (matrix.mask(r, c)) {
                row_counts(r) += 1.0;
                col_counts(c) += 1.0;
            }
        }
    }
    if ((row_counts == 0.0).any() || (col_counts == 0.0).any()) {
        throw EmptyRowOrColumn("matrix " + matrix.key.str() +
                               " has a row or column without observed entries");
    }

    BicenterResult res;
    res.matrix = matrix;
    res.row_means = Vector::Zero(rows);
    res.col_means = Vector::Zero(cols);
    Matrix& x = res.matrix.values;
    const Mask& mask = res.matrix.mask;

    auto max_abs_mean = [&](bool by_rows) {
        Real worst = 0.0;
        if (by_rows) {
            for (Index r = 0; r < rows; ++r) {
                Real s = 0.0;
                for (Index c = 0; c < cols; ++c)
                    if (mask(r, c)) s += x(r, c);
                worst = std::max(worst, std::abs(s / row_counts(r)));
            }
        } else {
            for (Index c = 0; c < cols; ++c) {
                Real s = 0.0;
                for (Index r = 0; r < rows; ++r)
                    if (mask(r, c)) s += x(r, c);
                worst = std::max(worst, std::abs(s / col_counts(c)));
            }
        }
        return worst;
    };

    for (res.sweeps = 1; res.sweeps <= max_sweeps; ++res.sweeps) {
        for (Index r = 0; r < rows; ++r) {
            Real s = 0.0;
            for (Index c = 0; c < cols; ++c)
                if (mask(r, c)) s += x(r, c);
            const Real mean = s / row_counts(r);
            res.row_means(r) += mean;
            for (Index c = 0; c < cols; ++c)
                if (mask(r, c)) x(r, c) -= mean;
        }
        for (Index c = 0; c < cols; ++c) {
            Real s = 0.0;
            for (Index r = 0; r < rows; ++r)
                if (mask(r, c)) s += x(r, c);
            const Real mean = s / col_counts(c);
            res.col_means(c) += mean;
            for (Index r = 0; r < rows; ++r)
                if (mask(r, c)) x(r, c) -= mean;
        }
        if (max_abs_mean(true) < tol && max_abs_mean(false) < tol) {
            return res;
        }
    }
    throw NoConvergence("bicentering of matrix " + matrix.key.str() +
                        " did not reach tolerance in " +
                        std::to_string(max_sweeps) + " sweeps");
}

NormalizeResult normalize(const ObservedMatrix& matrix) {
    // Unobserved values are stored as zero, so the full Frobenius norm is
    // the observed-entry norm.
    const Real norm = matrix.values.norm();
    if (norm == 0.0) {
        throw ZeroMatrix("matrix " + matrix.key.str() +
                         " is zero on all observed entries");
    }
    const Real target = static_cast<Real>(matrix.n_obs) /
                        (static_cast<Real>(matrix.rows()) *
                         static_cast<Real>(matrix.cols()));
    NormalizeResult res;
    res.matrix = matrix;
    res.scale = norm / target;
    res.matrix.values *= target / norm;
    return res;
}

void preprocess_collection(DataCollection& data, bool do_bicenter,
                           bool do_normalize) {
    for (auto& m : data.matrices) {
        PreprocessRecord rec;
        rec.key = m.key;
        rec.row_means = Vector::Zero(m.rows());
        rec.col_means = Vector::Zero(m.cols());
        if (do_bicenter) {
            BicenterResult b = bicenter(m);
            m = std::move(b.matrix);
            rec.row_means = std::move(b.row_means);
            rec.col_means = std::move(b.col_means);
            rec.bicentered = true;
        }
        if (do_normalize) {
            NormalizeResult n = normalize(m);
            m = std::move(n.matrix);
            rec.scale = n.scale;
            rec.normalized = true;
        }
        data.preprocessing_log.push_back(std::move(rec));
    }
}

FoldAssignment make_folds(const DataCollection& collection, int n_folds,
                          std::uint64_t seed) {
    if (n_folds < 2) {
        throw BadRange("number of folds must be at least 2");
    }
    FoldAssignment out;
    out.n_folds = n_folds;
    out.labels.reserve(collection.matrices.size());

    for (const auto& m : collection.matrices) {
        if (m.n_obs < n_folds) {
            throw TooFewEntries("matrix " + m.key.str() + " has " +
                                std::to_string(m.n_obs) +
                                " observed entries, need at least " +
                                std::to_string(n_folds));
        }
        std::vector<std::pair<Index, Index>> obs;
        obs.reserve(static_cast<size_t>(m.n_obs));
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) {
                if (m.mask(r, c)) obs.emplace_back(r, c);
            }
        }
        std::seed_seq seq{static_cast<std::uint32_t>(seed),
                          static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(m.key.row_view),
                          static_cast<std::uint32_t>(m.key.col_view),
                          static_cast<std::uint32_t>(m.key.layer)};
        std::mt19937_64 rng(seq);
        std::shuffle(obs.begin(), obs.end(), rng);

        Eigen::ArrayXXi labels = Eigen::ArrayXXi::Zero(m.rows(), m.cols());
        const Index n = static_cast<Index>(obs.size());
        const Index base = n / n_folds;
        const Index extra = n % n_folds;  // first `extra` folds get one more
        Index pos = 0;
        for (int f = 0; f < n_folds; ++f) {
            const Index size = base + (f < extra ? 1 : 0);
            for (Index t = 0; t < size; ++t, ++pos) {
                labels(obs[static_cast<size_t>(pos)].first,
                       obs[static_cast<size_t>(pos)].second) = f + 1;
            }
        }
        out.labels.push_back(std::move(labels));
    }
    return out;
}

}  // namespace solrcmf
