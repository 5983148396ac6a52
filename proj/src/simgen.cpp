#include "solrcmf/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace solrcmf {

namespace {

void check_rank(Index p, Index k) {
    if (k < 1 || k > p) {
        throw RankTooLarge("factor rank " + std::to_string(k) +
                           " exceeds dimension " + std::to_string(p));
    }
}

}  // namespace

Matrix simulate_dense_orthogonal(Index p, Index k, std::mt19937_64& rng) {
    check_rank(p, k);
    std::normal_distribution<Real> normal(0.0, 1.0);
    Matrix a(p, k);
    for (Index c = 0; c < k; ++c) {
        for (Index r = 0; r < p; ++r) a(r, c) = normal(rng);
    }
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(p, k);
    const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Index c = 0; c < k; ++c) {
        if (r(c, c) < 0) q.col(c) = -q.col(c);
    }
    return q;
}

Matrix simulate_dense_orthogonal(Index p, Index k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return simulate_dense_orthogonal(p, k, rng);
}

Matrix simulate_sparse_orthogonal(Index p, Index k, Real sparsity,
                                  std::mt19937_64& rng) {
    check_rank(p, k);
    if (sparsity < 0.0 || sparsity >= 1.0) {
        throw BadRange("sparsity must lie in [0, 1)");
    }
    std::normal_distribution<Real> normal(0.0, 1.0);
    Matrix a(p, k);
    for (Index c = 0; c < k; ++c) {
        for (Index r = 0; r < p; ++r) a(r, c) = normal(rng);
    }

    // Keep the ceil((1 - s) p) largest-magnitude entries per column; ties
    // keep the lower index.
    const Index keep = static_cast<Index>(
        std::ceil((1.0 - sparsity) * static_cast<Real>(p)));
    if (keep < k) {
        throw DegenerateSupport(
            "per-column support of " + std::to_string(keep) +
            " entries cannot carry " + std::to_string(k) +
            " orthogonal columns");
    }
    if (keep < p) {
        std::vector<Index> order(static_cast<size_t>(p));
        for (Index c = 0; c < k; ++c) {
            std::iota(order.begin(), order.end(), Index{0});
            std::stable_sort(order.begin(), order.end(), [&](Index u, Index v) {
                return std::abs(a(u, c)) > std::abs(a(v, c));
            });
            for (Index t = keep; t < p; ++t) a(order[static_cast<size_t>(t)], c) = 0.0;
        }
    }

    // Zero-preserving Gram-Schmidt: each column is orthogonalized against
    // the previous ones using only their restrictions to the column's
    // support, then normalized. Column-by-column subtraction stalls when
    // the restricted vectors are nearly dependent, so the projection onto
    // their span is removed in one step via an orthonormal basis of the
    // restricted block; entries off the support are never written.
    Matrix v = Matrix::Zero(p, k);
    for (Index c = 0; c < k; ++c) {
        Vector col = a.col(c);
        std::vector<Index> support;
        for (Index r = 0; r < p; ++r) {
            if (col(r) != 0.0) support.push_back(r);
        }
        if (c > 0 && !support.empty()) {
            const Index s = static_cast<Index>(support.size());
            Matrix restricted(s, c);
            Vector on_support(s);
            for (Index t = 0; t < s; ++t) {
                on_support(t) = col(support[static_cast<size_t>(t)]);
                for (Index j = 0; j < c; ++j) {
                    restricted(t, j) = v(support[static_cast<size_t>(t)], j);
                }
            }
            Eigen::ColPivHouseholderQR<Matrix> qr(restricted);
            const Index rank = qr.rank();
            if (rank > 0) {
                const Matrix basis =
                    Matrix(qr.householderQ()).leftCols(rank);
                on_support -= basis * (basis.transpose() * on_support);
            }
            for (Index t = 0; t < s; ++t) {
                col(support[static_cast<size_t>(t)]) = on_support(t);
            }
        }
        const Real norm = col.norm();
        if (norm < 1e-12) {
            throw DegenerateSupport("column " + std::to_string(c + 1) +
                                    " collapsed during orthogonalization");
        }
        v.col(c) = col / norm;
    }
    return v;
}

Matrix simulate_sparse_orthogonal(Index p, Index k, Real sparsity,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return simulate_sparse_orthogonal(p, k, sparsity, rng);
}

GroundTruth build_scenario(const Scenario& sc) {
    if (sc.keys.empty() || sc.scales_truth.size() != sc.keys.size()) {
        throw InvalidScenario("scenario must list one scale vector per key");
    }
    const Index k = sc.k();
    for (const auto& d : sc.scales_truth) {
        if (d.size() != k) {
            throw InvalidScenario("scale vectors must share a common length");
        }
    }
    if (sc.snr <= 0.0) {
        throw InvalidScenario("snr must be positive");
    }

    std::mt19937_64 rng(sc.seed);
    GroundTruth truth;
    truth.factors.reserve(sc.view_dims.size());
    for (const Index p : sc.view_dims) {
        truth.factors.push_back(sc.sparsity > 0.0
                                    ? simulate_sparse_orthogonal(p, k, sc.sparsity, rng)
                                    : simulate_dense_orthogonal(p, k, rng));
    }

    std::normal_distribution<Real> normal(0.0, 1.0);
    std::vector<ObservedMatrix> entries;
    entries.reserve(sc.keys.size());
    for (size_t i = 0; i < sc.keys.size(); ++i) {
        const MatrixKey key = sc.keys[i];
        const Matrix& vi = truth.factors[static_cast<size_t>(key.row_view - 1)];
        const Matrix& vj = truth.factors[static_cast<size_t>(key.col_view - 1)];
        Matrix signal = (vi * sc.scales_truth[i].asDiagonal()) * vj.transpose();
        const Real sigma2 = signal.squaredNorm() /
                            (sc.snr * static_cast<Real>(signal.size()));
        const Real sigma = std::sqrt(sigma2);
        Matrix x = signal;
        for (Index c = 0; c < x.cols(); ++c) {
            for (Index r = 0; r < x.rows(); ++r) x(r, c) += sigma * normal(rng);
        }
        truth.signals.push_back(std::move(signal));
        truth.sigma2.push_back(sigma2);
        entries.push_back(make_observed(key, std::move(x)));
    }

    std::vector<std::pair<ViewId, Index>> views;
    for (size_t v = 0; v < sc.view_dims.size(); ++v) {
        views.emplace_back(static_cast<ViewId>(v + 1), sc.view_dims[v]);
    }
    truth.data = build_collection(views, std::move(entries));
    return truth;
}

Scenario scenario_sim1(std::uint64_t seed) {
    Scenario sc;
    sc.view_dims = {50, 25, 35, 30};
    sc.keys = {{1, 2, 1}, {1, 3, 1}, {1, 3, 2}, {4, 3, 1}, {1, 4, 1}};
    sc.scales_truth = {
        (Vector(5) << 3.0, 3.5, 0.0, 0.0, 4.0).finished(),
        (Vector(5) << 2.5, 2.75, 3.0, 0.0, 0.0).finished(),
        (Vector(5) << 2.5, 0.0, 3.5, 3.0, 0.0).finished(),
        (Vector(5) << 3.0, 0.0, 4.5, 3.5, 0.0).finished(),
        (Vector(5) << 0.0, 0.0, 3.5, 0.0, 4.0).finished(),
    };
    sc.sparsity = 0.75;
    sc.snr = 0.5;
    sc.seed = seed;
    return sc;
}

Scenario scenario_sim2(std::uint64_t seed, Real sparsity, bool half_dims) {
    Scenario sc;
    sc.view_dims = half_dims ? std::vector<Index>{50, 25, 50, 25}
                             : std::vector<Index>{100, 50, 100, 50};
    sc.keys = {{1, 2, 1}, {1, 3, 1}, {1, 3, 2}, {4, 3, 1}};
    sc.scales_truth = {
        (Vector(5) << 0.0, 3.5, 0.0, 0.0, 4.0).finished(),
        (Vector(5) << 3.1, 3.15, 3.05, 0.0, 0.0).finished(),
        (Vector(5) << 3.1, 3.15, 3.05, 0.0, 0.0).finished(),
        (Vector(5) << 0.0, 0.0, 3.5, 4.0, 0.0).finished(),
    };
    sc.sparsity = sparsity;
    sc.snr = 0.5;
    sc.seed = seed;
    return sc;
}

Scenario builtin_scenario(const std::string& name, std::uint64_t seed) {
    if (name == "sim1") return scenario_sim1(seed);
    if (name == "sim2") return scenario_sim2(seed);
    throw InvalidScenario("unknown scenario '" + name + "'");
}

}  // namespace solrcmf
