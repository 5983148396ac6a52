#include "solrcmf/init.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "solrcmf/parallel.hpp"

namespace solrcmf {

namespace {

void check_rank(const DataCollection& data, Index k) {
    const Index p_min =
        *std::min_element(data.view_dims.begin(), data.view_dims.end());
    if (k < 1 || k > p_min) {
        throw RankTooLarge("target rank " + std::to_string(k) +
                           " exceeds the smallest view dimension " +
                           std::to_string(p_min));
    }
}

void finish_feasible(SolverState& state, const DataCollection& data) {
    const size_t m = static_cast<size_t>(data.n_views());
    state.sparse_factors = state.factors;
    state.slack.resize(m);
    state.dual_split.resize(m);
    for (size_t v = 0; v < m; ++v) {
        const Index p = data.view_dims[v];
        state.slack[v] = Matrix::Zero(p, state.k);
        state.dual_split[v] = Matrix::Zero(p, state.k);
    }
    const size_t n = static_cast<size_t>(data.n_matrices());
    state.signals.resize(n);
    state.dual_signal.resize(n);
    for (size_t kk = 0; kk < n; ++kk) {
        const MatrixKey& key = data.matrices[kk].key;
        const Matrix& vi = state.factors[static_cast<size_t>(key.row_view - 1)];
        const Matrix& vj = state.factors[static_cast<size_t>(key.col_view - 1)];
        state.signals[kk] = (vi * state.scales[kk].asDiagonal()) * vj.transpose();
        state.dual_signal[kk] =
            Matrix::Zero(state.signals[kk].rows(), state.signals[kk].cols());
    }
}

}  // namespace

Matrix haar_orthonormal(Index p, Index k, std::mt19937_64& rng) {
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

SolverState random_init(const DataCollection& data, Index k,
                        std::uint64_t seed) {
    check_rank(data, k);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> uniform(-1.0, 1.0);

    SolverState state;
    state.k = k;
    state.factors.reserve(static_cast<size_t>(data.n_views()));
    for (Index v = 0; v < data.n_views(); ++v) {
        state.factors.push_back(
            haar_orthonormal(data.view_dims[static_cast<size_t>(v)], k, rng));
    }
    state.scales.resize(static_cast<size_t>(data.n_matrices()));
    for (auto& d : state.scales) {
        d.resize(k);
        for (Index l = 0; l < k; ++l) d(l) = uniform(rng);
    }
    finish_feasible(state, data);
    return state;
}

SolverState multiview_init(const DataCollection& data, Index k,
                           ViewId common_view) {
    check_rank(data, k);
    if (data.n_matrices() == 0) {
        throw LayoutNotMultiview("collection has no matrices");
    }

    // Decide whether the shared view sits in the columns or the rows of
    // every matrix; views on the other side must be distinct.
    bool common_in_cols = true;
    for (const auto& m : data.matrices) {
        if (m.key.col_view != common_view) {
            common_in_cols = false;
            break;
        }
    }
    bool common_in_rows = true;
    for (const auto& m : data.matrices) {
        if (m.key.row_view != common_view) {
            common_in_rows = false;
            break;
        }
    }
    if (!common_in_cols && !common_in_rows) {
        throw LayoutNotMultiview("view " + std::to_string(common_view) +
                                 " is not shared by all matrices");
    }
    std::set<ViewId> other;
    for (const auto& m : data.matrices) {
        const ViewId o = common_in_cols ? m.key.row_view : m.key.col_view;
        if (!other.insert(o).second) {
            throw LayoutNotMultiview(
                "multiview initialization requires distinct non-shared views");
        }
        if (m.n_obs != m.rows() * m.cols()) {
            throw MissingEntriesUnsupported(
                "multiview initialization requires fully observed matrices");
        }
    }

    // Concatenate along the shared view and factorize.
    const Index p_common = data.dim(common_view);
    Index total = 0;
    for (const auto& m : data.matrices) {
        total += common_in_cols ? m.rows() : m.cols();
    }
    Matrix stacked(total, p_common);
    Index offset = 0;
    for (const auto& m : data.matrices) {
        if (common_in_cols) {
            stacked.middleRows(offset, m.rows()) = m.values;
            offset += m.rows();
        } else {
            stacked.middleRows(offset, m.cols()) = m.values.transpose();
            offset += m.cols();
        }
    }
    Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.matrixV().cols() < k) {
        throw RankTooLarge("concatenated matrix supports rank at most " +
                           std::to_string(svd.matrixV().cols()));
    }

    SolverState state;
    state.k = k;
    state.factors.assign(static_cast<size_t>(data.n_views()), Matrix());
    state.factors[static_cast<size_t>(common_view - 1)] = svd.matrixV().leftCols(k);

    // Sections of the left singular vectors are not orthonormal on their
    // own; re-orthonormalize each block before use.
    offset = 0;
    for (const auto& m : data.matrices) {
        const Index rows = common_in_cols ? m.rows() : m.cols();
        const ViewId o = common_in_cols ? m.key.row_view : m.key.col_view;
        Matrix block = svd.matrixU().middleRows(offset, rows).leftCols(k);
        Eigen::HouseholderQR<Matrix> qr(block);
        Matrix q = qr.householderQ() * Matrix::Identity(rows, k);
        const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        for (Index c = 0; c < k; ++c) {
            if (r(c, c) < 0) q.col(c) = -q.col(c);
        }
        state.factors[static_cast<size_t>(o - 1)] = std::move(q);
        offset += rows;
    }

    state.scales.resize(static_cast<size_t>(data.n_matrices()));
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const ObservedMatrix& m = data.matrices[static_cast<size_t>(kk)];
        const Matrix& vi = state.factors[static_cast<size_t>(m.key.row_view - 1)];
        const Matrix& vj = state.factors[static_cast<size_t>(m.key.col_view - 1)];
        state.scales[static_cast<size_t>(kk)] =
            (vi.transpose() * m.values * vj).diagonal();
    }
    finish_feasible(state, data);
    return state;
}

BestInit best_of_restarts(const DataCollection& data, const InitConfig& cfg,
                          const Hyperparams& h) {
    if (cfg.n_init < 1) {
        throw ConfigError("n_init must be at least 1");
    }
    Hyperparams loose = h;
    loose.lambda1 = 0.0;
    loose.lambda2 = 0.0;
    loose.eps_rel = std::max(h.eps_rel, 1e-5);

    struct Run {
        SolverState initial;
        FitResult fitted;
    };
    std::vector<Run> runs(static_cast<size_t>(cfg.n_init));
    parallel_for(cfg.n_init, [&](int r) {
        SolverState s0 =
            random_init(data, cfg.k, cfg.seed + static_cast<std::uint64_t>(r));
        FitResult fr = fit(data, loose, s0);
        runs[static_cast<size_t>(r)] = Run{std::move(s0), std::move(fr)};
    });

    int best = 0;
    Real best_value = std::numeric_limits<Real>::infinity();
    for (int r = 0; r < cfg.n_init; ++r) {
        const Real value = runs[static_cast<size_t>(r)].fitted.lagrangian_trace.back();
        if (value < best_value) {
            best_value = value;
            best = r;
        }
    }
    BestInit out;
    out.initial = std::move(runs[static_cast<size_t>(best)].initial);
    out.warm = std::move(runs[static_cast<size_t>(best)].fitted.state);
    out.objective = best_value;
    out.restart_index = best;
    return out;
}

}  // namespace solrcmf
