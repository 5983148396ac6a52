#include "solrcmf/admm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "solrcmf/manifold.hpp"

namespace solrcmf {

Real rho_lower_bound(Real mu, const Vector& slack_weights) {
    const Real w_max = slack_weights.maxCoeff();
    const Real w_min = slack_weights.minCoeff();
    const Real ratio = w_max / w_min;
    const Real b1 = 2.0 * mu * w_max * w_max / w_min;
    const Real b2 = 0.5 * (1.0 + mu * w_max) * (1.0 + 2.0 * ratio) * (1.0 + 2.0 * ratio);
    return std::max({2.0, b1, b2});
}

Hyperparams resolve_hyperparams(Hyperparams h, const DataCollection& data,
                                Index k) {
    const Index m = data.n_views();
    if (h.slack_weights.size() == 0) {
        h.slack_weights = Vector::Ones(m);
    }
    if (h.factor_weights.size() == 0) {
        h.factor_weights.resize(m);
        for (Index v = 0; v < m; ++v) {
            h.factor_weights(v) = 1.0 / std::sqrt(static_cast<Real>(data.view_dims[static_cast<size_t>(v)]));
        }
    }
    if (h.scale_weights.empty()) {
        h.scale_weights.assign(static_cast<size_t>(data.n_matrices()), Vector::Ones(k));
    }
    if (h.slack_weights.size() != m || h.factor_weights.size() != m ||
        h.scale_weights.size() != static_cast<size_t>(data.n_matrices())) {
        throw ConfigError("penalty weight vectors do not match the collection");
    }
    if (h.slack_weights.minCoeff() <= 0.0) {
        throw ConfigError("slack weights must be positive");
    }
    if (h.mu <= 0.0) {
        throw ConfigError("mu must be positive");
    }
    if (h.max_iter < 1) {
        throw ConfigError("max_iter must be at least 1");
    }

    const Real bound = rho_lower_bound(h.mu, h.slack_weights);
    if (h.rho <= 0.0) {
        h.rho = 1.01 * bound;
    } else if (h.rho <= bound) {
        throw InvalidRho("rho = " + std::to_string(h.rho) +
                         " is not above the admissibility bound " +
                         std::to_string(bound));
    }
    return h;
}

namespace {

Index view_index(const MatrixKey& key, bool row) {
    return static_cast<Index>((row ? key.row_view : key.col_view) - 1);
}

void check_state_dims(const SolverState& state, const DataCollection& data) {
    const size_t m = static_cast<size_t>(data.n_views());
    const size_t n = static_cast<size_t>(data.n_matrices());
    if (state.factors.size() != m || state.sparse_factors.size() != m ||
        state.slack.size() != m || state.dual_split.size() != m ||
        state.scales.size() != n || state.signals.size() != n ||
        state.dual_signal.size() != n) {
        throw ConfigError("solver state does not match the collection layout");
    }
    for (size_t v = 0; v < m; ++v) {
        const Index p = data.view_dims[v];
        if (state.factors[v].rows() != p || state.factors[v].cols() != state.k) {
            throw ConfigError("factor block for view " + std::to_string(v + 1) +
                              " has wrong shape");
        }
    }
}

Matrix reconstruction(const SolverState& state, const DataCollection& data,
                      Index key) {
    const MatrixKey& k = data.matrices[static_cast<size_t>(key)].key;
    const Matrix& vi = state.factors[static_cast<size_t>(view_index(k, true))];
    const Matrix& vj = state.factors[static_cast<size_t>(view_index(k, false))];
    return (vi * state.scales[static_cast<size_t>(key)].asDiagonal()) * vj.transpose();
}

}  // namespace

Matrix updated_factor(const SolverState& state, const DataCollection& data,
                      const Hyperparams& h, Index view) {
    const size_t v = static_cast<size_t>(view);
    Matrix m = state.sparse_factors[v] - state.slack[v] + state.dual_split[v];
    m += (h.alpha / h.rho) * state.factors[v];
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const size_t sk = static_cast<size_t>(kk);
        const MatrixKey& key = data.matrices[sk].key;
        const Index ri = view_index(key, true);
        const Index ci = view_index(key, false);
        if (ri == view) {
            m.noalias() += ((state.signals[sk] + state.dual_signal[sk]) *
                            state.factors[static_cast<size_t>(ci)]) *
                           state.scales[sk].asDiagonal();
        } else if (ci == view) {
            m.noalias() += ((state.signals[sk] + state.dual_signal[sk]).transpose() *
                            state.factors[static_cast<size_t>(ri)]) *
                           state.scales[sk].asDiagonal();
        }
    }
    if (!m.allFinite()) {
        throw NonFiniteValue("factor update for view " + std::to_string(view + 1) +
                             " produced non-finite values");
    }
    return project_stiefel(m);
}

Vector updated_scales(const SolverState& state, const DataCollection& data,
                      const Hyperparams& h, Index key,
                      const SupportClamp* clamp) {
    const size_t sk = static_cast<size_t>(key);
    const MatrixKey& k = data.matrices[sk].key;
    const Matrix& vi = state.factors[static_cast<size_t>(view_index(k, true))];
    const Matrix& vj = state.factors[static_cast<size_t>(view_index(k, false))];

    // Only the diagonal of V_i^T (Z + L2) V_j is needed.
    Matrix t = (state.signals[sk] + state.dual_signal[sk]) * vj;
    Vector diag = (vi.array() * t.array()).colwise().sum();

    const Real beta = h.lambda1 / h.rho;
    const Vector& w = h.scale_weights[sk];
    Vector d(diag.size());
    for (Index l = 0; l < diag.size(); ++l) {
        if (clamp != nullptr && !clamp->scale_active[sk](l)) {
            d(l) = 0.0;
        } else {
            d(l) = soft_threshold(diag(l), beta * w(l));
        }
    }
    return d;
}

Matrix updated_sparse_factor(const SolverState& state, const Hyperparams& h,
                             Index view, const SupportClamp* clamp,
                             std::vector<std::string>* warnings) {
    const size_t v = static_cast<size_t>(view);
    Matrix m = state.factors[v] + state.slack[v] - state.dual_split[v] +
               (h.alpha / h.rho) * state.sparse_factors[v];
    const Real w = h.lambda2 * h.factor_weights(view) / h.rho;
    if (warnings != nullptr && oblique_weight_too_large(w, m.rows())) {
        warnings->push_back("view " + std::to_string(view + 1) +
                            ": sparse-factor threshold w*sqrt(p) >= 1; lambda2 "
                            "is likely too large");
    }

    Matrix u(m.rows(), m.cols());
    Vector col(m.rows());
    for (Index l = 0; l < m.cols(); ++l) {
        col = m.col(l);
        if (clamp != nullptr) {
            if (!clamp->factor_active[v].col(l).any()) {
                // Fully pinned column: the factor is inactive in every
                // matrix touching this view (consistency closure), so the
                // column only participates through the split constraint.
                // Tracking the orthonormal factor keeps the slack at zero
                // instead of distorting the joint Stiefel projection.
                u.col(l) = state.factors[v].col(l);
                continue;
            }
            for (Index r = 0; r < col.size(); ++r) {
                if (!clamp->factor_active[v](r, l)) col(r) = 0.0;
            }
            auto [prox, kind] = prox_oblique_l1(col, w);
            if (kind == ObliqueCase::ZeroInput) {
                // Every active entry was exactly zero; place the unit mass
                // on the first active position rather than e_1.
                prox.setZero();
                for (Index r = 0; r < col.size(); ++r) {
                    if (clamp->factor_active[v](r, l)) {
                        prox(r) = 1.0;
                        break;
                    }
                }
            }
            u.col(l) = prox;
            continue;
        }
        u.col(l) = prox_oblique_l1(col, w).first;
    }
    return u;
}

void update_delta(SolverState& state, const DataCollection& data,
                  const Hyperparams& h, std::vector<Matrix>* models) {
    for (Index v = 0; v < data.n_views(); ++v) {
        const size_t sv = static_cast<size_t>(v);
        const Real f = h.rho / (h.rho + h.mu * h.slack_weights(v));
        state.slack[sv] =
            f * (state.sparse_factors[sv] - state.factors[sv] + state.dual_split[sv]);
    }
    if (models != nullptr) {
        models->resize(static_cast<size_t>(data.n_matrices()));
    }
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const size_t sk = static_cast<size_t>(kk);
        const ObservedMatrix& x = data.matrices[sk];
        Matrix model = reconstruction(state, data, kk);
        const Matrix g = model - state.dual_signal[sk];
        const Real f = h.rho / (h.rho + 1.0);
        state.signals[sk] =
            x.mask.select(f * g + (1.0 - f) * x.values, g);
        if (models != nullptr) (*models)[sk] = std::move(model);
    }
}

void update_multipliers(SolverState& state, const DataCollection& data,
                        const std::vector<Matrix>* models) {
    for (size_t v = 0; v < state.factors.size(); ++v) {
        state.dual_split[v] +=
            state.sparse_factors[v] - state.factors[v] - state.slack[v];
    }
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const size_t sk = static_cast<size_t>(kk);
        if (models != nullptr) {
            state.dual_signal[sk] += state.signals[sk] - (*models)[sk];
        } else {
            state.dual_signal[sk] += state.signals[sk] - reconstruction(state, data, kk);
        }
    }
}

Real augmented_lagrangian(const SolverState& state, const DataCollection& data,
                          const Hyperparams& h,
                          const std::vector<Matrix>* models) {
    Real value = 0.0;
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const size_t sk = static_cast<size_t>(kk);
        const ObservedMatrix& x = data.matrices[sk];
        value += 0.5 * x.mask.select(x.values - state.signals[sk], Matrix::Zero(x.rows(), x.cols()))
                           .squaredNorm();
        value += h.lambda1 * h.scale_weights[sk].dot(state.scales[sk].cwiseAbs());

        const Matrix model = models != nullptr ? (*models)[sk]
                                               : reconstruction(state, data, kk);
        value += 0.5 * h.rho *
                 ((state.signals[sk] - model + state.dual_signal[sk]).squaredNorm() -
                  state.dual_signal[sk].squaredNorm());
    }
    for (Index v = 0; v < data.n_views(); ++v) {
        const size_t sv = static_cast<size_t>(v);
        value += h.lambda2 * h.factor_weights(v) *
                 state.sparse_factors[sv].cwiseAbs().sum();
        value += 0.5 * h.mu * h.slack_weights(v) * state.slack[sv].squaredNorm();
        value += 0.5 * h.rho *
                 ((state.sparse_factors[sv] - state.factors[sv] - state.slack[sv] +
                   state.dual_split[sv])
                      .squaredNorm() -
                  state.dual_split[sv].squaredNorm());
    }
    return value;
}

Real objective_value(const SolverState& state, const DataCollection& data,
                     const Hyperparams& h, const std::vector<Matrix>* models) {
    Real value = 0.0;
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const size_t sk = static_cast<size_t>(kk);
        const ObservedMatrix& x = data.matrices[sk];
        const Matrix model = models != nullptr ? (*models)[sk]
                                               : reconstruction(state, data, kk);
        value += 0.5 * x.mask.select(x.values - model, Matrix::Zero(x.rows(), x.cols()))
                           .squaredNorm();
        value += h.lambda1 * h.scale_weights[sk].dot(state.scales[sk].cwiseAbs());
    }
    for (Index v = 0; v < data.n_views(); ++v) {
        value += h.lambda2 * h.factor_weights(v) *
                 state.sparse_factors[static_cast<size_t>(v)].cwiseAbs().sum();
    }
    return value;
}

FitResult fit(const DataCollection& data, const Hyperparams& raw,
              const SolverState& init, const SupportClamp* clamp) {
    const Hyperparams h = resolve_hyperparams(raw, data, init.k);
    check_state_dims(init, data);
    if (clamp != nullptr &&
        (clamp->scale_active.size() != static_cast<size_t>(data.n_matrices()) ||
         clamp->factor_active.size() != static_cast<size_t>(data.n_views()))) {
        throw ConfigError("support clamp does not match the collection layout");
    }

    FitResult res;
    res.state = init;
    SolverState& state = res.state;
    std::vector<Matrix> models;

    Real prev = std::numeric_limits<Real>::infinity();
    for (int t = 1; t <= h.max_iter; ++t) {
        for (Index v = 0; v < data.n_views(); ++v) {
            state.factors[static_cast<size_t>(v)] = updated_factor(state, data, h, v);
        }
        for (Index kk = 0; kk < data.n_matrices(); ++kk) {
            state.scales[static_cast<size_t>(kk)] =
                updated_scales(state, data, h, kk, clamp);
        }
        for (Index v = 0; v < data.n_views(); ++v) {
            state.sparse_factors[static_cast<size_t>(v)] = updated_sparse_factor(
                state, h, v, clamp, t == 1 ? &res.warnings : nullptr);
        }
        update_delta(state, data, h, &models);
        update_multipliers(state, data, &models);

        const Real lagrangian = augmented_lagrangian(state, data, h, &models);
        if (!std::isfinite(lagrangian)) {
            throw NonFiniteValue("augmented Lagrangian became non-finite at sweep " +
                                 std::to_string(t));
        }
        res.lagrangian_trace.push_back(lagrangian);
        res.iterations = t;
        if (t >= 2) {
            const Real decrease = std::abs(lagrangian - prev);
            if (decrease < h.eps_abs || decrease < h.eps_rel * std::abs(prev)) {
                res.converged = true;
                break;
            }
        }
        prev = lagrangian;
    }

    res.split_residuals.resize(static_cast<size_t>(data.n_views()));
    for (size_t v = 0; v < res.split_residuals.size(); ++v) {
        res.split_residuals[v] =
            (state.sparse_factors[v] - state.factors[v] - state.slack[v]).norm();
    }
    res.signal_residuals.resize(static_cast<size_t>(data.n_matrices()));
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        res.signal_residuals[static_cast<size_t>(kk)] =
            (state.signals[static_cast<size_t>(kk)] - models[static_cast<size_t>(kk)]).norm();
    }
    res.objective = objective_value(state, data, h, &models);
    return res;
}

}  // namespace solrcmf
