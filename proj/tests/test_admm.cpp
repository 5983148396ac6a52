#include <doctest.h>

#include <cmath>
#include <random>

#include "solrcmf/admm.hpp"
#include "solrcmf/init.hpp"
#include "solrcmf/manifold.hpp"

using namespace solrcmf;

namespace {

Matrix random_gaussian(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<Real> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
    }
    return m;
}

// Two views of dimensions 3 and 2 with one observed matrix between them;
// one entry is missing so both mask branches are exercised.
DataCollection tiny_data(std::mt19937_64& rng, Mask* mask_out = nullptr) {
    Matrix x = random_gaussian(3, 2, rng);
    Mask mask = Mask::Constant(3, 2, true);
    mask(2, 1) = false;
    if (mask_out != nullptr) *mask_out = mask;
    return build_collection({{1, 3}, {2, 2}},
                            {make_observed({1, 2, 1}, x, mask)});
}

SolverState random_state(const DataCollection& data, Index k,
                         std::mt19937_64& rng) {
    SolverState s = random_init(data, k, rng());
    // Perturb away from feasibility so penalty terms are exercised.
    for (auto& u : s.sparse_factors) {
        u = u + 0.3 * random_gaussian(u.rows(), u.cols(), rng);
        for (Index c = 0; c < u.cols(); ++c) u.col(c) /= u.col(c).norm();
    }
    for (auto& v : s.slack) v = 0.1 * random_gaussian(v.rows(), v.cols(), rng);
    for (auto& z : s.signals) z += 0.2 * random_gaussian(z.rows(), z.cols(), rng);
    for (auto& l : s.dual_split) l = 0.1 * random_gaussian(l.rows(), l.cols(), rng);
    for (auto& l : s.dual_signal) l = 0.1 * random_gaussian(l.rows(), l.cols(), rng);
    return s;
}

// Straight-line reimplementation of the augmented Lagrangian with scalar
// loops; kept independent of the library's Eigen reductions.
Real lagrangian_reference(const SolverState& s, const DataCollection& data,
                          const Hyperparams& h) {
    Real total = 0.0;
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const size_t sk = static_cast<size_t>(kk);
        const ObservedMatrix& x = data.matrices[sk];
        const Matrix& vi = s.factors[static_cast<size_t>(x.key.row_view - 1)];
        const Matrix& vj = s.factors[static_cast<size_t>(x.key.col_view - 1)];
        Matrix model = Matrix::Zero(x.rows(), x.cols());
        for (Index r = 0; r < x.rows(); ++r) {
            for (Index c = 0; c < x.cols(); ++c) {
                for (Index l = 0; l < s.k; ++l) {
                    model(r, c) += vi(r, l) * s.scales[sk](l) * vj(c, l);
                }
            }
        }
        for (Index r = 0; r < x.rows(); ++r) {
            for (Index c = 0; c < x.cols(); ++c) {
                if (x.mask(r, c)) {
                    const Real e = x.values(r, c) - s.signals[sk](r, c);
                    total += 0.5 * e * e;
                }
                const Real q = s.signals[sk](r, c) - model(r, c) +
                               s.dual_signal[sk](r, c);
                total += 0.5 * h.rho * (q * q - s.dual_signal[sk](r, c) *
                                                    s.dual_signal[sk](r, c));
            }
        }
        for (Index l = 0; l < s.k; ++l) {
            total += h.lambda1 * h.scale_weights[sk](l) * std::abs(s.scales[sk](l));
        }
    }
    for (Index v = 0; v < data.n_views(); ++v) {
        const size_t sv = static_cast<size_t>(v);
        for (Index r = 0; r < s.factors[sv].rows(); ++r) {
            for (Index c = 0; c < s.factors[sv].cols(); ++c) {
                total += h.lambda2 * h.factor_weights(v) *
                         std::abs(s.sparse_factors[sv](r, c));
                total += 0.5 * h.mu * h.slack_weights(v) * s.slack[sv](r, c) *
                         s.slack[sv](r, c);
                const Real q = s.sparse_factors[sv](r, c) - s.factors[sv](r, c) -
                               s.slack[sv](r, c) + s.dual_split[sv](r, c);
                total += 0.5 * h.rho *
                         (q * q - s.dual_split[sv](r, c) * s.dual_split[sv](r, c));
            }
        }
    }
    return total;
}

// Proximal subproblem objective for one view's orthonormal factor block.
Real factor_subproblem(const SolverState& s, const DataCollection& data,
                       const Hyperparams& h, Index view, const Matrix& cand) {
    Real total = 0.0;
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const size_t sk = static_cast<size_t>(kk);
        const MatrixKey& key = data.matrices[sk].key;
        const Index ri = key.row_view - 1;
        const Index ci = key.col_view - 1;
        if (ri != view && ci != view) continue;
        const Matrix& vi = ri == view ? cand : s.factors[static_cast<size_t>(ri)];
        const Matrix& vj = ci == view ? cand : s.factors[static_cast<size_t>(ci)];
        const Matrix model = (vi * s.scales[sk].asDiagonal()) * vj.transpose();
        total += 0.5 * h.rho *
                 (s.signals[sk] - model + s.dual_signal[sk]).squaredNorm();
    }
    const size_t sv = static_cast<size_t>(view);
    total += 0.5 * h.rho *
             (s.sparse_factors[sv] - cand - s.slack[sv] + s.dual_split[sv])
                 .squaredNorm();
    total += 0.5 * h.alpha * (cand - s.factors[sv]).squaredNorm();
    return total;
}

}  // namespace

TEST_CASE("rho_lower_bound evaluates the admissibility bound") {
    CHECK(rho_lower_bound(1.0, Vector::Ones(3)) == doctest::Approx(9.0));
    CHECK(rho_lower_bound(1e-12, Vector::Ones(2)) == doctest::Approx(4.5));
    // Depends only on the extremes of the weights, not the view count.
    CHECK(rho_lower_bound(1.0, Vector::Ones(7)) ==
          rho_lower_bound(1.0, Vector::Ones(2)));

    Vector w(2);
    w << 1.0, 2.0;
    const Real expected =
        std::max({2.0, 2.0 * 1.0 * 4.0 / 1.0, 0.5 * (1.0 + 2.0) * 25.0});
    CHECK(rho_lower_bound(1.0, w) == doctest::Approx(expected));
}

TEST_CASE("resolve_hyperparams fills defaults and validates rho") {
    std::mt19937_64 rng(3);
    const DataCollection data = tiny_data(rng);
    Hyperparams h;
    const Hyperparams r = resolve_hyperparams(h, data, 2);
    CHECK(r.rho == doctest::Approx(1.01 * 9.0));
    CHECK(r.factor_weights(0) == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(r.factor_weights(1) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(r.slack_weights.isOnes());

    h.rho = 5.0;  // below the bound of 9
    CHECK_THROWS_AS(resolve_hyperparams(h, data, 2), InvalidRho);
}

TEST_CASE("augmented_lagrangian matches an independent evaluator") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const DataCollection data = tiny_data(rng);
        Hyperparams h;
        h.lambda1 = 0.3;
        h.lambda2 = 0.2;
        const Hyperparams r = resolve_hyperparams(h, data, 2);
        const SolverState s = random_state(data, 2, rng);
        const Real lib = augmented_lagrangian(s, data, r);
        const Real ref = lagrangian_reference(s, data, r);
        CHECK(lib == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("augmented_lagrangian trivial values") {
    // All-zero data and state: every term vanishes.
    Matrix x = Matrix::Zero(2, 2);
    Mask mask = Mask::Constant(2, 2, true);
    DataCollection data =
        build_collection({{1, 2}, {2, 2}}, {make_observed({1, 2, 1}, x, mask)});
    Hyperparams r = resolve_hyperparams(Hyperparams{}, data, 1);

    SolverState s;
    s.k = 1;
    s.factors = {Matrix::Identity(2, 1), Matrix::Identity(2, 1)};
    s.scales = {Vector::Zero(1)};
    s.sparse_factors = s.factors;
    s.slack = {Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
    s.signals = {Matrix::Zero(2, 2)};
    s.dual_split = s.slack;
    s.dual_signal = {Matrix::Zero(2, 2)};
    CHECK(augmented_lagrangian(s, data, r) == doctest::Approx(0.0));

    // On the feasible set with zero multipliers the Lagrangian equals the
    // penalized objective plus the slack magnitude term.
    std::mt19937_64 rng(29);
    const DataCollection noisy = tiny_data(rng);
    Hyperparams h2;
    h2.lambda1 = 0.4;
    h2.lambda2 = 0.1;
    const Hyperparams r2 = resolve_hyperparams(h2, noisy, 2);
    SolverState feas = random_init(noisy, 2, 5);
    // Introduce nonzero slack while keeping U = V + V' feasible.
    feas.slack[0] = 0.05 * Matrix::Ones(3, 2);
    feas.sparse_factors[0] = feas.factors[0] + feas.slack[0];
    const Real expected =
        objective_value(feas, noisy, r2) +
        0.5 * r2.mu * r2.slack_weights(0) * feas.slack[0].squaredNorm();
    CHECK(augmented_lagrangian(feas, noisy, r2) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("objective_value matches an independent evaluator") {
    std::mt19937_64 rng(37);
    const DataCollection data = tiny_data(rng);
    Hyperparams h;
    h.lambda1 = 0.7;
    h.lambda2 = 0.25;
    const Hyperparams r = resolve_hyperparams(h, data, 2);
    const SolverState s = random_state(data, 2, rng);

    Real ref = 0.0;
    const ObservedMatrix& x = data.matrices[0];
    const Matrix model =
        (s.factors[0] * s.scales[0].asDiagonal()) * s.factors[1].transpose();
    for (Index r2 = 0; r2 < x.rows(); ++r2) {
        for (Index c = 0; c < x.cols(); ++c) {
            if (x.mask(r2, c)) {
                const Real e = x.values(r2, c) - model(r2, c);
                ref += 0.5 * e * e;
            }
        }
    }
    for (Index l = 0; l < 2; ++l) {
        ref += h.lambda1 * r.scale_weights[0](l) * std::abs(s.scales[0](l));
    }
    for (Index v = 0; v < 2; ++v) {
        ref += h.lambda2 * r.factor_weights(v) *
               s.sparse_factors[static_cast<size_t>(v)].cwiseAbs().sum();
    }
    CHECK(objective_value(s, data, r) == doctest::Approx(ref).epsilon(1e-12));

    // Perfect fit with zero penalties scores zero.
    Hyperparams h0 = resolve_hyperparams(Hyperparams{}, data, 2);
    SolverState exact = random_init(data, 2, 3);
    DataCollection perfect = data;
    perfect.matrices[0].values =
        (exact.factors[0] * exact.scales[0].asDiagonal()) *
        exact.factors[1].transpose();
    perfect.matrices[0].mask.setConstant(true);
    perfect.matrices[0].n_obs = perfect.matrices[0].values.size();
    CHECK(objective_value(exact, perfect, h0) == doctest::Approx(0.0));
}

TEST_CASE("updated_factor: fixed point and proximal anchoring") {
    std::mt19937_64 rng(43);
    const DataCollection data = tiny_data(rng);
    Hyperparams h;
    h.alpha = 0.0;
    Hyperparams r = resolve_hyperparams(h, data, 2);

    // With zero scales and U = V, V' = 0, duals = 0, the input to the
    // projection is V itself.
    SolverState s = random_init(data, 2, 9);
    s.scales[0].setZero();
    s.signals[0].setZero();
    CHECK((updated_factor(s, data, r, 0) - s.factors[0]).norm() < 1e-10);

    // Growing proximal weight pins the update to the previous iterate.
    SolverState pert = random_state(data, 2, rng);
    Real prev_dist = std::numeric_limits<Real>::infinity();
    for (const Real alpha : {0.0, 10.0, 1000.0, 100000.0}) {
        Hyperparams ha = r;
        ha.alpha = alpha;
        const Real dist = (updated_factor(pert, data, ha, 0) - pert.factors[0]).norm();
        CHECK(dist <= prev_dist + 1e-12);
        prev_dist = dist;
    }
}

TEST_CASE("updated_factor beats random Stiefel points on its subproblem") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 5; ++trial) {
        const DataCollection data = tiny_data(rng);
        Hyperparams h;
        h.alpha = 0.5;
        const Hyperparams r = resolve_hyperparams(h, data, 2);
        SolverState s = random_state(data, 2, rng);
        const Matrix updated = updated_factor(s, data, r, 0);
        const Real best = factor_subproblem(s, data, r, 0, updated);
        for (int i = 0; i < 10000; ++i) {
            const Matrix w = haar_orthonormal(3, 2, rng);
            CHECK(best <= factor_subproblem(s, data, r, 0, w) + 1e-9);
        }
    }
}

TEST_CASE("updated_scales reduces to thresholded diagonal") {
    std::mt19937_64 rng(53);
    DataCollection data = tiny_data(rng);
    Hyperparams r = resolve_hyperparams(Hyperparams{}, data, 2);
    r.lambda1 = 0.2 * r.rho;  // threshold exactly 0.2

    SolverState s = random_init(data, 2, 13);
    Vector d(2);
    d << 0.9, 0.1;
    s.signals[0] = (s.factors[0] * d.asDiagonal()) * s.factors[1].transpose();
    s.dual_signal[0].setZero();
    const Vector updated = updated_scales(s, data, r, 0);
    CHECK(updated(0) == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(updated(1) == doctest::Approx(0.0));

    // lambda1 = 0 keeps the diagonal exactly.
    r.lambda1 = 0.0;
    const Vector plain = updated_scales(s, data, r, 0);
    CHECK(plain(0) == doctest::Approx(0.9).epsilon(1e-10));
    CHECK(plain(1) == doctest::Approx(0.1).epsilon(1e-10));

    // Zero signal and dual give zero scales.
    s.signals[0].setZero();
    const Vector zero = updated_scales(s, data, r, 0);
    CHECK(zero.isZero(0.0));
}

TEST_CASE("updated_sparse_factor normalizes factor columns when unpenalized") {
    std::mt19937_64 rng(59);
    const DataCollection data = tiny_data(rng);
    Hyperparams h;
    h.alpha = 0.0;
    Hyperparams r = resolve_hyperparams(h, data, 2);
    r.lambda2 = 0.0;

    SolverState s = random_init(data, 2, 21);
    const Matrix u = updated_sparse_factor(s, r, 0);
    CHECK((u - s.factors[0]).norm() < 1e-12);

    // The degenerate-regime warning fires but computation proceeds.
    r.lambda2 = 10.0 * r.rho;
    std::vector<std::string> warnings;
    const Matrix clamped = updated_sparse_factor(s, r, 0, nullptr, &warnings);
    CHECK(warnings.size() == 1);
    for (Index c = 0; c < clamped.cols(); ++c) {
        CHECK(std::abs(clamped.col(c).norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("update_delta closed forms") {
    std::mt19937_64 rng(61);
    Mask mask;
    DataCollection data = tiny_data(rng, &mask);
    Hyperparams h;
    h.mu = 1.0;
    Hyperparams r = resolve_hyperparams(h, data, 2);
    r.rho = 2.0;  // direct check of the coefficient rho / (rho + mu w2)

    SolverState s = random_state(data, 2, rng);
    s.dual_split[0].setZero();
    s.dual_split[1].setZero();
    SolverState updated = s;
    update_delta(updated, data, r);
    for (Index v = 0; v < 2; ++v) {
        const size_t sv = static_cast<size_t>(v);
        const Matrix expected =
            (2.0 / 3.0) * (s.sparse_factors[sv] - s.factors[sv]);
        CHECK((updated.slack[sv] - expected).norm() < 1e-12);
    }

    // Observed entries mix model and data; unobserved entries carry the
    // model exactly.
    Hyperparams r1 = r;
    r1.rho = 1.0;
    SolverState t = s;
    t.dual_signal[0].setZero();
    SolverState updated1 = t;
    update_delta(updated1, data, r1);
    const Matrix model =
        (t.factors[0] * t.scales[0].asDiagonal()) * t.factors[1].transpose();
    for (Index rr = 0; rr < 3; ++rr) {
        for (Index c = 0; c < 2; ++c) {
            const Real expected =
                mask(rr, c)
                    ? 0.5 * model(rr, c) + 0.5 * data.matrices[0].values(rr, c)
                    : model(rr, c);
            CHECK(updated1.signals[0](rr, c) == doctest::Approx(expected));
        }
    }
}

TEST_CASE("update_delta worked example: half model, half data") {
    // rho = 1, model value 0.4, data 0.8, zero dual -> signal entry 0.6.
    Matrix x(2, 2);
    x << 0.8, 0, 0, 0;
    DataCollection data =
        build_collection({{1, 2}, {2, 2}}, {make_observed({1, 2, 1}, x)});
    Hyperparams r = resolve_hyperparams(Hyperparams{}, data, 1);
    r.rho = 1.0;

    SolverState s;
    s.k = 1;
    s.factors = {Matrix::Identity(2, 1), Matrix::Identity(2, 1)};
    s.scales = {(Vector(1) << 0.4).finished()};
    s.sparse_factors = s.factors;
    s.slack = {Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
    s.signals = {Matrix::Zero(2, 2)};
    s.dual_split = s.slack;
    s.dual_signal = {Matrix::Zero(2, 2)};
    update_delta(s, data, r);
    CHECK(s.signals[0](0, 0) == doctest::Approx(0.6));
}

TEST_CASE("update_delta minimizes its own subproblem") {
    // With the sequential blocks and multipliers fixed, the augmented
    // Lagrangian as a function of (slack, signals) is strictly convex;
    // random perturbations of the closed-form update never score lower.
    std::mt19937_64 rng(101);
    const DataCollection data = tiny_data(rng);
    const Hyperparams r = resolve_hyperparams(Hyperparams{}, data, 2);
    SolverState s = random_state(data, 2, rng);
    update_delta(s, data, r);
    const Real best = augmented_lagrangian(s, data, r);
    for (int i = 0; i < 200; ++i) {
        SolverState probe = s;
        for (auto& v : probe.slack) {
            v += 0.05 * random_gaussian(v.rows(), v.cols(), rng);
        }
        for (auto& z : probe.signals) {
            z += 0.05 * random_gaussian(z.rows(), z.cols(), rng);
        }
        CHECK(augmented_lagrangian(probe, data, r) >= best - 1e-10);
    }
}

TEST_CASE("update_multipliers accumulates residuals") {
    std::mt19937_64 rng(67);
    const DataCollection data = tiny_data(rng);

    // Feasible state: multipliers unchanged across two sweeps.
    SolverState feas = random_init(data, 2, 77);
    SolverState once = feas;
    update_multipliers(once, data);
    CHECK((once.dual_split[0] - feas.dual_split[0]).norm() == 0.0);
    CHECK((once.dual_signal[0] - feas.dual_signal[0]).norm() == 0.0);
    update_multipliers(once, data);
    CHECK((once.dual_split[0] - feas.dual_split[0]).norm() == 0.0);

    // A known split residual lands in the multiplier after one update.
    SolverState s = feas;
    const Matrix residual = 0.25 * Matrix::Ones(3, 2);
    s.sparse_factors[0] = s.factors[0] + residual;
    update_multipliers(s, data);
    CHECK((s.dual_split[0] - residual).norm() < 1e-12);
}

TEST_CASE("fit recovers a noiseless rank-1 two-view matrix") {
    std::mt19937_64 rng(71);
    Vector v1 = random_gaussian(8, 1, rng);
    v1 /= v1.norm();
    Vector v2 = random_gaussian(6, 1, rng);
    v2 /= v2.norm();
    const Matrix x = 2.5 * v1 * v2.transpose();
    DataCollection data =
        build_collection({{1, 8}, {2, 6}}, {make_observed({1, 2, 1}, x)});

    Hyperparams h;
    h.eps_abs = 1e-14;
    h.eps_rel = 1e-12;
    const SolverState init = random_init(data, 1, 5);
    const FitResult res = fit(data, h, init);
    CHECK(res.converged);
    for (const Real rn : res.split_residuals) CHECK(rn < 1e-6);
    for (const Real rn : res.signal_residuals) CHECK(rn < 1e-6);
    const Matrix model =
        (res.state.factors[0] * res.state.scales[0].asDiagonal()) *
        res.state.factors[1].transpose();
    CHECK((x - model).norm() / x.norm() < 1e-3);
}

TEST_CASE("fit converges in two sweeps from an exact stationary point") {
    std::mt19937_64 rng(73);
    DataCollection data = tiny_data(rng);
    SolverState truth = random_init(data, 2, 11);
    data.matrices[0].values =
        (truth.factors[0] * truth.scales[0].asDiagonal()) *
        truth.factors[1].transpose();
    data.matrices[0].mask.setConstant(true);
    data.matrices[0].n_obs = 6;
    truth.signals[0] = data.matrices[0].values;

    const FitResult res = fit(data, Hyperparams{}, truth);
    CHECK(res.converged);
    CHECK(res.iterations <= 2);
}

TEST_CASE("fit maintains manifold invariants every sweep") {
    std::mt19937_64 rng(79);
    const DataCollection data = tiny_data(rng);
    Hyperparams h;
    h.lambda1 = 0.1;
    h.lambda2 = 0.05;
    h.max_iter = 25;
    h.eps_abs = 0.0;
    h.eps_rel = 0.0;  // run all 25 sweeps
    const FitResult res = fit(data, h, random_init(data, 2, 19));
    CHECK(res.iterations == 25);
    for (const Matrix& v : res.state.factors) {
        CHECK((v.transpose() * v - Matrix::Identity(2, 2)).norm() < 1e-8);
    }
    for (const Matrix& u : res.state.sparse_factors) {
        for (Index c = 0; c < u.cols(); ++c) {
            CHECK(std::abs(u.col(c).norm() - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("fit matches truncated SVD on a single matrix without penalties") {
    std::mt19937_64 rng(83);
    const Index p1 = 12, p2 = 9, k = 3;
    // Planted low-rank signal plus noise keeps the spectrum separated.
    Matrix x = random_gaussian(p1, k, rng) * random_gaussian(k, p2, rng) +
               0.1 * random_gaussian(p1, p2, rng);
    DataCollection data =
        build_collection({{1, p1}, {2, p2}}, {make_observed({1, 2, 1}, x)});

    Hyperparams h;
    h.eps_abs = 1e-14;
    h.eps_rel = 1e-12;
    InitConfig cfg;
    cfg.k = k;
    cfg.n_init = 3;
    cfg.seed = 4;
    const BestInit init = best_of_restarts(data, cfg, h);
    const FitResult res = fit(data, h, init.initial);

    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Matrix truncated = svd.matrixU().leftCols(k) *
                             svd.singularValues().head(k).asDiagonal() *
                             svd.matrixV().leftCols(k).transpose();
    const Matrix model =
        (res.state.factors[0] * res.state.scales[0].asDiagonal()) *
        res.state.factors[1].transpose();
    CHECK((model - truncated).norm() / x.norm() < 1e-3);
}

TEST_CASE("fit is deterministic") {
    std::mt19937_64 rng(89);
    const DataCollection data = tiny_data(rng);
    Hyperparams h;
    h.lambda1 = 0.2;
    h.lambda2 = 0.1;
    h.max_iter = 60;
    const SolverState init = random_init(data, 2, 23);
    const FitResult a = fit(data, h, init);
    const FitResult b = fit(data, h, init);
    REQUIRE(a.lagrangian_trace.size() == b.lagrangian_trace.size());
    for (size_t i = 0; i < a.lagrangian_trace.size(); ++i) {
        CHECK(a.lagrangian_trace[i] == b.lagrangian_trace[i]);
    }
    CHECK((a.state.factors[0] - b.state.factors[0]).norm() == 0.0);
}

TEST_CASE("fit rejects invalid configuration and guards divergence") {
    std::mt19937_64 rng(97);
    const DataCollection data = tiny_data(rng);
    Hyperparams h;
    h.rho = 3.0;  // below bound
    CHECK_THROWS_AS(fit(data, h, random_init(data, 2, 1)), InvalidRho);

    SolverState bad = random_init(data, 2, 1);
    bad.signals[0](0, 0) = std::numeric_limits<Real>::quiet_NaN();
    CHECK_THROWS_AS(fit(data, Hyperparams{}, bad), NonFiniteValue);
}
