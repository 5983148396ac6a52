#include <doctest.h>

#include <cmath>
#include <random>

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

Real oblique_objective(const Vector& u, const Vector& m, Real w) {
    return -u.dot(m) + w * u.cwiseAbs().sum();
}

// Independent minimizer for the oblique prox: dense sweep over the unit
// circle for p = 2, random search plus all signed unit vectors for p = 3.
Real oblique_oracle_min(const Vector& m, Real w, std::mt19937_64& rng) {
    Real best = std::numeric_limits<Real>::infinity();
    const Index p = m.size();
    if (p == 2) {
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const Real angle = 2.0 * M_PI * i / n;
            Vector u(2);
            u << std::cos(angle), std::sin(angle);
            best = std::min(best, oblique_objective(u, m, w));
        }
    } else {
        std::normal_distribution<Real> normal(0.0, 1.0);
        for (int i = 0; i < 50000; ++i) {
            Vector u(p);
            for (Index r = 0; r < p; ++r) u(r) = normal(rng);
            u /= u.norm();
            best = std::min(best, oblique_objective(u, m, w));
        }
    }
    for (Index j = 0; j < p; ++j) {
        Vector u = Vector::Zero(p);
        u(j) = 1.0;
        best = std::min(best, oblique_objective(u, m, w));
        u(j) = -1.0;
        best = std::min(best, oblique_objective(u, m, w));
    }
    return best;
}

// Brute-force minimizer of 1/2 (d - target)^2 + beta w |d|: a grid search
// locates the basin, then bisection on the (monotone) subgradient
// g(d) = d - target + beta w sign(d) pins the root. Value comparisons on a
// grid alone stall around sqrt(machine eps) because the objective is flat
// at the minimum.
Real diag_entry_oracle(Real target, Real beta_w) {
    auto objective = [&](Real d) {
        return 0.5 * (d - target) * (d - target) + beta_w * std::abs(d);
    };
    const Real span = std::abs(target) + 1.0;
    Real best = 0.0;
    Real best_value = std::numeric_limits<Real>::infinity();
    const int n = 4000;
    for (int i = 0; i <= n; ++i) {
        const Real d = -span + 2.0 * span * i / n;
        const Real value = objective(d);
        if (value < best_value) {
            best_value = value;
            best = d;
        }
    }
    const Real step = 2.0 * span / n;
    Real lo = best - 2 * step;
    Real hi = best + 2 * step;
    if (objective(0.0) <= best_value && lo < 0.0 && hi > 0.0) {
        // The kink may hold the minimum; test it against the smooth root.
        if (std::abs(-target + beta_w) >= 0 && std::abs(target) <= beta_w) {
            return 0.0;
        }
    }
    auto subgradient = [&](Real d) {
        return d - target + (d >= 0 ? beta_w : -beta_w);
    };
    for (int i = 0; i < 200; ++i) {
        const Real mid = 0.5 * (lo + hi);
        if (subgradient(mid) > 0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    const Real root = 0.5 * (lo + hi);
    return objective(0.0) < objective(root) ? 0.0 : root;
}

}  // namespace

TEST_CASE("soft_threshold basic values and oddness") {
    CHECK(soft_threshold(3.0, 1.0) == doctest::Approx(2.0));
    CHECK(soft_threshold(-0.5, 1.0) == 0.0);
    CHECK(soft_threshold(-2.0, 0.5) == doctest::Approx(-1.5));
    CHECK(soft_threshold(0.0, 0.0) == 0.0);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<Real> unif(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        const Real x = unif(rng);
        const Real beta = std::abs(unif(rng));
        CHECK(soft_threshold(-x, beta) == doctest::Approx(-soft_threshold(x, beta)));
    }
}

TEST_CASE("project_stiefel keeps points on the manifold fixed") {
    Matrix eye = Matrix::Identity(3, 2);
    CHECK((project_stiefel(eye) - eye).norm() < 1e-12);
    CHECK((project_stiefel(2.0 * eye) - eye).norm() < 1e-12);

    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const Matrix v = haar_orthonormal(6, 3, rng);
        CHECK((project_stiefel(v) - v).norm() < 1e-10);
    }
}

TEST_CASE("project_stiefel output is orthonormal and optimal") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const Index p = 2 + static_cast<Index>(rng() % 5);  // up to 6
        const Index k = 1 + static_cast<Index>(rng() % std::min<Index>(3, p));
        const Matrix m = random_gaussian(p, k, rng);
        const Matrix q = project_stiefel(m);
        CHECK((q.transpose() * q - Matrix::Identity(k, k)).norm() < 1e-10);

        // <Q, M> maximization oracle: no random Stiefel point does better.
        const Real q_score = (q.array() * m.array()).sum();
        Real best_random = -std::numeric_limits<Real>::infinity();
        for (int s = 0; s < 10000; ++s) {
            const Matrix w = haar_orthonormal(p, k, rng);
            best_random = std::max(best_random, (w.array() * m.array()).sum());
        }
        CHECK(q_score >= best_random - 1e-9);
    }
}

TEST_CASE("prox_diag_l1 worked example and trivial cases") {
    Matrix m(2, 2);
    m << 2.0, 1.0, 1.0, -0.3;
    Vector w = Vector::Ones(2);
    const Vector d = prox_diag_l1(m, w, 0.5);
    CHECK(d(0) == doctest::Approx(1.5));
    CHECK(d(1) == 0.0);

    const Vector d0 = prox_diag_l1(m, w, 0.0);
    CHECK(d0(0) == doctest::Approx(2.0));
    CHECK(d0(1) == doctest::Approx(-0.3));

    Matrix small = (Matrix(2, 2) << 0.2, 0.0, 0.0, -0.1).finished();
    const Vector shrunk = prox_diag_l1(small, w, 0.5);
    CHECK(shrunk.isZero(0.0));
}

TEST_CASE("prox_diag_l1 agrees with a grid-search oracle") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<Real> unif(-2.0, 2.0);
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix m = random_gaussian(3, 3, rng);
        Vector w(3);
        for (Index l = 0; l < 3; ++l) w(l) = std::abs(unif(rng));
        const Real beta = std::abs(unif(rng));
        const Vector d = prox_diag_l1(m, w, beta);
        for (Index l = 0; l < 3; ++l) {
            const Real oracle = diag_entry_oracle(m(l, l), beta * w(l));
            CHECK(std::abs(d(l) - oracle) < 1e-8);
        }
    }
}

TEST_CASE("prox_oblique_l1 cases") {
    {
        Vector m(2);
        m << 1.0, 0.2;
        auto [u, kind] = prox_oblique_l1(m, 0.5);
        CHECK(kind == ObliqueCase::Interior);
        CHECK(u(0) == doctest::Approx(1.0));
        CHECK(u(1) == doctest::Approx(0.0));
    }
    {
        Vector m(2);
        m << 0.3, 0.1;
        auto [u, kind] = prox_oblique_l1(m, 0.5);
        CHECK(kind == ObliqueCase::Corner);
        CHECK(u(0) == doctest::Approx(1.0));
        CHECK(u(1) == doctest::Approx(0.0));
    }
    {
        Vector m = Vector::Zero(3);
        auto [u, kind] = prox_oblique_l1(m, 0.3);
        CHECK(kind == ObliqueCase::ZeroInput);
        CHECK(u(0) == doctest::Approx(1.0));
        CHECK(u.tail(2).isZero(0.0));
    }
    {
        Vector m(2);
        m << -0.5, 0.2;
        auto [u, kind] = prox_oblique_l1(m, 0.5);
        CHECK(kind == ObliqueCase::Boundary);
        CHECK(u(0) == doctest::Approx(-1.0));
    }
}

TEST_CASE("prox_oblique_l1 optimality against search oracles") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<Real> unif(-1.5, 1.5);
    std::uniform_real_distribution<Real> wdist(0.0, 1.2);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index p = trial % 2 == 0 ? 2 : 3;
        Vector m(p);
        for (Index r = 0; r < p; ++r) m(r) = unif(rng);
        const Real w = wdist(rng);
        auto [u, kind] = prox_oblique_l1(m, w);
        CHECK(std::abs(u.norm() - 1.0) < 1e-12);
        const Real oracle = oblique_oracle_min(m, w, rng);
        CHECK(oblique_objective(u, m, w) <= oracle + 1e-6);
    }
}

TEST_CASE("oblique weight guard") {
    CHECK(oblique_weight_too_large(0.5, 4));
    CHECK_FALSE(oblique_weight_too_large(0.4, 4));
}
