#include "solrcmf/modelselect.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "solrcmf/parallel.hpp"

namespace solrcmf {

bool StructurePattern::same_supports(const StructurePattern& other) const {
    if (scale_support.size() != other.scale_support.size() ||
        factor_support.size() != other.factor_support.size()) {
        return false;
    }
    for (size_t i = 0; i < scale_support.size(); ++i) {
        if ((scale_support[i] != other.scale_support[i]).any()) return false;
    }
    for (size_t v = 0; v < factor_support.size(); ++v) {
        if ((factor_support[v] != other.factor_support[v]).any()) return false;
    }
    return true;
}

int StructurePattern::sparsity_score() const {
    int zeros = 0;
    for (const auto& s : scale_support) {
        zeros += static_cast<int>(s.size() - s.count());
    }
    for (const auto& f : factor_support) {
        zeros += static_cast<int>(f.size() - f.count());
    }
    return zeros;
}

SupportClamp StructurePattern::clamp() const {
    return SupportClamp{scale_support, factor_support};
}

std::vector<std::pair<Real, Real>> sample_hyperparams(int n, Real lo, Real hi,
                                                      std::uint64_t seed) {
    if (!(lo > 0.0) || !(lo < hi)) {
        throw BadRange("hyperparameter range requires 0 < lo < hi");
    }
    if (n < 1) {
        throw BadRange("grid size must be at least 1");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> unif(std::log(lo), std::log(hi));
    std::vector<std::pair<Real, Real>> pairs;
    pairs.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Real l1 = std::exp(unif(rng));
        const Real l2 = std::exp(unif(rng));
        pairs.emplace_back(l1, l2);
    }
    return pairs;
}

void apply_consistency_closure(StructurePattern& pattern,
                               const DataCollection& data) {
    for (Index kk = 0; kk < data.n_matrices(); ++kk) {
        const MatrixKey& key = data.matrices[static_cast<size_t>(kk)].key;
        auto& d_sup = pattern.scale_support[static_cast<size_t>(kk)];
        const Mask& row_sup =
            pattern.factor_support[static_cast<size_t>(key.row_view - 1)];
        const Mask& col_sup =
            pattern.factor_support[static_cast<size_t>(key.col_view - 1)];
        for (Index l = 0; l < d_sup.size(); ++l) {
            if (!row_sup.col(l).any() || !col_sup.col(l).any()) {
                d_sup(l) = false;
            }
        }
    }
}

StructurePattern extract_structure(const FitResult& fit,
                                   const DataCollection& data, Real tol) {
    StructurePattern pattern;
    pattern.scale_support.reserve(fit.state.scales.size());
    for (const auto& d : fit.state.scales) {
        pattern.scale_support.push_back(d.array().abs() > tol);
    }
    pattern.factor_support.reserve(fit.state.sparse_factors.size());
    for (const auto& u : fit.state.sparse_factors) {
        pattern.factor_support.push_back(u.array().abs() > tol);
    }
    apply_consistency_closure(pattern, data);
    return pattern;
}

DataCollection masked_for_fold(const DataCollection& data,
                               const FoldAssignment& folds, int fold) {
    DataCollection masked = data;
    for (size_t kk = 0; kk < masked.matrices.size(); ++kk) {
        ObservedMatrix& m = masked.matrices[kk];
        const auto& labels = folds.labels[kk];
        for (Index c = 0; c < m.cols(); ++c) {
            for (Index r = 0; r < m.rows(); ++r) {
                if (labels(r, c) == fold) {
                    m.mask(r, c) = false;
                    m.values(r, c) = 0.0;
                }
            }
        }
        m.n_obs = m.mask.count();
    }
    return masked;
}

namespace {

Hyperparams unpenalized(Hyperparams h) {
    h.lambda1 = 0.0;
    h.lambda2 = 0.0;
    return h;
}

}  // namespace

CVRecord cv_score(const DataCollection& data, const StructurePattern& pattern,
                  const FoldAssignment& folds, const SolverState& init,
                  const Hyperparams& h) {
    CVRecord record;
    record.pattern = pattern;
    record.sparsity_score = pattern.sparsity_score();
    record.fold_mses.resize(static_cast<size_t>(folds.n_folds));

    const SupportClamp clamp = pattern.clamp();
    const Hyperparams h_cv = unpenalized(h);
    parallel_for(folds.n_folds, [&](int f0) {
        const int fold = f0 + 1;
        const DataCollection masked = masked_for_fold(data, folds, fold);
        const FitResult fitted = fit(masked, h_cv, init, &clamp);

        Real sq_sum = 0.0;
        long count = 0;
        for (Index kk = 0; kk < data.n_matrices(); ++kk) {
            const size_t sk = static_cast<size_t>(kk);
            const ObservedMatrix& x = data.matrices[sk];
            const MatrixKey& key = x.key;
            const Matrix& vi =
                fitted.state.factors[static_cast<size_t>(key.row_view - 1)];
            const Matrix& vj =
                fitted.state.factors[static_cast<size_t>(key.col_view - 1)];
            const Matrix pred =
                (vi * fitted.state.scales[sk].asDiagonal()) * vj.transpose();
            const auto& labels = folds.labels[sk];
            for (Index c = 0; c < x.cols(); ++c) {
                for (Index r = 0; r < x.rows(); ++r) {
                    if (x.mask(r, c) && labels(r, c) == fold) {
                        const Real e = x.values(r, c) - pred(r, c);
                        sq_sum += e * e;
                        ++count;
                    }
                }
            }
        }
        if (count == 0) {
            throw EmptyFold("fold " + std::to_string(fold) +
                            " holds no observed entries");
        }
        record.fold_mses[static_cast<size_t>(f0)] = sq_sum / static_cast<Real>(count);
    });

    const Real k_folds = static_cast<Real>(folds.n_folds);
    Real mean = 0.0;
    for (const Real mse : record.fold_mses) mean += mse;
    mean /= k_folds;
    Real var = 0.0;
    for (const Real mse : record.fold_mses) var += (mse - mean) * (mse - mean);
    var = folds.n_folds > 1 ? var / (k_folds - 1.0) : 0.0;
    record.mean_mse = mean;
    record.se = std::sqrt(var / k_folds);
    return record;
}

const CVRecord& select_one_se(const std::vector<CVRecord>& records) {
    if (records.empty()) {
        throw EmptyInput("no cross-validation records to select from");
    }
    size_t best = 0;
    for (size_t i = 1; i < records.size(); ++i) {
        if (records[i].mean_mse < records[best].mean_mse) best = i;
    }
    const Real cutoff = records[best].mean_mse + records[best].se;

    size_t chosen = best;
    for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].mean_mse > cutoff) continue;
        const CVRecord& cand = records[i];
        const CVRecord& cur = records[chosen];
        if (cand.sparsity_score > cur.sparsity_score ||
            (cand.sparsity_score == cur.sparsity_score &&
             (cand.pattern.lambda1 > cur.pattern.lambda1 ||
              (cand.pattern.lambda1 == cur.pattern.lambda1 &&
               cand.pattern.lambda2 > cur.pattern.lambda2)))) {
            chosen = i;
        }
    }
    return records[chosen];
}

FitResult refit_fixed_pattern(const DataCollection& data,
                              const StructurePattern& pattern,
                              const SolverState& init, const Hyperparams& h) {
    const SupportClamp clamp = pattern.clamp();
    return fit(data, unpenalized(h), init, &clamp);
}

SelectionResult select_model(const DataCollection& data,
                             const std::vector<std::pair<Real, Real>>& grid,
                             const FoldAssignment& folds,
                             const SolverState& init, const Hyperparams& h) {
    if (grid.empty()) {
        throw EmptyInput("hyperparameter grid is empty");
    }

    SelectionResult out;
    out.grid_patterns.resize(grid.size());
    parallel_for(static_cast<int>(grid.size()), [&](int g) {
        Hyperparams hg = h;
        hg.lambda1 = grid[static_cast<size_t>(g)].first;
        hg.lambda2 = grid[static_cast<size_t>(g)].second;
        const FitResult fitted = fit(data, hg, init);
        StructurePattern pattern = extract_structure(fitted, data);
        pattern.lambda1 = hg.lambda1;
        pattern.lambda2 = hg.lambda2;
        out.grid_patterns[static_cast<size_t>(g)] = std::move(pattern);
    });

    // Score each distinct zero pattern once.
    std::vector<StructurePattern> unique;
    for (const auto& pattern : out.grid_patterns) {
        const bool seen = std::any_of(
            unique.begin(), unique.end(),
            [&](const StructurePattern& u) { return u.same_supports(pattern); });
        if (!seen) unique.push_back(pattern);
    }

    out.records.resize(unique.size());
    parallel_for(static_cast<int>(unique.size()), [&](int i) {
        out.records[static_cast<size_t>(i)] =
            cv_score(data, unique[static_cast<size_t>(i)], folds, init, h);
    });

    const CVRecord& chosen = select_one_se(out.records);
    out.pattern = chosen.pattern;
    out.refit = refit_fixed_pattern(data, out.pattern, init, h);
    return out;
}

}  // namespace solrcmf
