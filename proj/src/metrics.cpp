#include "solrcmf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace solrcmf {

namespace {

Real observed_sq_norm(const ObservedMatrix& x) {
    // Unobserved values are stored as zero.
    return x.values.squaredNorm();
}

bool share_view(const MatrixKey& a, const MatrixKey& b) {
    return a.row_view == b.row_view || a.row_view == b.col_view ||
           a.col_view == b.row_view || a.col_view == b.col_view;
}

}  // namespace

Real proportion_of_variation(const FitResult& fit, const DataCollection& data,
                             const MatrixKey& key) {
    const Index kk = data.index_of(key);
    const Real data_norm2 = observed_sq_norm(data.matrices[static_cast<size_t>(kk)]);
    if (data_norm2 == 0.0) {
        throw ZeroDataNorm("matrix " + key.str() + " has zero observed norm");
    }
    return fit.state.scales[static_cast<size_t>(kk)].squaredNorm() / data_norm2;
}

Real directed_r2(const FitResult& fit, const DataCollection& data,
                 const MatrixKey& dep, const MatrixKey& pred) {
    if (!share_view(dep, pred)) {
        throw NoSharedView("matrices " + dep.str() + " and " + pred.str() +
                           " have no view in common");
    }
    const Index kd = data.index_of(dep);
    const Index kp = data.index_of(pred);
    const Real data_norm2 = observed_sq_norm(data.matrices[static_cast<size_t>(kd)]);
    if (data_norm2 == 0.0) {
        throw ZeroDataNorm("matrix " + dep.str() + " has zero observed norm");
    }
    const Vector& d_dep = fit.state.scales[static_cast<size_t>(kd)];
    const Vector& d_pred = fit.state.scales[static_cast<size_t>(kp)];
    Real num = 0.0;
    for (Index l = 0; l < d_dep.size(); ++l) {
        if (d_pred(l) != 0.0) num += d_dep(l) * d_dep(l);
    }
    return num / data_norm2;
}

NoiseEstimate estimate_noise(const FitResult& fit, const DataCollection& data,
                             const MatrixKey& key) {
    const Index kk = data.index_of(key);
    const size_t sk = static_cast<size_t>(kk);
    const ObservedMatrix& x = data.matrices[sk];
    const Matrix& vi = fit.state.factors[static_cast<size_t>(key.row_view - 1)];
    const Matrix& vj = fit.state.factors[static_cast<size_t>(key.col_view - 1)];
    const Matrix model = (vi * fit.state.scales[sk].asDiagonal()) * vj.transpose();

    NoiseEstimate est;
    const Real resid2 =
        x.mask.select(x.values - model, Matrix::Zero(x.rows(), x.cols())).squaredNorm();
    est.sigma2_hat = resid2 / static_cast<Real>(x.n_obs);
    const Real signal2 = fit.state.scales[sk].squaredNorm();
    est.snr_hat = est.sigma2_hat > 0.0
                      ? signal2 / (static_cast<Real>(x.rows() * x.cols()) * est.sigma2_hat)
                      : std::numeric_limits<Real>::infinity();
    return est;
}

int estimated_rank(const FitResult& fit, const DataCollection& data,
                   const MatrixKey& key, Real tol) {
    const Vector& d = fit.state.scales[static_cast<size_t>(data.index_of(key))];
    return static_cast<int>((d.array().abs() > tol).count());
}

int shared_rank(const FitResult& fit, const DataCollection& data,
                const MatrixKey& a, const MatrixKey& b, Real tol) {
    const Vector& da = fit.state.scales[static_cast<size_t>(data.index_of(a))];
    const Vector& db = fit.state.scales[static_cast<size_t>(data.index_of(b))];
    return static_cast<int>(
        ((da.array().abs() > tol) && (db.array().abs() > tol)).count());
}

VariationReport make_variation_report(const FitResult& fit,
                                      const DataCollection& data) {
    VariationReport report;
    for (const auto& m : data.matrices) {
        report.keys.push_back(m.key);
        report.variation.push_back(proportion_of_variation(fit, data, m.key));
        report.noise.push_back(estimate_noise(fit, data, m.key));
    }
    for (const auto& dep : data.matrices) {
        for (const auto& pred : data.matrices) {
            if (dep.key == pred.key || !share_view(dep.key, pred.key)) continue;
            report.directed.push_back(
                {dep.key, pred.key, directed_r2(fit, data, dep.key, pred.key)});
        }
    }
    return report;
}

FactorMatching match_factors(const Matrix& est, const Matrix& truth,
                             Real threshold, bool optimal) {
    if (est.rows() != truth.rows()) {
        throw DimensionMismatch("factor matrices must have equal row counts");
    }
    auto normalized = [](const Matrix& m) {
        Matrix out = m;
        for (Index c = 0; c < out.cols(); ++c) {
            const Real norm = out.col(c).norm();
            if (norm > 0.0) out.col(c) /= norm;
        }
        return out;
    };
    const Matrix e = normalized(est);
    const Matrix t = normalized(truth);
    const Matrix dots = e.transpose() * t;  // est x truth

    FactorMatching matching;
    matching.threshold = threshold;

    if (optimal) {
        // Exhaustive assignment over the smaller side; ranks here are tiny.
        const bool est_small = dots.rows() <= dots.cols();
        const Index ns = est_small ? dots.rows() : dots.cols();
        const Index nl = est_small ? dots.cols() : dots.rows();
        std::vector<Index> perm(static_cast<size_t>(nl));
        std::iota(perm.begin(), perm.end(), Index{0});
        std::vector<Index> best_perm;
        Real best_total = -1.0;
        do {
            Real total = 0.0;
            for (Index s = 0; s < ns; ++s) {
                const Real d = est_small ? dots(s, perm[static_cast<size_t>(s)])
                                         : dots(perm[static_cast<size_t>(s)], s);
                if (std::abs(d) >= threshold) total += std::abs(d);
            }
            if (total > best_total) {
                best_total = total;
                best_perm.assign(perm.begin(), perm.begin() + ns);
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        for (Index s = 0; s < ns; ++s) {
            const Index other = best_perm[static_cast<size_t>(s)];
            const Index ei = est_small ? s : other;
            const Index ti = est_small ? other : s;
            if (std::abs(dots(ei, ti)) >= threshold) {
                matching.pairs.push_back({ei, ti, dots(ei, ti)});
            }
        }
        return matching;
    }

    std::vector<bool> est_used(static_cast<size_t>(dots.rows()), false);
    std::vector<bool> truth_used(static_cast<size_t>(dots.cols()), false);
    const Index n_pairs = std::min(dots.rows(), dots.cols());
    for (Index step = 0; step < n_pairs; ++step) {
        Index bi = -1, bj = -1;
        Real best = -1.0;
        for (Index i = 0; i < dots.rows(); ++i) {
            if (est_used[static_cast<size_t>(i)]) continue;
            for (Index j = 0; j < dots.cols(); ++j) {
                if (truth_used[static_cast<size_t>(j)]) continue;
                if (std::abs(dots(i, j)) > best) {
                    best = std::abs(dots(i, j));
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi < 0 || best < threshold) break;
        est_used[static_cast<size_t>(bi)] = true;
        truth_used[static_cast<size_t>(bj)] = true;
        matching.pairs.push_back({bi, bj, dots(bi, bj)});
    }
    std::sort(matching.pairs.begin(), matching.pairs.end(),
              [](const auto& a, const auto& b) { return a.est < b.est; });
    return matching;
}

std::vector<ConfusionRates> sparsity_confusion(const Mask& est_support,
                                               const Mask& truth_support,
                                               const FactorMatching& matching) {
    if (est_support.rows() != truth_support.rows()) {
        throw DimensionMismatch("support masks must have equal row counts");
    }
    std::vector<ConfusionRates> rates;
    rates.reserve(matching.pairs.size());
    for (const auto& pair : matching.pairs) {
        long tp = 0, fp = 0, fn = 0, tn = 0;
        for (Index r = 0; r < est_support.rows(); ++r) {
            const bool e = est_support(r, pair.est);
            const bool t = truth_support(r, pair.truth);
            if (e && t) ++tp;
            else if (e && !t) ++fp;
            else if (!e && t) ++fn;
            else ++tn;
        }
        ConfusionRates cr;
        cr.est_column = pair.est;
        cr.truth_column = pair.truth;
        cr.tpr = tp + fn > 0 ? static_cast<Real>(tp) / static_cast<Real>(tp + fn) : 1.0;
        cr.fpr = fp + tn > 0 ? static_cast<Real>(fp) / static_cast<Real>(fp + tn) : 0.0;
        rates.push_back(cr);
    }
    return rates;
}

StructureGraph structure_graph(const FitResult& fit, const DataCollection& data) {
    StructureGraph graph;
    for (const auto& dep : data.matrices) {
        for (const auto& pred : data.matrices) {
            if (dep.key == pred.key || !share_view(dep.key, pred.key)) continue;
            const Real w = directed_r2(fit, data, dep.key, pred.key);
            if (w > 0.0) graph.edges.push_back({dep.key, pred.key, w});
        }
    }
    return graph;
}

void canonicalize_signs(FitResult& fit, const DataCollection& data) {
    SolverState& state = fit.state;
    const Index k = state.k;
    const size_t n_views = state.factors.size();

    for (Index l = 0; l < k; ++l) {
        // Keys where this factor is active, in lexicographic order.
        std::vector<Index> active;
        for (Index kk = 0; kk < data.n_matrices(); ++kk) {
            if (state.scales[static_cast<size_t>(kk)](l) != 0.0) active.push_back(kk);
        }
        std::sort(active.begin(), active.end(), [&](Index a, Index b) {
            return data.matrices[static_cast<size_t>(a)].key <
                   data.matrices[static_cast<size_t>(b)].key;
        });

        // 0 = undecided, otherwise the sign applied to the view's column.
        std::vector<int> sign(n_views, 0);
        auto resolve = [&]() {
            bool changed = true;
            while (changed) {
                changed = false;
                for (const Index kk : active) {
                    const MatrixKey& key = data.matrices[static_cast<size_t>(kk)].key;
                    const size_t ri = static_cast<size_t>(key.row_view - 1);
                    const size_t ci = static_cast<size_t>(key.col_view - 1);
                    const Real d = state.scales[static_cast<size_t>(kk)](l);
                    const int want = d < 0 ? -1 : 1;
                    if (sign[ri] != 0 && sign[ci] == 0) {
                        sign[ci] = want * sign[ri];
                        changed = true;
                    } else if (sign[ci] != 0 && sign[ri] == 0) {
                        sign[ri] = want * sign[ci];
                        changed = true;
                    }
                }
            }
        };
        for (const Index kk : active) {
            const MatrixKey& key = data.matrices[static_cast<size_t>(kk)].key;
            const size_t ri = static_cast<size_t>(key.row_view - 1);
            const size_t ci = static_cast<size_t>(key.col_view - 1);
            if (sign[ri] != 0 || sign[ci] != 0) continue;  // component handled
            // New connected component: the reference key's row view anchors
            // the component, the column view absorbs the reference sign.
            sign[ri] = 1;
            sign[ci] = state.scales[static_cast<size_t>(kk)](l) < 0 ? -1 : 1;
            resolve();
        }

        for (size_t v = 0; v < n_views; ++v) {
            if (sign[v] >= 0) continue;
            state.factors[v].col(l) = -state.factors[v].col(l);
            state.sparse_factors[v].col(l) = -state.sparse_factors[v].col(l);
            state.slack[v].col(l) = -state.slack[v].col(l);
            state.dual_split[v].col(l) = -state.dual_split[v].col(l);
        }
        for (Index kk = 0; kk < data.n_matrices(); ++kk) {
            const MatrixKey& key = data.matrices[static_cast<size_t>(kk)].key;
            const int si = sign[static_cast<size_t>(key.row_view - 1)] < 0 ? -1 : 1;
            const int sj = sign[static_cast<size_t>(key.col_view - 1)] < 0 ? -1 : 1;
            state.scales[static_cast<size_t>(kk)](l) *= static_cast<Real>(si * sj);
        }
    }
}

}  // namespace solrcmf
