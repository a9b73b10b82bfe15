#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>
#include <gamsel/fit.hpp>

namespace gamsel {

enum class CvMode { kRegenerate, kTransform };

enum class CvMeasure { kDefault, kMse, kDeviance, kMisclassification };

inline std::string to_string(CvMode m) { return m == CvMode::kRegenerate ? "regenerate" : "transform"; }

inline CvMode cv_mode_from_string(const std::string& s)
{
    if (s == "regenerate") return CvMode::kRegenerate;
    if (s == "transform") return CvMode::kTransform;
    throw InvalidInput("unknown cv mode '" + s + "' (expected regenerate or transform)");
}

inline std::string to_string(CvMeasure m)
{
    switch (m) {
    case CvMeasure::kMse: return "mse";
    case CvMeasure::kDeviance: return "deviance";
    case CvMeasure::kMisclassification: return "misclassification";
    default: return "default";
    }
}

inline CvMeasure cv_measure_from_string(const std::string& s)
{
    if (s == "default") return CvMeasure::kDefault;
    if (s == "mse") return CvMeasure::kMse;
    if (s == "deviance") return CvMeasure::kDeviance;
    if (s == "misclassification" || s == "class") return CvMeasure::kMisclassification;
    throw InvalidInput("unknown cv measure '" + s + "'");
}

struct CvResult
{
    std::vector<double> lambda_grid;
    Vec mean_error;
    Vec se;
    Index index_min = 0;
    Index index_1se = 0;
    Mat fold_errors; // K x L
    Mat oof_eta;     // n x L out-of-fold linear predictors
    std::vector<Index> folds;
    CvMode mode = CvMode::kRegenerate;
    CvMeasure measure = CvMeasure::kMse;
    double lambda_max = 0.0;
};

/**
 * Fold labels in [0, K). Rows are shuffled with a seeded Mersenne twister and
 * dealt round-robin; when y is given the two classes are shuffled separately
 * and dealt in sequence so every fold gets its share of each class.
 */
inline std::vector<Index> kfold_split(Index n, Index K, std::uint64_t seed, const Vec* y = nullptr)
{
    if (K < 2 || K > n) {
        throw OutOfRange("number of folds must lie in [2, " + std::to_string(n) + "], got " + std::to_string(K));
    }
    if (y && y->size() != n) throw InvalidInput("kfold_split: response length mismatch");
    std::mt19937_64 rng(seed);
    auto shuffle = [&](std::vector<Index>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(v[i - 1], v[pick(rng)]);
        }
    };
    std::vector<Index> order;
    if (y) {
        std::vector<Index> pos, neg;
        for (Index i = 0; i < n; ++i) ((*y)[i] == 1.0 ? pos : neg).push_back(i);
        shuffle(pos);
        shuffle(neg);
        order = pos;
        order.insert(order.end(), neg.begin(), neg.end());
    } else {
        order.resize(n);
        std::iota(order.begin(), order.end(), Index{0});
        shuffle(order);
    }
    std::vector<Index> folds(n);
    for (Index i = 0; i < n; ++i) folds[order[i]] = i % K;
    return folds;
}

/// Smallest index (largest lambda) whose mean error is within one se of the minimum.
inline Index select_lambda_1se(const Vec& mean_error, const Vec& se, Index index_min)
{
    const double bound = mean_error[index_min] + se[index_min];
    for (Index l = 0; l < mean_error.size(); ++l)
        if (mean_error[l] <= bound) return l;
    return index_min;
}

inline Index select_lambda_1se(const CvResult& r) { return select_lambda_1se(r.mean_error, r.se, r.index_min); }

/// Held-out error of one prediction column.
inline double cv_error(CvMeasure measure, const Vec& y, const Vec& eta)
{
    const Index n = y.size();
    if (n == 0) return 0.0;
    switch (measure) {
    case CvMeasure::kMse: return (y - eta).squaredNorm() / static_cast<double>(n);
    case CvMeasure::kDeviance: return 2.0 * binomial_nll(y, eta) / static_cast<double>(n);
    case CvMeasure::kMisclassification: {
        double wrong = 0.0;
        for (Index i = 0; i < n; ++i) wrong += (eta[i] > 0.0 ? 1.0 : 0.0) != y[i];
        return wrong / static_cast<double>(n);
    }
    default: throw ContractViolation("cv_error: unresolved measure");
    }
}

namespace detail {

inline Dataset take_rows(const Dataset& d, const std::vector<Index>& rows)
{
    Dataset out;
    out.names = d.names;
    out.X.resize(static_cast<Index>(rows.size()), d.p());
    out.y.resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Index>(i)) = d.X.row(rows[i]);
        out.y[static_cast<Index>(i)] = d.y[rows[i]];
    }
    return out;
}

// Fold basis from the full-data basis; a block that the retained rows cannot
// support is downgraded to its linear column.
inline FoldBasis fold_basis(const PseudoSplineBasis& b, const std::vector<Index>& keep)
{
    try {
        return subset_basis(b, keep);
    } catch (const NumericalDegeneracy&) {
        PseudoSplineBasis lin = b;
        lin.U = b.U.leftCols(1);
        lin.D = b.D.head(1);
        lin.map.transform = b.map.transform.leftCols(1);
        return subset_basis(lin, keep);
    }
}

inline Mat transform_fold_eta(const Dataset& data, const PreparedModel& full, const GamselConfig& cfg,
                              const std::vector<Index>& train, const std::vector<Index>& test,
                              const std::vector<double>& grid)
{
    const Index p = data.p();
    const double scale = static_cast<double>(train.size()) / static_cast<double>(data.n());
    std::vector<FoldBasis> fb(p);
    for (Index j = 0; j < p; ++j) fb[j] = fold_basis(full.bases[j], train);

    Problem pb;
    pb.gamma = cfg.gamma;
    for (Index j = 0; j < p; ++j) {
        Term t;
        t.U = fb[j].U_sub;
        t.D = fb[j].D_sub;
        t.x = t.U.col(0);
        t.constant = full.problem.terms[j].constant || !(t.x.squaredNorm() > 0.0);
        t.psi = t.D.size() > 1 ? full.psi[j] * scale : 0.0;
        pb.terms.push_back(std::move(t));
    }
    Vec y1(static_cast<Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) y1[static_cast<Index>(i)] = data.y[train[i]];
    std::vector<double> scaled(grid);
    for (double& l : scaled) l *= scale;
    const PathResult res = fit_problem(pb, y1, cfg, scaled);

    const Index n0 = static_cast<Index>(test.size());
    std::vector<Mat> U0(p);
    for (Index j = 0; j < p; ++j) {
        Vec x0(n0);
        for (Index i = 0; i < n0; ++i) x0[i] = data.X(test[i], j);
        U0[j] = pb.terms[j].constant ? Mat::Zero(n0, fb[j].m()) : fb[j].evaluate(x0);
    }
    Mat eta(n0, static_cast<Index>(res.points.size()));
    for (std::size_t l = 0; l < res.points.size(); ++l) {
        const GamselState& s = res.points[l].state;
        Vec e = Vec::Constant(n0, s.alpha0);
        for (Index j = 0; j < p; ++j) {
            if (s.alpha[j] != 0.0) e += s.alpha[j] * U0[j].col(0);
            if (s.beta[j].size() > 0) e += U0[j] * s.beta[j];
        }
        eta.col(static_cast<Index>(l)) = e;
    }
    return eta;
}

} // namespace detail

/**
 * K-fold cross-validation on the lambda grid of the full-data fit.
 *
 * regenerate: bases and standardization are rebuilt from each fold's training
 * rows and the grid is multiplied by sqrt(N1/N) to account for unit-norm
 * columns over N1 rows. transform: the full-data bases are restricted to the
 * training rows by subset_basis and lambda and psi are multiplied by N1/N.
 */
inline CvResult cv_path(const Dataset& data, const GamselConfig& cfg, Index K, std::uint64_t seed,
                        CvMode mode = CvMode::kRegenerate, CvMeasure measure = CvMeasure::kDefault)
{
    data.validate();
    cfg.validate(data.p());
    const bool binomial = cfg.family == Family::kBinomial;
    if (measure == CvMeasure::kDefault) measure = binomial ? CvMeasure::kDeviance : CvMeasure::kMse;
    if (!binomial && measure != CvMeasure::kMse) {
        throw InvalidInput("cv measure '" + to_string(measure) + "' requires the binomial family");
    }
    if (binomial) check_binary(data.y);
    else if ((data.y.array() == data.y[0]).all()) throw InvalidInput("response is constant");

    CvResult out;
    out.mode = mode;
    out.measure = measure;
    out.folds = kfold_split(data.n(), K, seed, binomial ? &data.y : nullptr);

    const PreparedModel full = prepare_model(data, cfg);
    const Vec r0 = (data.y.array() - data.y.mean()).matrix();
    out.lambda_max = lambda_max(full.problem, r0, cfg.lambda_max_rule);
    out.lambda_grid = resolve_grid(out.lambda_max, cfg, {});
    const Index L = static_cast<Index>(out.lambda_grid.size());

    GamselConfig inner = cfg;
    inner.threads = 1;
    out.fold_errors = Mat::Zero(K, L);
    out.oof_eta = Mat::Zero(data.n(), L);
    parallel_for(K, cfg.threads, [&](Index k) {
        std::vector<Index> train, test;
        for (Index i = 0; i < data.n(); ++i) (out.folds[i] == k ? test : train).push_back(i);
        Mat eta;
        if (mode == CvMode::kRegenerate) {
            const Dataset tr = detail::take_rows(data, train);
            if (binomial) check_binary(tr.y);
            const double scale = std::sqrt(static_cast<double>(train.size()) / static_cast<double>(data.n()));
            std::vector<double> grid(out.lambda_grid);
            for (double& l : grid) l *= scale;
            const GamselPath path = fit(tr, inner, grid);
            eta = predict(path, detail::take_rows(data, test).X).eta;
        } else {
            eta = detail::transform_fold_eta(data, full, inner, train, test, out.lambda_grid);
        }
        Vec y0(static_cast<Index>(test.size()));
        for (std::size_t i = 0; i < test.size(); ++i) {
            y0[static_cast<Index>(i)] = data.y[test[i]];
            out.oof_eta.row(test[i]) = eta.row(static_cast<Index>(i));
        }
        for (Index l = 0; l < L; ++l) out.fold_errors(k, l) = cv_error(measure, y0, eta.col(l));
    });

    out.mean_error = out.fold_errors.colwise().mean().transpose();
    out.se.resize(L);
    for (Index l = 0; l < L; ++l) {
        const double var = (out.fold_errors.col(l).array() - out.mean_error[l]).square().sum() / static_cast<double>(K - 1);
        out.se[l] = std::sqrt(var / static_cast<double>(K));
    }
    out.mean_error.minCoeff(&out.index_min);
    out.index_1se = select_lambda_1se(out);
    return out;
}

} // namespace gamsel
