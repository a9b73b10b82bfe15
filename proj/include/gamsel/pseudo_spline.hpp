#pragma once
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>
#include <gamsel/jacobi.hpp>
#include <gamsel/ortho_poly.hpp>
#include <gamsel/smoother.hpp>
#include <gamsel/types.hpp>

namespace gamsel {

/**
 * Everything needed to evaluate a pseudo-spline basis at new points.
 *
 * Poly variant: U(x0) = P(x0) * transform, P from the stored recurrence.
 * Q variant:    U(x0) = F(x0) * transform, F the smoothing-spline fits of the
 *               columns of P (so transform already contains R^{-1}).
 */
struct BasisMap
{
    BasisVariant variant = BasisVariant::kPoly;
    OrthoPolyRecurrence recurrence;
    SplineFit q_fit;
    Mat transform; // k x m

    Index m() const { return transform.cols(); }

    Mat evaluate(const Vec& x0) const
    {
        if (!x0.allFinite()) throw InvalidInput("evaluate_basis: non-finite evaluation points");
        if (variant == BasisVariant::kQ && q_fit.knots.size() > 0) return q_fit.evaluate(x0) * transform;
        return recurrence.evaluate(x0) * transform;
    }
};

/**
 * Per-variable orthonormal basis U (n x m, centered columns, first column the
 * unit-norm predictor) with diagonal penalty D: D[0] = 0, D[1] = 1 after
 * rescaling, nondecreasing.
 */
struct PseudoSplineBasis
{
    Mat U;
    Vec D;
    double scale_applied = 1.0;    // D = D_raw / scale_applied
    double smoothing_lambda = 0.0; // smoother lambda behind the basis (0 if linear-only)
    double df = 0.0;               // effective df used
    Index k = 0;                   // effective polynomial basis size (incl. intercept)
    bool constant = false;         // predictor had a single distinct value
    BasisMap map;
    std::vector<std::string> warnings;

    Index m() const { return D.size(); }

    Vec Dstar() const
    {
        Vec out = D;
        out[0] = 1.0;
        return out;
    }

    Mat evaluate(const Vec& x0) const { return map.evaluate(x0); }
};

inline Mat evaluate_basis(const PseudoSplineBasis& basis, const Vec& x0)
{
    return basis.evaluate(x0);
}

namespace detail {

inline PseudoSplineBasis constant_basis(Index n)
{
    PseudoSplineBasis b;
    b.U = Mat::Zero(n, 1);
    b.D = Vec::Zero(1);
    b.k = 1;
    b.constant = true;
    b.map.recurrence.offdiag = Vec::Constant(1, std::sqrt(static_cast<double>(n)));
    b.map.recurrence.shift.resize(0);
    b.map.transform = Mat::Zero(1, 1);
    return b;
}

inline PseudoSplineBasis linear_basis(const OrthoPolyBasis& poly)
{
    PseudoSplineBasis b;
    b.U = poly.values.col(1);
    b.D = Vec::Zero(1);
    b.k = 2;
    b.map.recurrence.shift = poly.recurrence.shift.head(1);
    b.map.recurrence.offdiag = poly.recurrence.offdiag.head(2);
    b.map.transform = Mat::Zero(2, 1);
    b.map.transform(1, 0) = 1.0;
    return b;
}

inline std::string var_label(std::string_view name)
{
    return name.empty() ? std::string("predictor") : "variable '" + std::string(name) + "'";
}

} // namespace detail

/**
 * Pseudo-spline basis for one predictor: project the df-calibrated smoother
 * onto orthogonal polynomials (or their smoothed, re-orthogonalised images
 * for the Q variant), eigendecompose, drop the intercept and rescale D.
 *
 * Unique-value rule: with u distinct values the polynomial basis size is
 * min(k, u - 1) (at least 2) and df is capped at that size; two or fewer
 * distinct values, or df <= 2, give a linear-only basis.
 */
inline PseudoSplineBasis build_pseudo_spline(const Vec& x, Index k, double df, BasisVariant variant,
                                             std::string_view name = {})
{
    const Index n = x.size();
    if (n < 2) throw InvalidInput("build_pseudo_spline: need at least 2 observations");
    if (k < 2) throw InvalidInput("build_pseudo_spline: basis size k must be >= 2");
    if (!x.allFinite()) throw InvalidInput("build_pseudo_spline: non-finite values for " + detail::var_label(name));

    const Index u = count_unique(x);
    if (u < 2) return detail::constant_basis(n);

    Index k_eff = (u == 2) ? 2 : std::max<Index>(2, std::min(k, u - 1));
    const double df_eff = std::min(df, static_cast<double>(k_eff));
    std::vector<std::string> warnings;
    if (k_eff < k) {
        warnings.push_back(detail::var_label(name) + ": basis size reduced from " + std::to_string(k) + " to "
                           + std::to_string(k_eff) + " (" + std::to_string(u) + " distinct values)");
    }
    if (df >= static_cast<double>(k_eff) && k_eff > 2) {
        warnings.push_back(detail::var_label(name) + ": df " + std::to_string(df)
                           + " is not below the basis size; capped");
    }

    const OrthoPolyBasis poly = build_ortho_poly(x, k_eff);
    k_eff = poly.k();
    if (k_eff <= 2 || df_eff <= 2.0) {
        auto b = detail::linear_basis(poly);
        b.warnings = std::move(warnings);
        return b;
    }

    SmootherSpec spec = make_smoother_spec(x);
    calibrate_smoother(spec, df_eff);

    const Mat& P = poly.values;
    const Index t = k_eff - 2; // trailing (nonlinear) block size
    const SplineFit fit = fit_smoother(spec, P.rightCols(t));
    Mat SP(n, t);
    for (Index i = 0; i < n; ++i) SP.row(i) = fit.values.row(spec.row_knot[i]);

    // Z: trailing coordinates of the column space we project onto
    Mat Z, Rinv;
    if (variant == BasisVariant::kPoly) {
        Z = P.rightCols(t);
    } else {
        Eigen::HouseholderQR<Mat> qr(SP);
        Mat R = qr.matrixQR().topRows(t).triangularView<Eigen::Upper>();
        for (Index j = 0; j < t; ++j) {
            if (R(j, j) < 0.0) R.row(j) *= -1.0;
        }
        Rinv = R.triangularView<Eigen::Upper>().solve(Mat::Identity(t, t));
        Z = SP * Rinv;
    }
    Mat SZ;
    if (variant == BasisVariant::kPoly) {
        SZ = SP;
    } else {
        SZ = apply_smoother(spec, Z);
    }
    Mat M = Z.transpose() * SZ;
    M = 0.5 * (M + M.transpose()).eval();

    const SymmetricEigen eig = jacobi_eigen(M);
    Vec d_raw(t);
    for (Index i = 0; i < t; ++i) {
        const double ev = eig.values[i];
        if (!(ev > 0.0) || !(ev < 1.0)) {
            throw NumericalDegeneracy("build_pseudo_spline: projected smoother eigenvalue " + std::to_string(ev)
                                      + " outside (0,1) for " + detail::var_label(name));
        }
        d_raw[i] = 1.0 / ev - 1.0;
    }

    PseudoSplineBasis b;
    b.k = k_eff;
    b.df = df_eff;
    b.smoothing_lambda = spec.lambda;
    b.scale_applied = d_raw[0];
    b.D.resize(t + 1);
    b.D[0] = 0.0;
    b.D.tail(t) = d_raw / b.scale_applied;
    b.D[1] = 1.0;
    b.U.resize(n, t + 1);
    b.U.col(0) = P.col(1);
    b.U.rightCols(t) = Z * eig.vectors;

    b.map.variant = variant;
    b.map.recurrence = poly.recurrence;
    b.map.transform = Mat::Zero(k_eff, t + 1);
    b.map.transform(1, 0) = 1.0;
    if (variant == BasisVariant::kPoly) {
        b.map.transform.bottomRightCorner(t, t) = eig.vectors;
    } else {
        b.map.transform.bottomRightCorner(t, t) = Rinv * eig.vectors;
        // smoothing fits of every column of P; the constant and linear columns
        // pass through the smoother unchanged
        auto& qf = b.map.q_fit;
        const Index N = spec.n_unique();
        qf.knots = spec.unique_knots;
        qf.values.resize(N, k_eff);
        qf.second_derivs = Mat::Zero(N, k_eff);
        std::vector<Index> first_row(N, -1);
        for (Index i = 0; i < n; ++i) {
            if (first_row[spec.row_knot[i]] < 0) first_row[spec.row_knot[i]] = i;
        }
        for (Index r = 0; r < N; ++r) qf.values.row(r).head(2) = P.row(first_row[r]).head(2);
        qf.values.rightCols(t) = fit.values;
        qf.second_derivs.rightCols(t) = fit.second_derivs;
    }
    b.warnings = std::move(warnings);
    return b;
}

/**
 * Quadratic-penalty multiplier psi with sum_i 1/(1 + psi D[i]) = df_target.
 * Returns 0 when df_target = m and +infinity when df_target equals the number
 * of unpenalised (zero) entries.
 */
inline double calibrate_psi(const Vec& D, double df_target)
{
    const Index m = D.size();
    if (m < 1) throw InvalidInput("calibrate_psi: empty penalty");
    const double eps = 1e-12;
    if (!(df_target >= 1.0 - eps && df_target <= static_cast<double>(m) + eps)) {
        throw OutOfRange("calibrate_psi: df_target must lie in [1, " + std::to_string(m) + "], got "
                         + std::to_string(df_target));
    }
    const double zeros = static_cast<double>((D.array() == 0.0).count());
    auto df_of = [&](double psi) { return (1.0 / (1.0 + psi * D.array())).sum(); };
    if (df_target >= static_cast<double>(m) - eps) return 0.0;
    if (df_target <= zeros + eps) return std::numeric_limits<double>::infinity();

    double lo = 0.0, hi = 1.0;
    while (df_of(hi) > df_target) hi *= 10.0;
    lo = hi / 10.0;
    while (lo > 1e-300 && df_of(lo) < df_target) lo /= 10.0;
    double mid = std::sqrt(lo * hi);
    for (int it = 0; it < 300; ++it) {
        mid = std::sqrt(lo * hi);
        const double v = df_of(mid);
        if (std::abs(v - df_target) < 1e-12) break;
        if (v > df_target) lo = mid;
        else hi = mid;
    }
    return mid;
}

/**
 * Reduced-data version of a basis for fold fitting. The linear column is
 * re-centered and re-normalised on the retained rows and left unrotated; the
 * nonlinear block is centered, has the linear column projected out, and is
 * re-orthonormalised by the SVD of U1 D^{-1/2} with new penalty D2^{-2}.
 * Evaluation: U_sub(x0) = (U(x0) - 1 center^T) back_map.
 */
struct FoldBasis
{
    Mat U_sub;
    Vec D_sub;
    double lambda_scale = 1.0;
    Vec center;   // column means of the retained rows of U
    Mat back_map; // m x m
    BasisMap map;

    Index m() const { return D_sub.size(); }

    Vec Dstar() const
    {
        Vec out = D_sub;
        out[0] = 1.0;
        return out;
    }

    Mat evaluate(const Vec& x0) const
    {
        Mat u0 = map.evaluate(x0);
        u0.rowwise() -= center.transpose();
        return u0 * back_map;
    }
};

inline FoldBasis subset_basis(const PseudoSplineBasis& basis, std::span<const Index> keep)
{
    const Index n = basis.U.rows();
    const Index n1 = static_cast<Index>(keep.size());
    const Index m = basis.m();
    if (n1 <= m) {
        throw NumericalDegeneracy("subset_basis: " + std::to_string(n1) + " retained rows cannot support "
                                  + std::to_string(m) + " basis columns");
    }
    Mat U1(n1, m);
    for (Index i = 0; i < n1; ++i) {
        if (keep[i] < 0 || keep[i] >= n) throw InvalidInput("subset_basis: row index out of range");
        U1.row(i) = basis.U.row(keep[i]);
    }

    FoldBasis out;
    out.map = basis.map;
    out.lambda_scale = static_cast<double>(n1) / static_cast<double>(n);
    out.center = U1.colwise().mean().transpose();
    Mat U1c = U1.rowwise() - out.center.transpose();
    out.back_map = Mat::Zero(m, m);
    out.D_sub = Vec::Zero(m);

    const Vec lin = U1c.col(0);
    const double lin_norm = lin.norm();
    if (basis.constant || !(lin_norm > 0.0)) {
        out.U_sub = Mat::Zero(n1, m);
        return out;
    }
    out.back_map(0, 0) = 1.0 / lin_norm;
    if (m > 1) {
        const Index t = m - 1;
        const Mat N = U1c.rightCols(t);
        const Eigen::RowVectorXd b = (lin.transpose() * N) / (lin_norm * lin_norm);
        const Vec dinv_sqrt = basis.D.tail(t).cwiseSqrt().cwiseInverse();
        const Mat A = (N - lin * b) * dinv_sqrt.asDiagonal();
        Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinV);
        const Vec sv = svd.singularValues();
        if (!(sv[t - 1] > 1e-12 * sv[0])) {
            throw NumericalDegeneracy("subset_basis: retained rows leave the nonlinear block rank-deficient");
        }
        Mat V2 = svd.matrixV();
        for (Index j = 0; j < t; ++j) {
            Index arg;
            V2.col(j).cwiseAbs().maxCoeff(&arg);
            if (V2(arg, j) < 0.0) V2.col(j) *= -1.0;
        }
        Mat proj = Mat::Zero(m, t);
        proj.row(0) = -b;
        proj.bottomRows(t) = Mat::Identity(t, t);
        out.back_map.rightCols(t) = proj * dinv_sqrt.asDiagonal() * V2 * sv.cwiseInverse().asDiagonal();
        out.D_sub.tail(t) = sv.array().square().inverse();
    }
    out.U_sub = U1c * out.back_map;
    return out;
}

} // namespace gamsel
