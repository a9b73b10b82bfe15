#pragma once
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>
#include <gamsel/types.hpp>

namespace gamsel {

/**
 * Natural cubic smoothing spline on the unique values of x.
 *
 * Ties are collapsed into weighted knots: row i of the original data maps to
 * knot row_knot[i], and multiplicities[k] counts the rows on knot k. The
 * smoother minimises sum_i (y_i - f(x_i))^2 + lambda * int f''^2, which on the
 * knots is the weighted problem with W = diag(multiplicities).
 */
struct SmootherSpec
{
    Vec unique_knots;
    Vec multiplicities;
    std::vector<Index> row_knot;
    double lambda = 0.0;
    double target_df = 0.0;

    Index n_unique() const { return unique_knots.size(); }
    Index n_rows() const { return static_cast<Index>(row_knot.size()); }
};

/**
 * Values and second derivatives of one or more natural cubic splines on a
 * common knot set; evaluates anywhere (linear extrapolation beyond the ends).
 */
struct SplineFit
{
    Vec knots;
    Mat values;        // N x c, spline values at the knots
    Mat second_derivs; // N x c, zero in the first and last row

    Mat evaluate(const Vec& x0) const
    {
        const Index N = knots.size();
        const Index c = values.cols();
        Mat out(x0.size(), c);
        if (N == 1) {
            for (Index i = 0; i < x0.size(); ++i) out.row(i) = values.row(0);
            return out;
        }
        for (Index i = 0; i < x0.size(); ++i) {
            const double x = x0[i];
            if (x <= knots[0]) {
                const double h = knots[1] - knots[0];
                for (Index j = 0; j < c; ++j) {
                    const double slope = (values(1, j) - values(0, j)) / h - h * second_derivs(1, j) / 6.0;
                    out(i, j) = values(0, j) + (x - knots[0]) * slope;
                }
                continue;
            }
            if (x >= knots[N - 1]) {
                const double h = knots[N - 1] - knots[N - 2];
                for (Index j = 0; j < c; ++j) {
                    const double slope = (values(N - 1, j) - values(N - 2, j)) / h
                                       + h * second_derivs(N - 2, j) / 6.0;
                    out(i, j) = values(N - 1, j) + (x - knots[N - 1]) * slope;
                }
                continue;
            }
            const Index k = static_cast<Index>(
                std::upper_bound(knots.data(), knots.data() + N, x) - knots.data()) - 1;
            const double h = knots[k + 1] - knots[k];
            const double a = x - knots[k];
            const double b = knots[k + 1] - x;
            for (Index j = 0; j < c; ++j) {
                out(i, j) = (a * values(k + 1, j) + b * values(k, j)) / h
                          - a * b / 6.0 * ((1.0 + a / h) * second_derivs(k + 1, j)
                                         + (1.0 + b / h) * second_derivs(k, j));
            }
        }
        return out;
    }
};

namespace detail {

/// Symmetric pentadiagonal matrix stored by diagonals, factored as L D L^T.
struct Penta
{
    Vec d0, d1, d2; // main, first and second super-diagonal
    Vec dd, l1, l2; // factor

    void factor()
    {
        const Index m = d0.size();
        dd.resize(m);
        l1.setZero(m);
        l2.setZero(m);
        for (Index c = 0; c < m; ++c) {
            double v = d0[c];
            if (c >= 1) v -= l1[c - 1] * l1[c - 1] * dd[c - 1];
            if (c >= 2) v -= l2[c - 2] * l2[c - 2] * dd[c - 2];
            if (!(v > 0.0)) throw NumericalDegeneracy("smoothing spline: band matrix not positive definite");
            dd[c] = v;
            if (c + 1 < m) {
                double w = d1[c];
                if (c >= 1) w -= l1[c - 1] * l2[c - 1] * dd[c - 1];
                l1[c] = w / v;
            }
            if (c + 2 < m) l2[c] = d2[c] / v;
        }
    }

    void solve_inplace(Eigen::Ref<Vec> b) const
    {
        const Index m = d0.size();
        for (Index c = 0; c < m; ++c) {
            if (c >= 1) b[c] -= l1[c - 1] * b[c - 1];
            if (c >= 2) b[c] -= l2[c - 2] * b[c - 2];
        }
        for (Index c = 0; c < m; ++c) b[c] /= dd[c];
        for (Index c = m - 1; c >= 0; --c) {
            if (c + 1 < m) b[c] -= l1[c] * b[c + 1];
            if (c + 2 < m) b[c] -= l2[c] * b[c + 2];
        }
    }
};

/**
 * Reinsch pieces for a weighted knot set:
 * Q is N x (N-2) tridiagonal (second divided differences), R is (N-2) x (N-2)
 * tridiagonal, and C = Q^T W^{-1} Q is pentadiagonal.
 */
struct ReinschSystem
{
    Vec h;                 // knot spacings, N-1
    Vec r0, r1;            // R diagonals
    Vec c0, c1, c2;        // C diagonals
    Vec w;                 // weights

    explicit ReinschSystem(const SmootherSpec& spec)
    {
        const Index N = spec.n_unique();
        w = spec.multiplicities;
        h = spec.unique_knots.tail(N - 1) - spec.unique_knots.head(N - 1);
        const Index m = std::max<Index>(N - 2, 0);
        r0.resize(m);
        r1.setZero(m);
        c0.resize(m);
        c1.setZero(m);
        c2.setZero(m);
        for (Index c = 0; c < m; ++c) {
            const Index j = c + 1;
            r0[c] = (h[j - 1] + h[j]) / 3.0;
            if (c + 1 < m) r1[c] = h[j] / 6.0;
            const double qa = 1.0 / h[j - 1];
            const double qb = -1.0 / h[j - 1] - 1.0 / h[j];
            const double qc = 1.0 / h[j];
            c0[c] = qa * qa / w[j - 1] + qb * qb / w[j] + qc * qc / w[j + 1];
            if (c + 1 < m) {
                // column c+1 has entries at rows j, j+1, j+2
                const double qb2 = -1.0 / h[j] - 1.0 / h[j + 1];
                c1[c] = qb * (1.0 / h[j]) / w[j] + qc * qb2 / w[j + 1];
            }
            if (c + 2 < m) c2[c] = qc * (1.0 / h[j + 1]) / w[j + 1];
        }
    }

    Index m() const { return r0.size(); }

    Penta band(double lambda) const
    {
        Penta p;
        p.d0 = r0 + lambda * c0;
        p.d1 = r1 + lambda * c1;
        p.d2 = lambda * c2;
        p.factor();
        return p;
    }

    /// Q^T v for a knot-length vector.
    Vec qt(const Vec& v) const
    {
        Vec out(m());
        for (Index c = 0; c < m(); ++c) {
            const Index j = c + 1;
            out[c] = (v[j - 1] - v[j]) / h[j - 1] + (v[j + 1] - v[j]) / h[j];
        }
        return out;
    }

    /// Q g for an interior-length vector; result has length N.
    Vec q(const Vec& g) const
    {
        const Index N = h.size() + 1;
        Vec out = Vec::Zero(N);
        for (Index c = 0; c < m(); ++c) {
            const Index j = c + 1;
            out[j - 1] += g[c] / h[j - 1];
            out[j] += g[c] * (-1.0 / h[j - 1] - 1.0 / h[j]);
            out[j + 1] += g[c] / h[j];
        }
        return out;
    }
};

} // namespace detail

/// Collapse x into weighted unique knots. Values within 1e-10 of the range of the
/// previous knot are merged into it.
inline SmootherSpec make_smoother_spec(const Vec& x)
{
    const Index n = x.size();
    if (n < 1) throw InvalidInput("smoother: empty x");
    if (!x.allFinite()) throw InvalidInput("smoother: non-finite x");
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x[a] < x[b]; });
    const double range = x[order.back()] - x[order.front()];
    const double merge_tol = 1e-10 * range;

    SmootherSpec spec;
    spec.row_knot.assign(n, 0);
    std::vector<double> knots, mult;
    for (Index i = 0; i < n; ++i) {
        const double v = x[order[i]];
        if (knots.empty() || v - knots.back() > merge_tol) {
            knots.push_back(v);
            mult.push_back(0.0);
        }
        mult.back() += 1.0;
        spec.row_knot[order[i]] = static_cast<Index>(knots.size()) - 1;
    }
    spec.unique_knots = Eigen::Map<Vec>(knots.data(), static_cast<Index>(knots.size()));
    spec.multiplicities = Eigen::Map<Vec>(mult.data(), static_cast<Index>(mult.size()));
    return spec;
}

/**
 * Trace of the n x n smoother matrix at lambda, tr((W + lambda K)^{-1} W).
 * Uses the band structure: tr = N - lambda tr(B^{-1} C) with B = R + lambda C,
 * where the needed band of B^{-1} comes from the Hutchinson-de Hoog recursion.
 */
inline double smoother_trace(const SmootherSpec& spec, double lambda)
{
    const Index N = spec.n_unique();
    if (N <= 2) return static_cast<double>(N);
    if (lambda <= 0.0) return static_cast<double>(N);
    detail::ReinschSystem sys(spec);
    const auto band = sys.band(lambda);
    const Index m = sys.m();
    // band of B^{-1}: s0[c] = (c,c), s1[c] = (c,c+1), s2[c] = (c,c+2)
    Vec s0(m), s1 = Vec::Zero(m), s2 = Vec::Zero(m);
    for (Index c = m - 1; c >= 0; --c) {
        const double a1 = (c + 1 < m) ? band.l1[c] : 0.0;
        const double a2 = (c + 2 < m) ? band.l2[c] : 0.0;
        const double s11 = (c + 1 < m) ? s0[c + 1] : 0.0;
        const double s12 = (c + 2 < m) ? s1[c + 1] : 0.0;
        const double s22 = (c + 2 < m) ? s0[c + 2] : 0.0;
        if (c + 2 < m) s2[c] = -a1 * s12 - a2 * s22;
        if (c + 1 < m) s1[c] = -a1 * s11 - a2 * s12;
        s0[c] = 1.0 / band.dd[c] - a1 * s1[c] - a2 * s2[c];
    }
    double tr = 0.0;
    for (Index c = 0; c < m; ++c) {
        tr += s0[c] * sys.c0[c] + 2.0 * s1[c] * sys.c1[c] + 2.0 * s2[c] * sys.c2[c];
    }
    return static_cast<double>(N) - lambda * tr;
}

/**
 * Smoothing parameter whose smoother has trace df. Bisection on log(lambda)
 * inside an expanding bracket; the trace is monotone decreasing in lambda.
 */
inline double df_to_lambda(const SmootherSpec& spec, double df)
{
    const double N = static_cast<double>(spec.n_unique());
    if (!(df > 2.0 && df < N)) {
        throw OutOfRange("df_to_lambda: df must lie in (2, " + std::to_string(spec.n_unique()) + "), got "
                         + std::to_string(df));
    }
    const double range = spec.unique_knots[spec.n_unique() - 1] - spec.unique_knots[0];
    // lambda has units of length^3 / weight; start from the natural scale
    double lo = std::log(range * range * range / N);
    double hi = lo;
    for (int it = 0; it < 400 && smoother_trace(spec, std::exp(lo)) < df; ++it) lo -= 2.0;
    for (int it = 0; it < 400 && smoother_trace(spec, std::exp(hi)) > df; ++it) hi += 2.0;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double tr = smoother_trace(spec, std::exp(mid));
        if (std::abs(tr - df) < 1e-10) break;
        if (tr > df) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-15) break;
    }
    return std::exp(mid);
}

/// Resolve spec.lambda from a target df.
inline void calibrate_smoother(SmootherSpec& spec, double df)
{
    spec.lambda = df_to_lambda(spec, df);
    spec.target_df = df;
}

/**
 * Smoothing-spline fits of the columns of B (n rows, aligned with the x that
 * built spec): knot values and second derivatives.
 */
inline SplineFit fit_smoother(const SmootherSpec& spec, const Mat& B)
{
    if (B.rows() != spec.n_rows()) {
        throw InvalidInput("apply_smoother: expected " + std::to_string(spec.n_rows()) + " rows, got "
                           + std::to_string(B.rows()));
    }
    const Index N = spec.n_unique();
    SplineFit fit;
    fit.knots = spec.unique_knots;
    // weighted knot means
    Mat ybar = Mat::Zero(N, B.cols());
    for (Index i = 0; i < B.rows(); ++i) ybar.row(spec.row_knot[i]) += B.row(i);
    for (Index k = 0; k < N; ++k) ybar.row(k) /= spec.multiplicities[k];
    fit.second_derivs = Mat::Zero(N, B.cols());
    if (N <= 2 || spec.lambda <= 0.0) {
        fit.values = ybar;
        return fit;
    }
    detail::ReinschSystem sys(spec);
    const auto band = sys.band(spec.lambda);
    fit.values.resize(N, B.cols());
    for (Index j = 0; j < B.cols(); ++j) {
        Vec gamma = sys.qt(ybar.col(j));
        band.solve_inplace(gamma);
        const Vec qg = sys.q(gamma);
        fit.values.col(j) = ybar.col(j).array() - spec.lambda * qg.array() / sys.w.array();
        fit.second_derivs.col(j).segment(1, N - 2) = gamma;
    }
    return fit;
}

/// S_lambda B, with duplicate x values expanded back to the original rows.
inline Mat apply_smoother(const SmootherSpec& spec, const Mat& B)
{
    if (B.cols() < 1) throw InvalidInput("apply_smoother: B needs at least one column");
    const auto fit = fit_smoother(spec, B);
    Mat out(B.rows(), B.cols());
    for (Index i = 0; i < B.rows(); ++i) out.row(i) = fit.values.row(spec.row_knot[i]);
    return out;
}

} // namespace gamsel
