#pragma once
#include <algorithm>
#include <cmath>
#include <vector>
#include <gamsel/types.hpp>

namespace gamsel {

/// Number of distinct values in x.
inline Index count_unique(const Vec& x)
{
    std::vector<double> v(x.data(), x.data() + x.size());
    std::sort(v.begin(), v.end());
    return static_cast<Index>(std::unique(v.begin(), v.end()) - v.begin());
}

/**
 * Three-term recurrence for polynomials orthonormal with respect to the
 * empirical measure of the training x. Column j+1 is generated by
 *
 *      q_{j+1}(x) = ((x - shift[j]) q_j(x) - offdiag[j] q_{j-1}(x)) / offdiag[j+1]
 *
 * starting from q_0 = 1 / offdiag[0], so evaluation at arbitrary points
 * needs only these coefficients.
 */
struct OrthoPolyRecurrence
{
    Vec shift;   // length k-1
    Vec offdiag; // length k; offdiag[0] = sqrt(n)

    Index k() const { return offdiag.size(); }

    Mat evaluate(const Vec& x0) const
    {
        const Index n0 = x0.size();
        const Index kk = k();
        Mat out(n0, kk);
        if (kk == 0) return out;
        out.col(0).setConstant(1.0 / offdiag[0]);
        for (Index j = 0; j + 1 < kk; ++j) {
            out.col(j + 1) = (x0.array() - shift[j]) * out.col(j).array();
            if (j > 0) out.col(j + 1) -= offdiag[j] * out.col(j - 1);
            out.col(j + 1) /= offdiag[j + 1];
        }
        return out;
    }
};

struct OrthoPolyBasis
{
    Mat values; // n x k, orthonormal columns
    OrthoPolyRecurrence recurrence;

    Index k() const { return values.cols(); }
};

/**
 * Orthonormal polynomial basis of degree < k on the points x (Stieltjes
 * procedure). Column 0 is constant, column 1 is the centered, unit-norm x.
 * If x has u < k distinct values, k is reduced to u.
 */
inline OrthoPolyBasis build_ortho_poly(const Vec& x, Index k)
{
    const Index n = x.size();
    if (n < 2) throw InvalidInput("build_ortho_poly: need at least 2 points");
    if (k < 1) throw InvalidInput("build_ortho_poly: k must be >= 1");
    if (!x.allFinite()) throw InvalidInput("build_ortho_poly: non-finite x");

    k = std::min(k, count_unique(x));

    OrthoPolyBasis out;
    auto& rec = out.recurrence;
    std::vector<double> shift, offdiag;
    offdiag.push_back(std::sqrt(static_cast<double>(n)));

    Mat q(n, k);
    q.col(0).setConstant(1.0 / offdiag[0]);
    // scale of x for the numerical-rank cutoff
    const double xscale = std::max(x.cwiseAbs().maxCoeff(), 1e-300);
    for (Index j = 0; j + 1 < k; ++j) {
        const double a = (x.array() * q.col(j).array().square()).sum();
        Vec t = (x.array() - a) * q.col(j).array();
        if (j > 0) t -= offdiag[j] * q.col(j - 1);
        const double b = t.norm();
        if (!(b > 1e-13 * xscale)) break;
        shift.push_back(a);
        offdiag.push_back(b);
        q.col(j + 1) = t / b;
    }

    rec.shift = Eigen::Map<Vec>(shift.data(), static_cast<Index>(shift.size()));
    rec.offdiag = Eigen::Map<Vec>(offdiag.data(), static_cast<Index>(offdiag.size()));
    // Store the values exactly as the recurrence produces them so that
    // evaluation at the training points is bit-identical.
    out.values = rec.evaluate(x);
    return out;
}

} // namespace gamsel
