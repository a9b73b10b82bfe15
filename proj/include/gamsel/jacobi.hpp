#pragma once
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>
#include <gamsel/types.hpp>

namespace gamsel {

struct SymmetricEigen
{
    Vec values;  // descending
    Mat vectors; // columns match values
};

/**
 * Cyclic Jacobi eigendecomposition of a small symmetric matrix. Sweeps until
 * the off-diagonal Frobenius norm drops below tol * ||A||_F.
 */
inline SymmetricEigen jacobi_eigen(Mat a, double tol = 1e-12, int max_sweeps = 100)
{
    const Index k = a.rows();
    if (a.cols() != k) throw InvalidInput("jacobi_eigen: matrix must be square");
    Mat v = Mat::Identity(k, k);
    const double fro = std::max(a.norm(), 1e-300);

    auto off = [&] {
        double s = 0.0;
        for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < k; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < max_sweeps && off() > tol * fro; ++sweep) {
        for (Index p = 0; p < k - 1; ++p) {
            for (Index q = p + 1; q < k; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (Index i = 0; i < k; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (Index i = 0; i < k; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (Index i = 0; i < k; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<Index> order(k);
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) > a(j, j); });
    SymmetricEigen out;
    out.values.resize(k);
    out.vectors.resize(k, k);
    for (Index i = 0; i < k; ++i) {
        out.values[i] = a(order[i], order[i]);
        out.vectors.col(i) = v.col(order[i]);
        // sign convention: largest-magnitude component positive
        Index arg;
        out.vectors.col(i).cwiseAbs().maxCoeff(&arg);
        if (out.vectors(arg, i) < 0.0) out.vectors.col(i) *= -1.0;
    }
    return out;
}

} // namespace gamsel
