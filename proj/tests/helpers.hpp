#pragma once
#include <gamsel/gamsel.hpp>
#include <random>
#include "oracles.hpp"

namespace testutil {

using namespace gamsel;

inline Vec uniform(Index n, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Vec x(n);
    for (Index i = 0; i < n; ++i) x[i] = u(rng);
    return x;
}

inline Vec normal(Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> z;
    Vec x(n);
    for (Index i = 0; i < n; ++i) x[i] = z(rng);
    return x;
}

inline double max_abs(const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

/// Random additive data: a linear, a nonlinear and noise predictors.
inline Dataset random_gaussian(Index n, Index p, std::mt19937_64& rng, double noise = 0.5)
{
    Dataset d;
    d.X.resize(n, p);
    for (Index j = 0; j < p; ++j) d.X.col(j) = uniform(n, rng);
    d.y = normal(n, rng) * noise;
    d.y += 2.0 * d.X.col(0);
    if (p > 1) d.y += (6.28 * d.X.col(1).array()).sin().matrix();
    if (p > 2) d.y += (d.X.col(2).array() - 0.5).square().matrix() * 4.0;
    return d;
}

inline Dataset random_binomial(Index n, Index p, std::mt19937_64& rng)
{
    Dataset d = random_gaussian(n, p, rng, 0.0);
    std::uniform_real_distribution<double> u;
    Vec eta = (d.y.array() - d.y.mean()).matrix() * 1.5;
    for (Index i = 0; i < n; ++i) d.y[i] = u(rng) < logistic(eta[i]) ? 1.0 : 0.0;
    return d;
}

inline oracle::FullProblem to_oracle(const Problem& pb, const Vec& y, bool binomial)
{
    oracle::FullProblem fp;
    fp.X = pb.X();
    fp.U = pb.Us();
    fp.D = pb.Ds();
    fp.psi = pb.psis();
    fp.gamma = pb.gamma;
    fp.binomial = binomial;
    fp.y = y;
    return fp;
}

} // namespace testutil
