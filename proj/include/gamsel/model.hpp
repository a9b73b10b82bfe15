#pragma once
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>
#include <gamsel/dataset.hpp>
#include <gamsel/pseudo_spline.hpp>
#include <gamsel/types.hpp>

namespace gamsel {

/// Which bound defines the start of the lambda path.
enum class LambdaMaxRule {
    kExact,   // beta branch uses the D*-weighted norm, the exact zero threshold
    kPrinted, // beta branch uses the plain norm ||U^T r||
};

struct GamselConfig
{
    double gamma = 0.5;
    Index degree = 10;           // basis size k (including the intercept column)
    double df = 5.0;             // target df per smoother
    std::vector<Index> degrees;  // per-variable override of degree (empty: use degree)
    std::vector<double> dfs;     // per-variable override of df (empty: use df)
    Index num_lambda = 50;
    double lambda_min_ratio = 0.01;
    std::vector<double> lambda;  // user grid; overrides num_lambda/ratio when non-empty
    bool append_zero = false;
    Family family = Family::kGaussian;
    BasisVariant variant = BasisVariant::kPoly;
    LambdaMaxRule lambda_max_rule = LambdaMaxRule::kExact;

    double tol = 1e-7;
    double kkt_tol = 1e-6;
    Index max_sweeps = 100000;
    bool strong_rules = true;
    double classify_tol = 1e-10;
    double middle_tol = 1e-12;
    Index max_middle = 100;
    Index threads = 1;

    Index degree_for(Index j) const { return degrees.empty() ? degree : degrees.at(j); }
    double df_for(Index j) const { return dfs.empty() ? df : dfs.at(j); }

    void validate(Index p = -1) const
    {
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw OutOfRange("gamma must lie in [0,1]");
        if (degree < 2) throw OutOfRange("degree must be >= 2");
        if (!(df >= 1.0)) throw OutOfRange("df must be >= 1");
        if (num_lambda < 1) throw OutOfRange("num_lambda must be >= 1");
        if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) throw OutOfRange("lambda_min_ratio must lie in (0,1)");
        if (!(tol > 0.0) || !(kkt_tol > 0.0)) throw OutOfRange("tolerances must be positive");
        if (max_sweeps < 1 || max_middle < 1) throw OutOfRange("iteration caps must be positive");
        if (threads < 1) throw OutOfRange("threads must be >= 1");
        for (std::size_t i = 0; i < lambda.size(); ++i) {
            if (!(lambda[i] >= 0.0) || !std::isfinite(lambda[i])) throw OutOfRange("lambda values must be finite and >= 0");
            if (i > 0 && !(lambda[i] < lambda[i - 1])) throw OutOfRange("lambda grid must be strictly decreasing");
        }
        if (p >= 0) {
            if (!degrees.empty() && static_cast<Index>(degrees.size()) != p)
                throw InvalidInput("per-variable degrees: expected " + std::to_string(p) + " entries");
            if (!dfs.empty() && static_cast<Index>(dfs.size()) != p)
                throw InvalidInput("per-variable dfs: expected " + std::to_string(p) + " entries");
        }
        for (Index d : degrees)
            if (d < 2) throw OutOfRange("degree must be >= 2");
        for (double d : dfs)
            if (!(d >= 1.0)) throw OutOfRange("df must be >= 1");
    }
};

struct GamselState
{
    double alpha0 = 0.0;
    Vec alpha;
    std::vector<Vec> beta;

    static GamselState zeros(const std::vector<Index>& block_sizes)
    {
        GamselState s;
        s.alpha = Vec::Zero(static_cast<Index>(block_sizes.size()));
        for (Index m : block_sizes) s.beta.push_back(Vec::Zero(m));
        return s;
    }

    Index p() const { return alpha.size(); }
};

struct PointDiagnostics
{
    Index sweeps = 0;
    Index kkt_rounds = 0;
    double kkt_max = 0.0;
    Index middle_iterations = 0;
    std::vector<double> nll_trace; // penalized NLL after each middle iteration (binomial)
    bool middle_capped = false;
};

struct PathPoint
{
    double lambda = 0.0;
    GamselState state;
    std::vector<TermClass> classes;
    Vec term_df;
    double deviance = 0.0;
    PointDiagnostics diagnostics;
};

/// Everything prediction needs about one fitted term.
struct TermInfo
{
    BasisMap map;
    Vec D;
    double psi = 0.0;
    bool constant = false;
    Index k = 0;
    double df = 0.0;
    double scale_applied = 1.0;

    Index m() const { return D.size(); }

    Vec Dstar() const
    {
        Vec out = D;
        if (out.size() > 0) out[0] = 1.0;
        return out;
    }
};

struct GamselPath
{
    GamselConfig config;
    std::vector<std::string> names;
    Standardization standardization;
    std::vector<TermInfo> terms;
    double lambda_max = 0.0;
    std::vector<PathPoint> points;
    std::vector<std::string> warnings;

    Index p() const { return static_cast<Index>(terms.size()); }
};

/// Nonlinear if any beta entry exceeds tol, else Linear if |alpha| does, else Zero.
inline TermClass classify_term(double alpha, const Vec& beta, double tol = 1e-10)
{
    if (beta.size() > 0 && beta.cwiseAbs().maxCoeff() > tol) return TermClass::kNonlinear;
    if (std::abs(alpha) > tol) return TermClass::kLinear;
    return TermClass::kZero;
}

/// ||beta||_{D*} = sqrt(beta' D* beta).
inline double dstar_norm(const Vec& beta, const Vec& Dstar)
{
    return std::sqrt((Dstar.array() * beta.array().square()).sum());
}

/**
 * Effective degrees of freedom of one term at a solution: 0 for Zero, 1 for
 * Linear, and for Nonlinear the trace of the linearised beta update
 *      sum_i 1 / (1 + psi D_i + lt D*_i / ||beta||_{D*}).
 */
inline double term_df(TermClass cls, const Vec& beta, const Vec& D, double psi, double lt)
{
    if (cls == TermClass::kZero) return 0.0;
    if (cls == TermClass::kLinear) return 1.0;
    Vec ds = D;
    ds[0] = 1.0;
    const double c = dstar_norm(beta, ds);
    double out = 0.0;
    for (Index i = 0; i < D.size(); ++i) {
        const double quad = (i == 0 || D[i] == 0.0) ? 0.0 : psi * D[i];
        out += 1.0 / (1.0 + quad + lt * ds[i] / c);
    }
    return out;
}

/// Selection plus end-of-path penalty of a state.
inline double penalty(const GamselState& s, const std::vector<Vec>& D, const std::vector<double>& psi, double lambda,
                      double gamma)
{
    double pen = 0.0;
    for (Index j = 0; j < s.p(); ++j) {
        Vec ds = D[j];
        ds[0] = 1.0;
        pen += lambda * (gamma * std::abs(s.alpha[j]) + (1.0 - gamma) * dstar_norm(s.beta[j], ds));
        if (s.beta[j].size() > 1 && psi[j] > 0.0) {
            pen += 0.5 * psi[j] * (D[j].array() * s.beta[j].array().square()).sum();
        }
    }
    return pen;
}

/// Linear predictor on already-built design pieces: alpha0 + sum alpha_j x_j + sum U_j beta_j.
inline Vec linear_predictor(const GamselState& s, const Mat& Xs, const std::vector<Mat>& U)
{
    const Index p = s.p();
    if (Xs.cols() != p || static_cast<Index>(U.size()) != p || static_cast<Index>(s.beta.size()) != p) {
        throw InvalidInput("linear_predictor: dimension mismatch");
    }
    Vec eta = Vec::Constant(Xs.rows(), s.alpha0);
    for (Index j = 0; j < p; ++j) {
        if (s.beta[j].size() != U[j].cols() || U[j].rows() != Xs.rows()) {
            throw InvalidInput("linear_predictor: block " + std::to_string(j) + " dimension mismatch");
        }
        if (s.alpha[j] != 0.0) eta += s.alpha[j] * Xs.col(j);
        if (s.beta[j].size() > 0 && s.beta[j].cwiseAbs().maxCoeff() > 0.0) eta += U[j] * s.beta[j];
    }
    return eta;
}

/// Binomial negative log-likelihood sum_i log(1 + e^eta_i) - y_i eta_i.
inline double binomial_nll(const Vec& y, const Vec& eta)
{
    double out = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double e = eta[i];
        const double softplus = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        out += softplus - y[i] * e;
    }
    return out;
}

/**
 * Penalised objective: squared-error loss 0.5||y - eta||^2 (Gaussian) or the
 * negative log-likelihood (binomial) plus the selection and end-of-path
 * penalties.
 */
inline double objective(const GamselState& s, const Mat& Xs, const Vec& y, const std::vector<Mat>& U,
                        const std::vector<Vec>& D, const std::vector<double>& psi, double lambda, double gamma,
                        Family family = Family::kGaussian)
{
    if (y.size() != Xs.rows()) throw InvalidInput("objective: response length mismatch");
    if (static_cast<Index>(D.size()) != s.p() || static_cast<Index>(psi.size()) != s.p()) {
        throw InvalidInput("objective: penalty dimension mismatch");
    }
    const Vec eta = linear_predictor(s, Xs, U);
    const double loss = family == Family::kGaussian ? 0.5 * (y - eta).squaredNorm() : binomial_nll(y, eta);
    return loss + penalty(s, D, psi, lambda, gamma);
}

inline double logistic(double eta)
{
    return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

struct Prediction
{
    Mat eta;  // rows x selected lambda indices
    Mat prob; // empty for Gaussian
};

/**
 * Predictions at new raw predictor values for the listed path indices (all
 * when empty). alpha terms use the training standardization, beta terms the
 * stored basis maps.
 */
inline Prediction predict(const GamselPath& path, const Mat& X0, std::vector<Index> indices = {})
{
    const Index p = path.p();
    if (X0.cols() != p) {
        throw InvalidInput("predict: model has " + std::to_string(p) + " variables, data has "
                           + std::to_string(X0.cols()));
    }
    if (!X0.allFinite()) throw InvalidInput("predict: non-finite values in new data");
    if (indices.empty()) {
        for (Index l = 0; l < static_cast<Index>(path.points.size()); ++l) indices.push_back(l);
    }
    for (Index l : indices) {
        if (l < 0 || l >= static_cast<Index>(path.points.size())) {
            throw OutOfRange("predict: lambda index " + std::to_string(l + 1) + " out of range");
        }
    }
    const Index n0 = X0.rows();
    const Mat Xs = path.standardization.apply(X0);
    std::vector<Mat> U0(p);
    for (Index j = 0; j < p; ++j) {
        bool used = false;
        for (Index l : indices) {
            const Vec& b = path.points[l].state.beta[j];
            if (b.size() > 0 && b.cwiseAbs().maxCoeff() > 0.0) used = true;
        }
        U0[j] = used && n0 > 0 ? path.terms[j].map.evaluate(X0.col(j)) : Mat::Zero(n0, path.terms[j].m());
    }
    Prediction out;
    out.eta.resize(n0, static_cast<Index>(indices.size()));
    for (std::size_t c = 0; c < indices.size(); ++c) {
        out.eta.col(static_cast<Index>(c)) = linear_predictor(path.points[indices[c]].state, Xs, U0);
    }
    if (path.config.family == Family::kBinomial) {
        out.prob = out.eta.unaryExpr([](double e) { return logistic(e); });
    }
    return out;
}

} // namespace gamsel
