#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>
#include <gamsel/model.hpp>
#include <gamsel/optimizer.hpp>

namespace gamsel {

struct WorkingResponse
{
    Vec z;
    Vec eta;
    Vec p_tilde;
};

/// z = eta + (y - p) / w with the fixed curvature bound w = 1/4.
inline WorkingResponse working_response(const Vec& y, const Vec& eta)
{
    if (y.size() != eta.size()) throw InvalidInput("working_response: length mismatch");
    for (Index i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw InvalidInput("working_response: binomial response must be 0/1");
    }
    if (!eta.allFinite()) throw InvalidInput("working_response: non-finite linear predictor");
    WorkingResponse w;
    w.eta = eta;
    w.p_tilde = eta.unaryExpr([](double e) { return std::clamp(logistic(e), 1e-8, 1.0 - 1e-8); });
    w.z = eta + 4.0 * (y - w.p_tilde);
    return w;
}

/// Negative log-likelihood plus penalties at a state.
inline double penalized_nll(const Problem& pb, const GamselState& s, const Vec& y, double lambda)
{
    return binomial_nll(y, pb.eta(s)) + penalty(s, pb.Ds(), pb.psis(), lambda, pb.gamma);
}

/// Gradient of the smooth part (NLL + 0.5 sum psi b'Db): (d/dalpha0, d/dalpha, d/dbeta blocks).
inline GamselState smooth_gradient(const Problem& pb, const GamselState& s, const Vec& y)
{
    const Vec eta = pb.eta(s);
    const Vec res = y - eta.unaryExpr([](double e) { return logistic(e); });
    GamselState g = GamselState::zeros(pb.block_sizes());
    g.alpha0 = -res.sum();
    for (Index j = 0; j < pb.p(); ++j) {
        const Term& t = pb.terms[j];
        g.alpha[j] = -t.x.dot(res);
        g.beta[j] = -(t.U.transpose() * res) + t.psi * (t.D.array() * s.beta[j].array()).matrix();
    }
    return g;
}

inline void check_binary(const Vec& y)
{
    bool any0 = false, any1 = false;
    for (Index i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) any0 = true;
        else if (y[i] == 1.0) any1 = true;
        else throw InvalidInput("binomial response must be 0/1 (row " + std::to_string(i + 1) + ")");
    }
    if (!(any0 && any1)) throw InvalidInput("binomial response is constant");
}

/**
 * Binomial path. Outer loop over lambda; middle loop refreshes the working
 * response z; inner loop is the squared-error solver on z with lambda and psi
 * multiplied by 4 (the 1/4 weight moved onto the penalties). The middle loop
 * stops when the penalised NLL decreases by less than middle_tol relative.
 */
inline PathResult fit_path_binomial(const Problem& pb, const Vec& y, const GamselConfig& cfg,
                                    const std::vector<double>& grid = {},
                                    UpdateCallback on_update = {})
{
    if (y.size() != pb.n()) throw InvalidInput("fit_path_binomial: response length mismatch");
    check_binary(y);
    PathResult out;
    const double ybar = y.mean();
    const Vec r0 = (y.array() - ybar).matrix();
    out.lambda_max = lambda_max(pb, r0, cfg.lambda_max_rule);
    const std::vector<double> lambdas = resolve_grid(out.lambda_max, cfg, grid);

    SolveOptions opt = solve_options(cfg);
    opt.psi_mult = 4.0;
    opt.on_update = std::move(on_update);
    GamselState s = GamselState::zeros(pb.block_sizes());
    s.alpha0 = std::log(ybar / (1.0 - ybar));
    ActiveHistory hist(pb.p());
    Vec r(pb.n());
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        const double lam = lambdas[l];
        const double prev = l == 0 ? std::max(lam, out.lambda_max) : lambdas[l - 1];
        PathPoint pt;
        pt.lambda = lam;
        double f_prev = penalized_nll(pb, s, y, lam);
        for (Index it = 0; it < cfg.max_middle; ++it) {
            const WorkingResponse w = working_response(y, pb.eta(s));
            // screening compares against the previous lambda only on the first pass
            const double lp = it == 0 ? prev : lam;
            const SolveInfo info =
                solve_at_lambda(pb, w.z, s, r, 4.0 * lam, 4.0 * lp, hist, opt, static_cast<Index>(l), it);
            pt.diagnostics.sweeps += info.sweeps;
            pt.diagnostics.kkt_rounds += info.kkt_rounds;
            pt.diagnostics.kkt_max = info.kkt_max;
            ++pt.diagnostics.middle_iterations;
            const double f = penalized_nll(pb, s, y, lam);
            pt.diagnostics.nll_trace.push_back(f);
            const double dec = f_prev - f;
            f_prev = f;
            if (dec < cfg.middle_tol * std::max(std::abs(f), 1e-300)) break;
            if (it + 1 == cfg.max_middle) pt.diagnostics.middle_capped = true;
        }
        pt.state = s;
        pt.deviance = 2.0 * binomial_nll(y, pb.eta(s));
        summarize_point(pb, pt, cfg.classify_tol, 4.0, 4.0);
        out.points.push_back(std::move(pt));
    }
    return out;
}

} // namespace gamsel
