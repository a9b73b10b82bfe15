#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>
#include <gamsel/model.hpp>
#include <gamsel/types.hpp>

namespace gamsel {

/// One additive term as the solver sees it: unit-norm centered x, orthonormal centered U.
struct Term
{
    Vec x;
    Mat U;
    Vec D;
    double psi = 0.0;
    bool constant = false;

    Index m() const { return D.size(); }

    Vec Dstar() const
    {
        Vec out = D;
        out[0] = 1.0;
        return out;
    }
};

struct Problem
{
    std::vector<Term> terms;
    double gamma = 0.5;

    Index p() const { return static_cast<Index>(terms.size()); }
    Index n() const { return terms.empty() ? 0 : terms[0].x.size(); }

    std::vector<Index> block_sizes() const
    {
        std::vector<Index> out;
        for (const auto& t : terms) out.push_back(t.m());
        return out;
    }

    bool alpha_frozen(Index j) const { return terms[j].constant || gamma <= 0.0; }
    bool beta_frozen(Index j) const { return terms[j].constant || gamma >= 1.0; }

    std::vector<Mat> Us() const
    {
        std::vector<Mat> out;
        for (const auto& t : terms) out.push_back(t.U);
        return out;
    }

    std::vector<Vec> Ds() const
    {
        std::vector<Vec> out;
        for (const auto& t : terms) out.push_back(t.D);
        return out;
    }

    std::vector<double> psis(double mult = 1.0) const
    {
        std::vector<double> out;
        for (const auto& t : terms) out.push_back(mult * t.psi);
        return out;
    }

    Mat X() const
    {
        Mat out(n(), p());
        for (Index j = 0; j < p(); ++j) out.col(j) = terms[j].x;
        return out;
    }

    Vec eta(const GamselState& s) const
    {
        Vec out = Vec::Constant(n(), s.alpha0);
        for (Index j = 0; j < p(); ++j) {
            if (s.alpha[j] != 0.0) out += s.alpha[j] * terms[j].x;
            if (s.beta[j].size() > 0 && s.beta[j].cwiseAbs().maxCoeff() > 0.0) out += terms[j].U * s.beta[j];
        }
        return out;
    }

    /// Quadratic-loss objective 0.5||r||^2 + penalties for the current residual r.
    double objective(const GamselState& s, const Vec& r, double lambda, double psi_mult = 1.0) const
    {
        return 0.5 * r.squaredNorm() + penalty(s, Ds(), psis(psi_mult), lambda, gamma);
    }
};

inline double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

/// Exact minimisation over alpha_j; r is the full residual and is kept in sync.
inline double update_alpha(const Vec& x, Vec& r, double alpha, double thr)
{
    const double z = x.dot(r) + alpha;
    const double a = soft_threshold(z, thr);
    if (a != alpha) r.noalias() -= (a - alpha) * x;
    return a;
}

/**
 * Positive root c of sum_i (v_i / (Dt_i c + lt))^2 = 1, by safeguarded
 * Newton on 1/sqrt(F(c)) - 1 over [0, (||v|| - lt) / min Dt].
 */
inline double solve_norm_equation(const Vec& v, const Vec& Dt, double lt)
{
    const double nv = v.norm();
    if (!(nv > lt) || !(lt > 0.0)) {
        throw ContractViolation("solve_norm_equation: requires ||v|| > lt > 0");
    }
    if (!(Dt.minCoeff() > 0.0)) throw ContractViolation("solve_norm_equation: Dt must be positive");
    const Vec v2 = v.array().square();
    auto eval = [&](double c, double& q, double& dq) {
        const auto den = (Dt.array() * c + lt);
        const double F = (v2.array() / den.square()).sum();
        const double dF = -2.0 * (v2.array() * Dt.array() / den.cube()).sum();
        q = 1.0 / std::sqrt(F) - 1.0;
        dq = -0.5 * std::pow(F, -1.5) * dF;
    };
    double lo = 0.0;
    double hi = (nv - lt) / Dt.minCoeff();
    double c = hi;
    for (int it = 0; it < 200; ++it) {
        double q, dq;
        eval(c, q, dq);
        if (q == 0.0) return c;
        if (q < 0.0) lo = c;
        else hi = c;
        double next = c - q / dq;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - c) <= 1e-13 * std::max(next, 1e-300) || hi - lo <= 1e-15 * hi) return next;
        c = next;
    }
    return c;
}

/**
 * Minimiser of 0.5||g - b||^2 + lt ||b||_{D*} + 0.5 psi b' D b (the beta
 * block problem for orthonormal U with g = U^T r).
 */
inline Vec beta_prox(const Vec& g, const Vec& D, double psi, double lt)
{
    const Index m = g.size();
    Vec ds = D;
    ds[0] = 1.0;
    if (lt <= 0.0) {
        Vec out(m);
        for (Index i = 0; i < m; ++i) out[i] = g[i] / (1.0 + (D[i] == 0.0 ? 0.0 : psi * D[i]));
        return out;
    }
    const Vec v = (g.array() / ds.array().sqrt()).matrix();
    if (v.norm() <= lt) return Vec::Zero(m);
    Vec dt(m);
    for (Index i = 0; i < m; ++i) dt[i] = 1.0 / ds[i] + (D[i] == 0.0 ? 0.0 : psi);
    const double c = solve_norm_equation(v, dt, lt);
    Vec out(m);
    for (Index i = 0; i < m; ++i) out[i] = (g[i] / ds[i]) / (dt[i] + lt / c);
    return out;
}

/// Exact minimisation over beta_j; r is the full residual and is kept in sync.
inline void update_beta(const Term& t, Vec& r, Vec& beta, double psi, double lt)
{
    const Vec g = t.U.transpose() * r + beta;
    Vec nb = beta_prox(g, t.D, psi, lt);
    const Vec diff = nb - beta;
    if (diff.cwiseAbs().maxCoeff() > 0.0) r.noalias() -= t.U * diff;
    beta = std::move(nb);
}

/// Smallest lambda at which the all-zero state (bar the intercept) is optimal for residual r0.
inline double lambda_max(const Problem& pb, const Vec& r0, LambdaMaxRule rule = LambdaMaxRule::kExact)
{
    double out = 0.0;
    for (Index j = 0; j < pb.p(); ++j) {
        const Term& t = pb.terms[j];
        if (t.constant) continue;
        if (!pb.alpha_frozen(j)) out = std::max(out, std::abs(t.x.dot(r0)) / pb.gamma);
        if (!pb.beta_frozen(j)) {
            Vec g = t.U.transpose() * r0;
            if (rule == LambdaMaxRule::kExact) g.array() /= t.Dstar().array().sqrt();
            out = std::max(out, g.norm() / (1.0 - pb.gamma));
        }
    }
    return out;
}

/// Log-equispaced decreasing grid from lmax to ratio * lmax, optionally followed by 0.
inline std::vector<double> make_lambda_grid(double lmax, Index num_lambda, double ratio, bool append_zero = false)
{
    if (num_lambda < 1) throw OutOfRange("make_lambda_grid: num_lambda must be >= 1");
    std::vector<double> grid;
    if (!(lmax > 0.0)) {
        grid.push_back(0.0);
        return grid;
    }
    grid.push_back(lmax);
    if (num_lambda > 1) {
        const double step = std::log(ratio) / static_cast<double>(num_lambda - 1);
        for (Index l = 1; l + 1 < num_lambda; ++l) grid.push_back(lmax * std::exp(step * static_cast<double>(l)));
        grid.push_back(lmax * ratio);
    }
    if (append_zero) grid.push_back(0.0);
    return grid;
}

struct ScreenResult
{
    std::vector<bool> alpha; // true: kept as candidate
    std::vector<bool> beta;
};

/**
 * Sequential strong rule: drop alpha_j if |x_j' r| < gamma (2 lk - lprev) and
 * beta_j if ||U_j' r + psi D beta_j|| < (1 - gamma)(2 lk - lprev), where r is
 * the residual of the fit at lprev.
 */
inline ScreenResult strong_rule_screen(const Problem& pb, const Vec& r, const GamselState& s, double lk, double lprev,
                                       double psi_mult = 1.0)
{
    ScreenResult out;
    out.alpha.assign(pb.p(), false);
    out.beta.assign(pb.p(), false);
    const double thr = 2.0 * lk - lprev;
    for (Index j = 0; j < pb.p(); ++j) {
        const Term& t = pb.terms[j];
        if (!pb.alpha_frozen(j)) out.alpha[j] = !(std::abs(t.x.dot(r)) < pb.gamma * thr);
        if (!pb.beta_frozen(j)) {
            Vec g = t.U.transpose() * r + psi_mult * t.psi * (t.D.array() * s.beta[j].array()).matrix();
            out.beta[j] = !(g.norm() < (1.0 - pb.gamma) * thr);
        }
    }
    return out;
}

struct KktReport
{
    Vec alpha; // per-variable subgradient residual of the alpha block (0 if frozen)
    Vec beta;

    double max() const
    {
        double m = 0.0;
        if (alpha.size()) m = std::max(m, alpha.maxCoeff());
        if (beta.size()) m = std::max(m, beta.maxCoeff());
        return m;
    }
};

inline double kkt_alpha(const Term& t, const Vec& r, double alpha, double thr)
{
    const double gr = t.x.dot(r);
    if (alpha != 0.0) return std::abs(gr - thr * (alpha > 0.0 ? 1.0 : -1.0));
    return std::max(0.0, std::abs(gr) - thr);
}

inline double kkt_beta(const Term& t, const Vec& r, const Vec& beta, double psi, double lt)
{
    const Vec g = t.U.transpose() * r;
    const Vec ds = t.Dstar();
    const double c = dstar_norm(beta, ds);
    if (c > 0.0) {
        const Vec res = g - psi * (t.D.array() * beta.array()).matrix()
                      - (lt / c) * (ds.array() * beta.array()).matrix();
        return res.norm();
    }
    return std::max(0.0, (g.array() / ds.array().sqrt()).matrix().norm() - lt);
}

/// Subgradient-equation residuals for every block at (state, residual r, lambda).
inline KktReport kkt_check(const Problem& pb, const GamselState& s, const Vec& r, double lambda, double psi_mult = 1.0)
{
    KktReport out;
    out.alpha = Vec::Zero(pb.p());
    out.beta = Vec::Zero(pb.p());
    for (Index j = 0; j < pb.p(); ++j) {
        const Term& t = pb.terms[j];
        if (!pb.alpha_frozen(j)) out.alpha[j] = kkt_alpha(t, r, s.alpha[j], pb.gamma * lambda);
        if (!pb.beta_frozen(j)) out.beta[j] = kkt_beta(t, r, s.beta[j], psi_mult * t.psi, (1.0 - pb.gamma) * lambda);
    }
    return out;
}

/// One block update: where it happened and the objective after it.
struct UpdateEvent
{
    Index lambda_index = 0;
    Index pass = 0; // working-response refresh for binomial fits, 0 otherwise
    double lambda = 0.0;
    double objective = 0.0;
};

using UpdateCallback = std::function<void(const UpdateEvent&)>;

struct SolveOptions
{
    double tol = 1e-7;
    double kkt_tol = 1e-6;
    Index max_sweeps = 100000;
    bool strong_rules = true;
    double psi_mult = 1.0;
    /// Called with the objective after every block update when set.
    UpdateCallback on_update;
};

struct SolveInfo
{
    Index sweeps = 0;
    Index kkt_rounds = 0;
    double kkt_max = 0.0;
};

/// Blocks ever nonzero along the path so far; they seed the working set.
struct ActiveHistory
{
    std::vector<bool> alpha;
    std::vector<bool> beta;

    explicit ActiveHistory(Index p = 0) : alpha(p, false), beta(p, false) {}
};

/**
 * Blockwise coordinate descent at one lambda, warm-started from s. The working
 * set is the ever-active blocks plus the strong-rule survivors; after
 * convergence on it, blocks outside it are KKT-checked and violators
 * re-admitted. The intercept is mean(y) since every column is centered.
 * On return r = y - eta(s).
 */
inline SolveInfo solve_at_lambda(const Problem& pb, const Vec& y, GamselState& s, Vec& r, double lambda,
                                 double lambda_prev, ActiveHistory& hist, const SolveOptions& opt,
                                 Index lambda_index = 0, Index pass = 0)
{
    const Index p = pb.p();
    const double ta = pb.gamma * lambda;
    const double tb = (1.0 - pb.gamma) * lambda;
    s.alpha0 = y.mean();
    r = y - pb.eta(s);

    std::vector<bool> wa(p, false), wb(p, false);
    if (opt.strong_rules) {
        const ScreenResult sr = strong_rule_screen(pb, r, s, lambda, lambda_prev, opt.psi_mult);
        for (Index j = 0; j < p; ++j) {
            wa[j] = !pb.alpha_frozen(j) && (hist.alpha[j] || sr.alpha[j] || s.alpha[j] != 0.0);
            wb[j] = !pb.beta_frozen(j) && (hist.beta[j] || sr.beta[j] || s.beta[j].cwiseAbs().maxCoeff() > 0.0);
        }
    } else {
        for (Index j = 0; j < p; ++j) {
            wa[j] = !pb.alpha_frozen(j);
            wb[j] = !pb.beta_frozen(j);
        }
    }

    SolveInfo info;
    auto notify = [&] {
        if (opt.on_update) opt.on_update({lambda_index, pass, lambda, pb.objective(s, r, lambda, opt.psi_mult)});
    };
    auto sweep = [&](bool nonzero_only) {
        double change = 0.0;
        for (Index j = 0; j < p; ++j) {
            const Term& t = pb.terms[j];
            if (wa[j] && (!nonzero_only || s.alpha[j] != 0.0)) {
                const double a = update_alpha(t.x, r, s.alpha[j], ta);
                change = std::max(change, std::abs(a - s.alpha[j]));
                s.alpha[j] = a;
                notify();
            }
            if (wb[j] && (!nonzero_only || s.beta[j].cwiseAbs().maxCoeff() > 0.0)) {
                const Vec old = s.beta[j];
                update_beta(t, r, s.beta[j], opt.psi_mult * t.psi, tb);
                change = std::max(change, (s.beta[j] - old).cwiseAbs().maxCoeff());
                notify();
            }
        }
        if (++info.sweeps > opt.max_sweeps) {
            throw ConvergenceFailure("coordinate descent did not converge within " + std::to_string(opt.max_sweeps)
                                         + " sweeps at lambda index " + std::to_string(lambda_index + 1),
                                     lambda_index);
        }
        return change;
    };

    // Tighten the sweep tolerance if coordinate convergence alone leaves a KKT
    // residual above kkt_tol (slowly mixing blocks).
    for (double tol = opt.tol;; tol *= 0.1) {
        for (;;) {
            ++info.kkt_rounds;
            for (;;) {
                if (sweep(false) < tol) break;
                while (sweep(true) >= tol) {
                }
            }
            // resync to cap incremental drift before checking optimality
            r = y - pb.eta(s);
            bool added = false;
            for (Index j = 0; j < p; ++j) {
                const Term& t = pb.terms[j];
                if (!wa[j] && !pb.alpha_frozen(j) && kkt_alpha(t, r, s.alpha[j], ta) > 0.0) {
                    wa[j] = true;
                    added = true;
                }
                if (!wb[j] && !pb.beta_frozen(j) && kkt_beta(t, r, s.beta[j], opt.psi_mult * t.psi, tb) > 0.0) {
                    wb[j] = true;
                    added = true;
                }
            }
            if (!added) break;
        }
        info.kkt_max = kkt_check(pb, s, r, lambda, opt.psi_mult).max();
        if (info.kkt_max <= opt.kkt_tol || tol < 1e-14) break;
    }

    for (Index j = 0; j < p; ++j) {
        if (s.alpha[j] != 0.0) hist.alpha[j] = true;
        if (s.beta[j].size() > 0 && s.beta[j].cwiseAbs().maxCoeff() > 0.0) hist.beta[j] = true;
    }
    return info;
}

inline SolveOptions solve_options(const GamselConfig& cfg)
{
    SolveOptions o;
    o.tol = cfg.tol;
    o.kkt_tol = cfg.kkt_tol;
    o.max_sweeps = cfg.max_sweeps;
    o.strong_rules = cfg.strong_rules;
    return o;
}

/// Classes and term df of a state; lt_scale and psi_mult convert to working units.
inline void summarize_point(const Problem& pb, PathPoint& pt, double classify_tol, double psi_mult = 1.0,
                            double lambda_mult = 1.0)
{
    const Index p = pb.p();
    pt.classes.resize(p);
    pt.term_df.resize(p);
    for (Index j = 0; j < p; ++j) {
        pt.classes[j] = classify_term(pt.state.alpha[j], pt.state.beta[j], classify_tol);
        pt.term_df[j] = term_df(pt.classes[j], pt.state.beta[j], pb.terms[j].D, psi_mult * pb.terms[j].psi,
                                lambda_mult * (1.0 - pb.gamma) * pt.lambda);
    }
}

struct PathResult
{
    double lambda_max = 0.0;
    std::vector<PathPoint> points;
};

/// Resolve the lambda grid: explicit grid if given, else from lambda_max and the config.
inline std::vector<double> resolve_grid(double lmax, const GamselConfig& cfg, const std::vector<double>& grid)
{
    if (!grid.empty()) return grid;
    if (!cfg.lambda.empty()) return cfg.lambda;
    return make_lambda_grid(lmax, cfg.num_lambda, cfg.lambda_min_ratio, cfg.append_zero);
}

/**
 * Squared-error path: warm-started descent over the decreasing grid. An empty
 * grid means lambda_max from y - mean(y) and the config's grid parameters.
 */
inline PathResult fit_path_gaussian(const Problem& pb, const Vec& y, const GamselConfig& cfg,
                                    const std::vector<double>& grid = {},
                                    UpdateCallback on_update = {})
{
    if (y.size() != pb.n()) throw InvalidInput("fit_path_gaussian: response length mismatch");
    PathResult out;
    const Vec r0 = (y.array() - y.mean()).matrix();
    out.lambda_max = lambda_max(pb, r0, cfg.lambda_max_rule);
    const std::vector<double> lambdas = resolve_grid(out.lambda_max, cfg, grid);

    SolveOptions opt = solve_options(cfg);
    opt.on_update = std::move(on_update);
    GamselState s = GamselState::zeros(pb.block_sizes());
    Vec r = r0;
    ActiveHistory hist(pb.p());
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        const double lam = lambdas[l];
        const double prev = l == 0 ? std::max(lam, out.lambda_max) : lambdas[l - 1];
        PathPoint pt;
        pt.lambda = lam;
        const SolveInfo info = solve_at_lambda(pb, y, s, r, lam, prev, hist, opt, static_cast<Index>(l));
        pt.state = s;
        pt.deviance = r.squaredNorm();
        pt.diagnostics.sweeps = info.sweeps;
        pt.diagnostics.kkt_rounds = info.kkt_rounds;
        pt.diagnostics.kkt_max = info.kkt_max;
        summarize_point(pb, pt, cfg.classify_tol);
        out.points.push_back(std::move(pt));
    }
    return out;
}

} // namespace gamsel
