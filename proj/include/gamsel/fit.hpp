#pragma once
#include <algorithm>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>
#include <gamsel/dataset.hpp>
#include <gamsel/logistic.hpp>
#include <gamsel/model.hpp>
#include <gamsel/optimizer.hpp>
#include <gamsel/pseudo_spline.hpp>

namespace gamsel {

/// Run f(0..count-1) on up to `threads` workers; the first exception is rethrown.
inline void parallel_for(Index count, Index threads, const std::function<void(Index)>& f)
{
    threads = std::max<Index>(1, std::min(threads, count));
    if (threads == 1) {
        for (Index i = 0; i < count; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (Index w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (Index i = w; i < count; i += threads) {
                try {
                    f(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Standardized design, per-variable bases and psi, ready for the solver.
struct PreparedModel
{
    Standardization standardization;
    std::vector<PseudoSplineBasis> bases;
    std::vector<double> psi;
    Problem problem;
    std::vector<std::string> warnings;
};

/// psi for a basis whose smoother targets df (df counts the intercept).
inline double psi_for(const PseudoSplineBasis& b)
{
    if (b.constant || b.m() == 1) return 0.0;
    const double target = std::clamp(b.df - 1.0, 1.0, static_cast<double>(b.m()));
    return calibrate_psi(b.D, target);
}

inline PreparedModel prepare_model(const Dataset& data, const GamselConfig& cfg)
{
    data.validate();
    cfg.validate(data.p());
    if (data.n() < 3) throw InvalidInput("need at least 3 observations");
    const Index p = data.p();
    PreparedModel pm;
    pm.standardization = fit_standardization(data.X);
    const Mat Xs = pm.standardization.apply(data.X);
    pm.bases.resize(p);
    parallel_for(p, cfg.threads, [&](Index j) {
        pm.bases[j] = build_pseudo_spline(data.X.col(j), cfg.degree_for(j), cfg.df_for(j), cfg.variant, data.name(j));
    });
    pm.problem.gamma = cfg.gamma;
    for (Index j = 0; j < p; ++j) {
        const auto& b = pm.bases[j];
        for (const auto& w : b.warnings) pm.warnings.push_back(w);
        if (pm.standardization.constant[j]) pm.warnings.push_back("variable '" + data.name(j) + "' is constant; forced to zero");
        Term t;
        t.x = Xs.col(j);
        t.U = b.U;
        t.D = b.D;
        t.constant = b.constant || pm.standardization.constant[j];
        t.psi = psi_for(b);
        pm.psi.push_back(t.psi);
        pm.problem.terms.push_back(std::move(t));
    }
    return pm;
}

inline std::vector<TermInfo> term_infos(const PreparedModel& pm)
{
    std::vector<TermInfo> out;
    for (std::size_t j = 0; j < pm.bases.size(); ++j) {
        const auto& b = pm.bases[j];
        TermInfo ti;
        ti.map = b.map;
        ti.D = b.D;
        ti.psi = pm.psi[j];
        ti.constant = pm.problem.terms[j].constant;
        ti.k = b.k;
        ti.df = b.df;
        ti.scale_applied = b.scale_applied;
        out.push_back(std::move(ti));
    }
    return out;
}

inline PathResult fit_problem(const Problem& pb, const Vec& y, const GamselConfig& cfg,
                              const std::vector<double>& grid = {}, UpdateCallback on_update = {})
{
    return cfg.family == Family::kGaussian ? fit_path_gaussian(pb, y, cfg, grid, std::move(on_update))
                                           : fit_path_binomial(pb, y, cfg, grid, std::move(on_update));
}

/// Build bases, fit the full path, and package everything prediction needs.
inline GamselPath fit(const Dataset& data, const GamselConfig& cfg, const std::vector<double>& grid = {})
{
    PreparedModel pm = prepare_model(data, cfg);
    if (cfg.family == Family::kGaussian && (data.y.array() == data.y[0]).all()) {
        throw InvalidInput("response is constant");
    }
    PathResult res = fit_problem(pm.problem, data.y, cfg, grid);
    GamselPath path;
    path.config = cfg;
    for (Index j = 0; j < data.p(); ++j) path.names.push_back(data.name(j));
    path.standardization = pm.standardization;
    path.terms = term_infos(pm);
    path.lambda_max = res.lambda_max;
    path.points = std::move(res.points);
    path.warnings = pm.warnings;
    for (std::size_t l = 0; l < path.points.size(); ++l) {
        if (path.points[l].diagnostics.middle_capped) {
            path.warnings.push_back("middle loop hit its iteration cap at lambda index " + std::to_string(l + 1));
        }
    }
    return path;
}

} // namespace gamsel
