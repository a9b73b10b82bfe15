// Acceptance checks. One line per criterion; exit status is nonzero when a
// required criterion fails. Criterion 11 needs user-supplied spam data:
//   GAMSEL_SPAM_TRAIN, GAMSEL_SPAM_TEST  csv files with a header row
//   GAMSEL_SPAM_RESPONSE                 response column (default "spam")
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>
#include "helpers.hpp"

using namespace gamsel;
using namespace testutil;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& what)
{
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

GamselConfig small_config(Index k = 6, double df = 4.0)
{
    GamselConfig cfg;
    cfg.degree = k;
    cfg.df = df;
    cfg.num_lambda = 20;
    return cfg;
}

double block_objective(const Vec& g, const Vec& b, const Vec& D, double psi, double lt)
{
    Vec ds = D;
    ds[0] = 1.0;
    double quad = 0.0;
    for (Index i = 1; i < D.size(); ++i) quad += D[i] * b[i] * b[i];
    return 0.5 * (g - b).squaredNorm() + lt * std::sqrt((ds.array() * b.array().square()).sum()) + 0.5 * psi * quad;
}

// Worst within-segment increase of the recorded objective; segments are (lambda index, pass).
struct DescentTracker
{
    double worst = -std::numeric_limits<double>::infinity();
    Index count = 0;
    Index last_index = -1, last_pass = -1;
    double last = 0.0;

    UpdateCallback callback()
    {
        last_index = last_pass = -1;
        return [this](const UpdateEvent& e) {
            if (e.lambda_index == last_index && e.pass == last_pass) worst = std::max(worst, e.objective - last);
            last = e.objective;
            last_index = e.lambda_index;
            last_pass = e.pass;
            ++count;
        };
    }
};

DescentTracker descent;

void basis_correctness()
{
    std::mt19937_64 rng(101);
    const auto t0 = Clock::now();
    double orth = 0.0, eval = 0.0;
    bool conventions = true;
    for (int rep = 0; rep < 20; ++rep) {
        Vec x = uniform(200, rng);
        auto b = build_pseudo_spline(x, 10, 5.0, BasisVariant::kPoly);
        orth = std::max(orth, max_abs(b.U.transpose() * b.U - Mat::Identity(b.m(), b.m())));
        conventions = conventions && b.D[0] == 0.0 && std::abs(b.D[1] - 1.0) < 1e-12;
        for (Index i = 1; i < b.m(); ++i) conventions = conventions && b.D[i] >= b.D[i - 1];
        eval = std::max(eval, max_abs(evaluate_basis(b, x) - b.U));
    }
    const double secs = seconds_since(t0);
    report(1, orth <= 1e-8 && eval <= 1e-10 && conventions && secs < 5.0,
           "orthonormality " + fmt("%.2e", orth) + ", re-evaluation " + fmt("%.2e", eval) + ", penalty conventions "
               + (conventions ? "ok" : "violated") + ", " + fmt("%.2f", secs) + " s");
}

void smoother_oracle()
{
    std::mt19937_64 rng(102);
    double apply_err = 0.0, df_err = 0.0;
    for (Index n : {8, 15, 30, 50, 75, 100}) {
        Vec x = uniform(n, rng);
        auto spec = make_smoother_spec(x);
        calibrate_smoother(spec, std::min(5.0, n - 2.0));
        Mat B = Mat::NullaryExpr(n, 4, [&] { return std::normal_distribution<double>()(rng); });
        const Mat S = oracle::dense_smoother(x, spec.lambda);
        apply_err = std::max(apply_err, max_abs(apply_smoother(spec, B) - S * B));
    }
    for (int rep = 0; rep < 3; ++rep) {
        Vec x = uniform(100, rng);
        auto spec = make_smoother_spec(x);
        for (int df = 3; df <= 20; ++df) df_err = std::max(df_err, std::abs(smoother_trace(spec, df_to_lambda(spec, df)) - df));
    }
    report(2, apply_err <= 1e-8 && df_err <= 1e-6,
           "smoother vs dense solve " + fmt("%.2e", apply_err) + ", df round trip " + fmt("%.2e", df_err));
}

void prox_oracle()
{
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_gap = 0.0, worst_above = -1e300, residual = 0.0;
    int branch_errors = 0, zero_hits = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const Index m = 2 + rep % 7;
        const Index n = 20;
        Term t;
        Mat A = Mat::NullaryExpr(n, m, [&] { return std::normal_distribution<double>()(rng); });
        Eigen::HouseholderQR<Mat> qr(A);
        t.U = qr.householderQ() * Mat::Identity(n, m);
        t.x = t.U.col(0);
        t.D.resize(m);
        t.D[0] = 0.0;
        t.D[1] = 1.0;
        for (Index i = 2; i < m; ++i) t.D[i] = t.D[i - 1] * std::pow(10.0, 1.5 * u(rng));
        const double psi = u(rng) < 0.2 ? 0.0 : std::pow(10.0, -3.0 + 3.0 * u(rng));
        const double gamma = u(rng);
        Vec r = normal(n, rng);
        Vec beta = u(rng) < 0.5 ? Vec(Vec::Zero(m)) : Vec(0.3 * normal(m, rng));
        const Vec g = t.U.transpose() * r + beta;
        const Vec ds = t.Dstar();
        const double w = (g.array() / ds.array().sqrt()).matrix().norm();
        double lambda;
        switch (rep % 4) {
        case 0: lambda = w / (1.0 - gamma); break; // near the boundary
        case 1: lambda = 0.5 * w / (1.0 - gamma); break;
        default: lambda = 2.0 * w * u(rng) / (1.0 - gamma);
        }
        double lt = lambda * (1.0 - gamma);
        if (rep % 8 == 0) lt = w; // exact tie takes the zero branch

        const Vec r0 = r, b0 = beta;
        update_beta(t, r, beta, psi, lt);
        residual = std::max(residual, max_abs(r - (r0 - t.U * (beta - b0))));
        const bool zero = beta.cwiseAbs().maxCoeff() == 0.0;
        zero_hits += zero;
        if (zero != (w <= lt)) ++branch_errors;

        const Vec bo = oracle::beta_subproblem(g, ds, t.D, psi, lt);
        const double ours = block_objective(g, beta, t.D, psi, lt);
        const double ref = block_objective(g, bo, t.D, psi, lt);
        worst_gap = std::max(worst_gap, std::abs(ours - ref));
        worst_above = std::max(worst_above, ours - ref);
    }
    report(3, worst_gap <= 1e-6 && branch_errors == 0 && residual < 1e-12,
           "max |objective - reference| " + fmt("%.2e", worst_gap) + " (ours above reference by at most "
               + fmt("%.2e", std::max(0.0, worst_above)) + "), zero-branch mismatches " + std::to_string(branch_errors)
               + " of 1000 (" + std::to_string(zero_hits) + " zero), residual sync " + fmt("%.1e", residual));
}

void full_problem_oracle()
{
    double worst_rel = 0.0, worst_kkt = 0.0;
    int points = 0;
    for (int rep = 0; rep < 20; ++rep) {
        std::mt19937_64 rng(200 + rep);
        Dataset d = random_gaussian(60, 5, rng);
        GamselConfig cfg = small_config();
        cfg.num_lambda = 8;
        cfg.gamma = 0.3 + 0.4 * (rep % 5) / 4.0;
        PreparedModel pm = prepare_model(d, cfg);
        auto res = fit_path_gaussian(pm.problem, d.y, cfg, {}, descent.callback());
        auto fp = to_oracle(pm.problem, d.y, false);
        for (const auto& pt : res.points) {
            const double ours = oracle::full_objective(fp, pt.state.alpha0, pt.state.alpha, pt.state.beta, pt.lambda);
            const double ref = oracle::solve_full(fp, pt.lambda).objective;
            worst_rel = std::max(worst_rel, std::abs(ours - ref) / std::abs(ref));
            const Vec r = d.y - pm.problem.eta(pt.state);
            worst_kkt = std::max({worst_kkt, pt.diagnostics.kkt_max, kkt_check(pm.problem, pt.state, r, pt.lambda).max()});
            ++points;
        }
    }
    report(4, worst_rel <= 1e-6 && worst_kkt < 1e-6,
           std::to_string(points) + " path points, max relative objective gap " + fmt("%.2e", worst_rel)
               + ", max KKT residual " + fmt("%.2e", worst_kkt));
}

void lambda_max_contract()
{
    int zero_ok = 0, active_ok = 0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        std::mt19937_64 rng(300 + rep);
        Dataset d = random_gaussian(80, 6, rng);
        GamselConfig cfg = small_config();
        cfg.gamma = 0.2 + 0.6 * (rep % 4) / 3.0;
        PreparedModel pm = prepare_model(d, cfg);
        const Problem& pb = pm.problem;
        const Vec r0 = (d.y.array() - d.y.mean()).matrix();
        const double lmax = lambda_max(pb, r0);
        bool all_zero = true;
        for (double f : {1.0, 1.0001}) {
            const GamselState s = fit_path_gaussian(pb, d.y, cfg, {f * lmax}).points[0].state;
            all_zero = all_zero && max_abs(s.alpha) == 0.0;
            for (const auto& b : s.beta) all_zero = all_zero && max_abs(b) == 0.0;
        }
        zero_ok += all_zero;
        // argmax over variables of the per-variable threshold
        Index arg = 0;
        double best = -1.0;
        for (Index j = 0; j < pb.p(); ++j) {
            const Term& t = pb.terms[j];
            const Vec g = ((t.U.transpose() * r0).array() / t.Dstar().array().sqrt()).matrix();
            const double v = std::max(std::abs(t.x.dot(r0)) / pb.gamma, g.norm() / (1.0 - pb.gamma));
            if (v > best) {
                best = v;
                arg = j;
            }
        }
        const auto below = fit_path_gaussian(pb, d.y, cfg, {0.99 * lmax}).points[0];
        active_ok += below.classes[arg] != TermClass::kZero;
    }
    report(5, zero_ok == reps && active_ok == reps,
           "all-zero at 1 and 1.0001 x lambda_max in " + std::to_string(zero_ok) + "/" + std::to_string(reps)
               + ", argmax variable active at 0.99 x lambda_max in " + std::to_string(active_ok) + "/"
               + std::to_string(reps));
}

void screening_safety()
{
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        std::mt19937_64 rng(400 + rep);
        Dataset d = random_gaussian(60, 8, rng);
        GamselConfig on = small_config();
        on.tol = 1e-12;
        GamselConfig off = on;
        off.strong_rules = false;
        PreparedModel pm = prepare_model(d, on);
        auto a = fit_path_gaussian(pm.problem, d.y, on);
        auto b = fit_path_gaussian(pm.problem, d.y, off);
        for (std::size_t l = 0; l < a.points.size(); ++l) {
            const auto& sa = a.points[l].state;
            const auto& sb = b.points[l].state;
            worst = std::max({worst, std::abs(sa.alpha0 - sb.alpha0), max_abs(sa.alpha - sb.alpha)});
            for (std::size_t j = 0; j < sa.beta.size(); ++j) worst = std::max(worst, max_abs(sa.beta[j] - sb.beta[j]));
        }
    }
    report(6, worst <= 1e-8, "max coefficient difference with and without strong rules " + fmt("%.2e", worst));
}

GamselState random_state(const Problem& pb, std::mt19937_64& rng)
{
    GamselState s = GamselState::zeros(pb.block_sizes());
    std::normal_distribution<double> z;
    s.alpha0 = 0.5 * z(rng);
    for (Index j = 0; j < pb.p(); ++j) {
        s.alpha[j] = 0.5 * z(rng);
        for (Index k = 0; k < s.beta[j].size(); ++k) s.beta[j][k] = 0.5 * z(rng);
    }
    return s;
}

void logistic_mm()
{
    double worst_rise = -1e300, worst_grad = 0.0, worst_coef = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        std::mt19937_64 rng(500 + rep);
        Dataset d = random_binomial(100, 3, rng);
        GamselConfig cfg;
        cfg.family = Family::kBinomial;
        cfg.degree = 6;
        cfg.df = 4.0;
        cfg.num_lambda = 15;
        PreparedModel pm = prepare_model(d, cfg);
        const Problem& pb = pm.problem;
        auto res = fit_path_binomial(pb, d.y, cfg, {}, descent.callback());
        for (const auto& pt : res.points) {
            const auto& tr = pt.diagnostics.nll_trace;
            for (std::size_t i = 1; i < tr.size(); ++i) worst_rise = std::max(worst_rise, (tr[i] - tr[i - 1]) / std::abs(tr[i]));
        }

        auto smooth = [&](const GamselState& s) { return penalized_nll(pb, s, d.y, 0.0); };
        const GamselState s = random_state(pb, rng);
        const GamselState g = smooth_gradient(pb, s, d.y);
        const double h = 1e-5;
        auto check = [&](double analytic, const std::function<void(GamselState&, double)>& bump) {
            GamselState a = s, b = s;
            bump(a, h);
            bump(b, -h);
            const double fd = (smooth(a) - smooth(b)) / (2 * h);
            worst_grad = std::max(worst_grad, std::abs(fd - analytic) / std::max(1.0, std::abs(analytic)));
        };
        check(g.alpha0, [](GamselState& t, double e) { t.alpha0 += e; });
        for (Index j = 0; j < pb.p(); ++j) {
            check(g.alpha[j], [j](GamselState& t, double e) { t.alpha[j] += e; });
            for (Index k = 0; k < s.beta[j].size(); ++k)
                check(g.beta[j][k], [j, k](GamselState& t, double e) { t.beta[j][k] += e; });
        }

        const auto& last = res.points.back();
        const auto ref = oracle::solve_full(to_oracle(pb, d.y, true), last.lambda);
        worst_coef = std::max({worst_coef, std::abs(last.state.alpha0 - ref.a0), max_abs(last.state.alpha - ref.alpha)});
        for (Index j = 0; j < pb.p(); ++j) worst_coef = std::max(worst_coef, max_abs(last.state.beta[j] - ref.beta[j]));
    }
    report(8, worst_rise <= 1e-12 && worst_grad <= 1e-5 && worst_coef <= 1e-4,
           "max relative rise of penalized NLL across middle iterations " + fmt("%.2e", std::max(0.0, worst_rise))
               + ", gradient vs finite differences " + fmt("%.2e", worst_grad) + ", smallest-lambda coefficients vs oracle "
               + fmt("%.2e", worst_coef));
}

void sticky_recovery()
{
    const auto t0 = Clock::now();
    std::vector<double> zvnz;
    double nl_frac[2] = {0.0, 0.0};
    int nl_count[2] = {0, 0};
    const double gammas[2] = {0.4, 0.6};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Scenario sc = scenario_sec51();
        sc.seed = seed;
        const SimData sd = gen_scenario(sc);
        auto best_point = [&](const GamselPath& path) {
            double best = 2.0;
            Index at = 0;
            for (Index l = 0; l < static_cast<Index>(path.points.size()); ++l) {
                const double e = misclassification(sd.truth, path.points[l].classes).zero_vs_nonzero;
                if (e < best) {
                    best = e;
                    at = l;
                }
            }
            return std::make_pair(at, best);
        };
        GamselConfig cfg;
        zvnz.push_back(best_point(fit(sd.data, cfg)).second);
        for (int g = 0; g < 2; ++g) {
            cfg.gamma = gammas[g];
            const GamselPath path = fit(sd.data, cfg);
            const auto& cls = path.points[best_point(path).first].classes;
            const auto nz = std::count_if(cls.begin(), cls.end(), [](TermClass c) { return c != TermClass::kZero; });
            const auto nl = std::count(cls.begin(), cls.end(), TermClass::kNonlinear);
            if (nz > 0) {
                nl_frac[g] += static_cast<double>(nl) / static_cast<double>(nz);
                ++nl_count[g];
            }
        }
    }
    const double med = median(zvnz);
    const double f04 = nl_count[0] ? nl_frac[0] / nl_count[0] : 0.0;
    const double f06 = nl_count[1] ? nl_frac[1] / nl_count[1] : 0.0;
    const double secs = seconds_since(t0);
    report(9, med < 0.1 && f06 > f04 && secs < 180.0,
           "median best-lambda zero-vs-nonzero error " + fmt("%.3f", med) + " (target < 0.1), nonlinear share "
               + fmt("%.3f", f06) + " at gamma 0.6 vs " + fmt("%.3f", f04) + " at gamma 0.4, " + fmt("%.1f", secs)
               + " s");
}

void fold_subsetting()
{
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        std::mt19937_64 rng(600 + rep);
        const Index n = 100;
        Dataset d = random_gaussian(n, 3, rng);
        GamselConfig cfg;
        cfg.degree = 10;
        cfg.df = 5.0;
        PreparedModel pm = prepare_model(d, cfg);
        const auto folds = kfold_split(n, 5, 600 + rep);
        std::vector<Index> keep;
        for (Index i = 0; i < n; ++i)
            if (folds[i] != 0) keep.push_back(i);
        const Index n1 = static_cast<Index>(keep.size());
        for (Index j = 0; j < 3; ++j) {
            const auto& b = pm.bases[j];
            const FoldBasis f = subset_basis(b, keep);
            Vec y1(n1);
            Mat U1(n1, b.m());
            for (Index i = 0; i < n1; ++i) {
                y1[i] = d.y[keep[i]];
                U1.row(i) = b.U.row(keep[i]);
            }
            for (double lam : {0.01, 0.3, 5.0, 100.0}) {
                Mat A(n1, b.m() + 1);
                A.col(0).setOnes();
                A.rightCols(b.m()) = U1;
                Mat pen = Mat::Zero(b.m() + 1, b.m() + 1);
                pen.bottomRightCorner(b.m(), b.m()) = b.D.asDiagonal();
                const Vec direct = A * (A.transpose() * A + lam * pen).ldlt().solve(A.transpose() * y1);
                const Vec yc = (y1.array() - y1.mean()).matrix();
                const Vec th = ((f.U_sub.transpose() * yc).array() / (1.0 + lam * f.D_sub.array())).matrix();
                const Vec trans = (f.U_sub * th).array() + y1.mean();
                worst = std::max(worst, (direct - trans).cwiseAbs().maxCoeff());
            }
        }
    }

    int runs = 0, ok = 0;
    for (int rep = 0; rep < 4; ++rep) {
        std::mt19937_64 rng(700 + rep);
        Dataset d = random_gaussian(100, 5, rng, 1.0);
        GamselConfig cfg = small_config();
        for (CvMode mode : {CvMode::kRegenerate, CvMode::kTransform}) {
            const CvResult cv = cv_path(d, cfg, 5, 700 + rep, mode);
            ++runs;
            ok += cv.lambda_grid[cv.index_1se] >= cv.lambda_grid[cv.index_min];
        }
    }
    report(10, worst <= 1e-8 && ok == runs,
           "transformed vs direct fitted values " + fmt("%.2e", worst) + ", 1-SE lambda >= min-error lambda in "
               + std::to_string(ok) + "/" + std::to_string(runs) + " CV runs");
}

Dataset load(const std::string& path, const std::string& response)
{
    const CsvTable t = read_csv_file(path);
    const Index yc = t.column(response);
    if (yc < 0) throw InvalidInput("'" + path + "' has no column '" + response + "'");
    Dataset d;
    d.y = t.data.col(yc);
    d.X.resize(t.data.rows(), t.data.cols() - 1);
    for (Index c = 0, k = 0; c < t.data.cols(); ++c) {
        if (c == yc) continue;
        d.X.col(k++) = t.data.col(c);
        d.names.push_back(t.header[c]);
    }
    return d;
}

void spam()
{
    const char* train = std::getenv("GAMSEL_SPAM_TRAIN");
    const char* test = std::getenv("GAMSEL_SPAM_TEST");
    if (!train || !test) {
        std::printf("[SKIP] criterion 11: set GAMSEL_SPAM_TRAIN and GAMSEL_SPAM_TEST to run the spam check\n");
        return;
    }
    const char* resp = std::getenv("GAMSEL_SPAM_RESPONSE");
    const std::string response = resp ? resp : "spam";
    const Dataset tr = load(train, response);
    const Dataset te = load(test, response);
    GamselConfig cfg;
    cfg.family = Family::kBinomial;
    cfg.gamma = 0.5;
    cfg.degree = 10;
    cfg.df = 4.0;
    const CvResult cv = cv_path(tr, cfg, 10, 1);
    const GamselPath path = fit(tr, cfg, cv.lambda_grid);
    const Prediction pr = predict(path, te.X, {cv.index_1se});
    double wrong = 0.0;
    for (Index i = 0; i < te.n(); ++i) wrong += (pr.eta(i, 0) > 0.0 ? 1.0 : 0.0) != te.y[i];
    const double err = wrong / static_cast<double>(te.n());
    report(11, err <= 0.07, "test misclassification at the 1-SE lambda " + fmt("%.4f", err) + " on "
                                + std::to_string(te.n()) + " rows (train " + std::to_string(tr.n()) + ")");
}

} // namespace

int main()
{
    const auto t0 = Clock::now();
    const std::vector<std::pair<int, std::function<void()>>> steps = {
        {1, basis_correctness}, {2, smoother_oracle}, {3, prox_oracle},  {4, full_problem_oracle},
        {5, lambda_max_contract}, {6, screening_safety}, {8, logistic_mm}, {9, sticky_recovery},
        {10, fold_subsetting}, {11, spam},
    };
    for (const auto& [id, step] : steps) {
        try {
            step();
        } catch (const std::exception& e) {
            report(id, false, std::string("exception: ") + e.what());
        }
        if (id == 8) {
            report(7, descent.count > 0 && descent.worst <= 1e-12,
                   std::to_string(descent.count) + " block updates, max within-solve objective increase "
                       + fmt("%.2e", std::max(0.0, descent.worst)));
        }
    }
    std::printf("total %.1f s, %d failing\n", seconds_since(t0), failures);
    return failures == 0 ? 0 : 1;
}
