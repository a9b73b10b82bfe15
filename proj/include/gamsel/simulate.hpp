#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>
#include <gamsel/dataset.hpp>
#include <gamsel/model.hpp>

namespace gamsel {

/// Additive simulation design; variables not listed as linear or nonlinear are null.
struct Scenario
{
    Index n = 200;
    Index p = 30;
    std::vector<Index> idx_linear;    // 0-based
    std::vector<Index> idx_nonlinear; // 0-based
    double noise_sd = 1.0;
    double snr = 0.0; // Var(signal) / noise variance; overrides noise_sd when > 0
    Index poly_degree = 5;
    std::uint64_t seed = 1;

    void validate() const
    {
        if (n < 1) throw InvalidInput("scenario: n must be >= 1");
        if (p < 1) throw InvalidInput("scenario: p must be >= 1");
        if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw InvalidInput("scenario: noise_sd must be finite and >= 0");
        if (!(snr >= 0.0) || !std::isfinite(snr)) throw InvalidInput("scenario: snr must be finite and >= 0");
        if (poly_degree < 2) throw InvalidInput("scenario: poly_degree must be >= 2");
        std::vector<bool> used(p, false);
        for (const auto* set : {&idx_linear, &idx_nonlinear}) {
            for (Index j : *set) {
                if (j < 0 || j >= p) throw InvalidInput("scenario: variable index " + std::to_string(j + 1) + " out of range");
                if (used[j]) throw InvalidInput("scenario: variable " + std::to_string(j + 1) + " listed twice");
                used[j] = true;
            }
        }
    }

    std::vector<TermClass> labels() const
    {
        std::vector<TermClass> out(p, TermClass::kZero);
        for (Index j : idx_linear) out[j] = TermClass::kLinear;
        for (Index j : idx_nonlinear) out[j] = TermClass::kNonlinear;
        return out;
    }
};

/// n=200, p=30: variables 1-6 linear, 7-10 degree-5 polynomials.
inline Scenario scenario_sec51()
{
    Scenario s;
    s.n = 200;
    s.p = 30;
    s.idx_linear = {0, 1, 2, 3, 4, 5};
    s.idx_nonlinear = {6, 7, 8, 9};
    s.snr = 3.0;
    return s;
}

/// Twelve uniform variables: 3 linear, 3 nonlinear, 6 null.
inline Scenario scenario_fig3()
{
    Scenario s;
    s.n = 200;
    s.p = 12;
    s.idx_linear = {0, 1, 2};
    s.idx_nonlinear = {3, 4, 5};
    s.snr = 3.0;
    return s;
}

inline Scenario scenario_preset(const std::string& name)
{
    if (name == "sec51") return scenario_sec51();
    if (name == "fig3") return scenario_fig3();
    throw InvalidInput("unknown scenario preset '" + name + "' (expected sec51 or fig3)");
}

/// One generating function: slope * x, or (poly(x) - center) / scale.
struct TruthTerm
{
    TermClass cls = TermClass::kZero;
    double slope = 0.0;
    Vec poly; // coefficients of x^1..x^d
    double center = 0.0;
    double scale = 1.0;

    double operator()(double x) const
    {
        switch (cls) {
        case TermClass::kLinear: return slope * x;
        case TermClass::kNonlinear: {
            double v = 0.0, xp = 1.0;
            for (Index d = 0; d < poly.size(); ++d) {
                xp *= x;
                v += poly[d] * xp;
            }
            return (v - center) / scale;
        }
        default: return 0.0;
        }
    }
};

struct SimData
{
    Dataset data;
    std::vector<TermClass> truth;
    std::vector<TruthTerm> terms;
    Vec signal;
    double noise_sd = 0.0;
};

inline SimData gen_scenario(const Scenario& sc)
{
    sc.validate();
    std::mt19937_64 rng(sc.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SimData out;
    out.truth = sc.labels();
    out.data.X.resize(sc.n, sc.p);
    for (Index i = 0; i < sc.n; ++i)
        for (Index j = 0; j < sc.p; ++j) out.data.X(i, j) = unif(rng);
    for (Index j = 0; j < sc.p; ++j) out.data.names.push_back("x" + std::to_string(j + 1));

    out.terms.resize(sc.p);
    for (Index j = 0; j < sc.p; ++j) {
        TruthTerm& t = out.terms[j];
        t.cls = out.truth[j];
        if (t.cls == TermClass::kLinear) {
            t.slope = gauss(rng);
        } else if (t.cls == TermClass::kNonlinear) {
            t.poly.resize(sc.poly_degree);
            for (Index d = 0; d < sc.poly_degree; ++d) t.poly[d] = gauss(rng);
            Vec raw(sc.n);
            for (Index i = 0; i < sc.n; ++i) raw[i] = t(out.data.X(i, j));
            t.center = raw.mean();
            const double sd = std::sqrt((raw.array() - t.center).square().mean());
            t.scale = sd > 0.0 ? sd : 1.0;
        }
    }

    out.signal = Vec::Zero(sc.n);
    for (Index i = 0; i < sc.n; ++i)
        for (Index j = 0; j < sc.p; ++j) out.signal[i] += out.terms[j](out.data.X(i, j));
    out.noise_sd = sc.noise_sd;
    if (sc.snr > 0.0) {
        const double var = (out.signal.array() - out.signal.mean()).square().mean();
        out.noise_sd = std::sqrt(var / sc.snr);
    }
    out.data.y = out.signal;
    if (out.noise_sd > 0.0)
        for (Index i = 0; i < sc.n; ++i) out.data.y[i] += out.noise_sd * gauss(rng);
    return out;
}

struct MisclassRates
{
    double zeros = 0.0;           // true zero fitted nonzero
    double linear = 0.0;          // true linear fitted zero or nonlinear
    double nonlinear = 0.0;       // true nonlinear fitted zero or linear
    double zero_vs_nonzero = 0.0; // zero/nonzero status wrong, over all p
};

inline MisclassRates misclassification(const std::vector<TermClass>& truth, const std::vector<TermClass>& fitted)
{
    if (truth.size() != fitted.size()) throw InvalidInput("misclassification: length mismatch");
    double nz = 0, nl = 0, nn = 0, ez = 0, el = 0, en = 0, ezn = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        const bool fit_zero = fitted[j] == TermClass::kZero;
        switch (truth[j]) {
        case TermClass::kZero: ++nz; ez += !fit_zero; break;
        case TermClass::kLinear: ++nl; el += fitted[j] != TermClass::kLinear; break;
        case TermClass::kNonlinear: ++nn; en += fitted[j] != TermClass::kNonlinear; break;
        }
        ezn += fit_zero != (truth[j] == TermClass::kZero);
    }
    MisclassRates r;
    r.zeros = nz > 0 ? ez / nz : 0.0;
    r.linear = nl > 0 ? el / nl : 0.0;
    r.nonlinear = nn > 0 ? en / nn : 0.0;
    r.zero_vs_nonzero = truth.empty() ? 0.0 : ezn / static_cast<double>(truth.size());
    return r;
}

/// Number of nonzero terms and the fraction of them that are truly zero (0 for an empty selection).
inline std::pair<Index, double> selection_fdr(const std::vector<TermClass>& truth, const std::vector<TermClass>& fitted)
{
    if (truth.size() != fitted.size()) throw InvalidInput("selection_fdr: length mismatch");
    Index size = 0, false_pos = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        if (fitted[j] == TermClass::kZero) continue;
        ++size;
        false_pos += truth[j] == TermClass::kZero;
    }
    return {size, size > 0 ? static_cast<double>(false_pos) / static_cast<double>(size) : 0.0};
}

/// For every support size reached along the path, the smallest FDR among points of that size.
inline std::map<Index, double> fdr_at_model_size(const std::vector<TermClass>& truth, const std::vector<PathPoint>& points)
{
    std::map<Index, double> out;
    for (const auto& pt : points) {
        const auto [size, fdr] = selection_fdr(truth, pt.classes);
        auto it = out.find(size);
        if (it == out.end()) out.emplace(size, fdr);
        else it->second = std::min(it->second, fdr);
    }
    return out;
}

} // namespace gamsel
