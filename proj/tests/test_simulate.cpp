#include <gtest/gtest.h>
#include "helpers.hpp"

using namespace gamsel;
using namespace testutil;

TEST(Scenario, Presets)
{
    const Scenario a = scenario_preset("sec51");
    EXPECT_EQ(a.n, 200);
    EXPECT_EQ(a.p, 30);
    EXPECT_EQ(a.idx_linear.size(), 6u);
    EXPECT_EQ(a.idx_nonlinear.size(), 4u);
    const Scenario b = scenario_preset("fig3");
    EXPECT_EQ(b.p, 12);
    const auto lab = b.labels();
    EXPECT_EQ(std::count(lab.begin(), lab.end(), TermClass::kLinear), 3);
    EXPECT_EQ(std::count(lab.begin(), lab.end(), TermClass::kNonlinear), 3);
    EXPECT_EQ(std::count(lab.begin(), lab.end(), TermClass::kZero), 6);
    EXPECT_THROW(scenario_preset("boston"), InvalidInput);
}

TEST(Scenario, ValidationErrors)
{
    Scenario s = scenario_sec51();
    s.idx_nonlinear.push_back(0);
    EXPECT_THROW(gen_scenario(s), InvalidInput);
    s = scenario_sec51();
    s.idx_linear.push_back(30);
    EXPECT_THROW(gen_scenario(s), InvalidInput);
    s = scenario_sec51();
    s.noise_sd = -1.0;
    EXPECT_THROW(gen_scenario(s), InvalidInput);
}

TEST(GenScenario, DeterministicPerSeed)
{
    Scenario s = scenario_sec51();
    s.seed = 7;
    const SimData a = gen_scenario(s), b = gen_scenario(s);
    EXPECT_TRUE(a.data.X == b.data.X);
    EXPECT_TRUE(a.data.y == b.data.y);
    s.seed = 8;
    EXPECT_FALSE(gen_scenario(s).data.y == a.data.y);
}

TEST(GenScenario, NoiselessTruthReproducesResponse)
{
    Scenario s = scenario_fig3();
    s.snr = 0.0;
    s.noise_sd = 0.0;
    const SimData d = gen_scenario(s);
    EXPECT_GE(d.data.X.minCoeff(), 0.0);
    EXPECT_LE(d.data.X.maxCoeff(), 1.0);
    for (Index i = 0; i < s.n; ++i) {
        double f = 0.0;
        for (Index j = 0; j < s.p; ++j) f += d.terms[j](d.data.X(i, j));
        EXPECT_EQ(f, d.data.y[i]);
    }
    for (Index j : s.idx_nonlinear) {
        Vec f(s.n);
        for (Index i = 0; i < s.n; ++i) f[i] = d.terms[j](d.data.X(i, j));
        EXPECT_NEAR(f.mean(), 0.0, 1e-12);
        EXPECT_NEAR((f.array() - f.mean()).square().mean(), 1.0, 1e-12);
    }

    Scenario z = s;
    z.idx_linear.clear();
    z.idx_nonlinear.clear();
    EXPECT_EQ(max_abs(gen_scenario(z).data.y), 0.0);
}

TEST(GenScenario, SnrSetsNoiseLevel)
{
    Scenario s = scenario_sec51();
    s.snr = 3.0;
    const SimData d = gen_scenario(s);
    const double var = (d.signal.array() - d.signal.mean()).square().mean();
    EXPECT_NEAR(var / (d.noise_sd * d.noise_sd), 3.0, 1e-12);
}

TEST(Misclassification, DefinitionExamples)
{
    const auto truth = scenario_sec51().labels();
    EXPECT_EQ(misclassification(truth, truth).zero_vs_nonzero, 0.0);
    const auto perfect = misclassification(truth, truth);
    EXPECT_EQ(perfect.zeros + perfect.linear + perfect.nonlinear, 0.0);

    const auto zeros = misclassification(truth, std::vector<TermClass>(30, TermClass::kZero));
    EXPECT_EQ(zeros.zeros, 0.0);
    EXPECT_EQ(zeros.linear, 1.0);
    EXPECT_EQ(zeros.nonlinear, 1.0);
    EXPECT_NEAR(zeros.zero_vs_nonzero, 1.0 / 3.0, 1e-15);

    const auto nonlin = misclassification(truth, std::vector<TermClass>(30, TermClass::kNonlinear));
    EXPECT_EQ(nonlin.zeros, 1.0);
    EXPECT_EQ(nonlin.linear, 1.0);
    EXPECT_EQ(nonlin.nonlinear, 0.0);
    EXPECT_NEAR(nonlin.zero_vs_nonzero, 2.0 / 3.0, 1e-15);
    EXPECT_THROW(misclassification(truth, {}), InvalidInput);
}

TEST(Misclassification, ZeroVsNonzeroIsWeightedCombination)
{
    std::mt19937_64 rng(3);
    const auto truth = scenario_sec51().labels();
    std::uniform_int_distribution<int> cls(0, 2);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<TermClass> fitted(30);
        for (auto& c : fitted) c = static_cast<TermClass>(cls(rng));
        const auto r = misclassification(truth, fitted);
        double missed = 0;
        for (std::size_t j = 0; j < 30; ++j)
            missed += truth[j] != TermClass::kZero && fitted[j] == TermClass::kZero;
        EXPECT_NEAR(r.zero_vs_nonzero, (20.0 * r.zeros + missed) / 30.0, 1e-15);
        for (double v : {r.zeros, r.linear, r.nonlinear, r.zero_vs_nonzero}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(FdrAtModelSize, Conventions)
{
    const auto truth = scenario_sec51().labels();
    PathPoint empty, full;
    empty.classes.assign(30, TermClass::kZero);
    full.classes.assign(30, TermClass::kLinear);
    const auto curve = fdr_at_model_size(truth, {empty, full});
    EXPECT_EQ(curve.at(0), 0.0);
    EXPECT_NEAR(curve.at(30), 2.0 / 3.0, 1e-15);

    PathPoint worse = empty, better = empty;
    worse.classes[29] = TermClass::kLinear;
    better.classes[0] = TermClass::kLinear;
    EXPECT_EQ(fdr_at_model_size(truth, {worse, better}).at(1), 0.0);
}

TEST(FdrAtModelSize, EasyProblemsHaveCleanTopTen)
{
    std::vector<double> fdr10;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Scenario s = scenario_sec51();
        s.seed = seed;
        s.snr = 0.0;
        s.noise_sd = 0.01;
        const SimData d = gen_scenario(s);
        GamselConfig cfg;
        cfg.num_lambda = 100;
        cfg.lambda_min_ratio = 1e-4;
        const GamselPath path = fit(d.data, cfg);
        const auto curve = fdr_at_model_size(d.truth, path.points);
        // the curve may jump over size 10; take the nearest size reached above it
        auto it = curve.lower_bound(10);
        ASSERT_NE(it, curve.end());
        fdr10.push_back(it->first == 10 ? it->second : 1.0);
    }
    std::sort(fdr10.begin(), fdr10.end());
    EXPECT_EQ(0.5 * (fdr10[9] + fdr10[10]), 0.0);
}
