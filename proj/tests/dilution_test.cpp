#include <gtest/gtest.h>

#include <cmath>

#include "vastvocab/checks.hpp"
#include "vastvocab/dilution.hpp"

using namespace vastvocab;

namespace {

double logit_of(double p) { return std::log(p / (1.0 - p)); }

LabeledLogits uniform_item(std::size_t c, double sigma_pos, double sigma_neg,
                           std::size_t positives = 1) {
    LabeledLogits item;
    item.logits.assign(c, logit_of(sigma_neg));
    item.labels.assign(c, 0);
    for (std::size_t i = 0; i < positives; ++i) {
        item.logits[i] = logit_of(sigma_pos);
        item.labels[i] = 1;
    }
    return item;
}

}  // namespace

TEST(Rho, HandArithmeticBalancedCase) {
    // 1 positive at sigma 0.2 (|grad| = 0.8), 4 negatives at sigma 0.2
    auto item = uniform_item(5, 0.2, 0.2);
    EXPECT_NEAR(rho(item, LossConfig::ce()), 1.0, 1e-12);
}

TEST(Rho, InverseScalingWithCategoryCount) {
    // 1 positive, 100 negatives, all sigma 0.5: 0.5 / 50
    auto item = uniform_item(101, 0.5, 0.5);
    EXPECT_NEAR(rho(item, LossConfig::ce()), 0.01, 1e-14);
}

TEST(Rho, NoPositivesRejected) {
    LabeledLogits item{{0.0, 1.0}, {0, 0}};
    EXPECT_THROW(rho(item, LossConfig::ce()), std::invalid_argument);
}

TEST(Rho, ZeroNegativeMassGivesInfinity) {
    LabeledLogits item{{0.0, 0.0}, {1, 1}};
    EXPECT_TRUE(std::isinf(rho(item, LossConfig::ce())));
}

TEST(Rho, ScalingLawExact) {
    // fixed activations: rho(2C)/rho(C) == (C-1)/(2C-1)
    for (std::size_t c : {10u, 100u, 1000u}) {
        auto small = uniform_item(c, 0.3, 0.15);
        auto big = uniform_item(2 * c, 0.3, 0.15);
        const double r1 = rho(small, LossConfig::ce());
        const double r2 = rho(big, LossConfig::ce());
        const double expect = static_cast<double>(c - 1) /
                              static_cast<double>(2 * c - 1);
        EXPECT_NEAR(r2 / r1, expect, 1e-12);
    }
}

TEST(Eta, HandArithmeticHardSplit) {
    // 10 hard negatives at sigma 0.9, 90 easy at sigma 0.1, one positive.
    LabeledLogits item;
    item.logits.assign(101, logit_of(0.1));
    item.labels.assign(101, 0);
    item.labels[0] = 1;
    for (std::size_t i = 1; i <= 10; ++i) item.logits[i] = logit_of(0.9);
    // hard fraction 0.10 of 100 negatives -> exactly the 10 hot ones
    EXPECT_NEAR(eta(item, LossConfig::ce(), 0.10), 9.0 / 18.0, 1e-12);
}

TEST(Eta, UniformNegativesGiveExactlyHardFraction) {
    auto item = uniform_item(101, 0.5, 0.2);
    EXPECT_NEAR(eta(item, LossConfig::ce(), 0.10), 0.10, 1e-13);
    EXPECT_NEAR(eta(item, LossConfig::ce(), 0.25), 0.25, 1e-13);
}

TEST(Eta, NoNegativesRejected) {
    LabeledLogits item{{0.0}, {1}};
    EXPECT_THROW(eta(item, LossConfig::ce(), 0.1), std::invalid_argument);
}

TEST(Eta, NonIncreasingAsHardFractionShrinks) {
    Rng rng(31);
    LabeledLogits item;
    item.logits.resize(500);
    item.labels.assign(500, 0);
    item.labels[7] = 1;
    for (auto& z : item.logits) z = rng.uniform(-5.0, 5.0);
    double prev = 1.1;
    for (double f : {1.0, 0.5, 0.25, 0.1, 0.05, 0.01}) {
        const double e = eta(item, LossConfig::focal(0.25, 2.0), f);
        EXPECT_LE(e, prev + 1e-14);
        EXPECT_GE(e, 0.0);
        EXPECT_LE(e, 1.0);
        prev = e;
    }
}

TEST(RhoGeneralized, BalancedReductionMatchesRho) {
    // balanced counts n+ = N/C and uniform activations: equals Eq-3 rho
    const std::size_t c = 50;
    auto item = uniform_item(c, 0.3, 0.3);
    const std::size_t total = c * 20;
    const double rg = rho_generalized(20, total, item, LossConfig::ce());
    EXPECT_NEAR(rg, rho(item, LossConfig::ce()), 1e-15);
}

TEST(RhoGeneralized, LinearInPositiveCount) {
    Rng rng(33);
    LabeledLogits item;
    item.logits.resize(80);
    item.labels.assign(80, 0);
    item.labels[3] = 1;
    for (auto& z : item.logits) z = rng.uniform(-4.0, 4.0);
    const double full = rho_generalized(40, 100000, item, LossConfig::ce());
    const double half = rho_generalized(20, 100000, item, LossConfig::ce());
    // (N - n+) barely moves, the n+ factor dominates
    EXPECT_NEAR(half / full, 0.5 * (100000.0 - 40.0) / (100000.0 - 20.0), 1e-12);
}

TEST(RhoGeneralized, InvalidSampleCountsRejected) {
    auto item = uniform_item(10, 0.3, 0.3);
    EXPECT_THROW(rho_generalized(0, 10, item, LossConfig::ce()),
                 std::invalid_argument);
    EXPECT_THROW(rho_generalized(10, 10, item, LossConfig::ce()),
                 std::invalid_argument);
}

TEST(RebalanceFactor, UniformKeep99Of9999) {
    auto item = uniform_item(10000, 0.5, 0.5);
    std::vector<std::size_t> sel;
    sel.push_back(0);  // the positive
    for (std::size_t i = 1; i <= 99; ++i) sel.push_back(i * 100);
    EXPECT_NEAR(rebalance_factor(item, sel, LossConfig::ce()), 9999.0 / 99.0,
                1e-9);
}

TEST(RebalanceFactor, KeepAllIsUnity) {
    Rng rng(35);
    LabeledLogits item;
    item.logits.resize(200);
    item.labels.assign(200, 0);
    item.labels[11] = 1;
    for (auto& z : item.logits) z = rng.uniform(-4.0, 4.0);
    std::vector<std::size_t> all(200);
    for (std::size_t i = 0; i < 200; ++i) all[i] = i;
    EXPECT_NEAR(rebalance_factor(item, all, LossConfig::ce()), 1.0, 1e-15);
}

TEST(RebalanceFactor, MissingPositiveRejectedWithDiagnostic) {
    auto item = uniform_item(10, 0.5, 0.5);
    std::vector<std::size_t> sel = {1, 2, 3};
    try {
        rebalance_factor(item, sel, LossConfig::ce());
        FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("recall"), std::string::npos);
    }
}

TEST(RebalanceFactor, HardestSelectionBoundedByActivityRatio) {
    Rng rng(36);
    LabeledLogits item;
    const std::size_t c = 2000;
    item.logits.resize(c);
    item.labels.assign(c, 0);
    item.labels[0] = 1;
    for (auto& z : item.logits) z = rng.uniform(-5.0, 3.0);

    // top-k selection by logit among negatives, plus the positive
    std::vector<std::size_t> order;
    for (std::size_t i = 1; i < c; ++i) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return item.logits[a] > item.logits[b];
    });
    const std::size_t k = 100;
    std::vector<std::size_t> sel = {0};
    for (std::size_t i = 0; i + 1 < k; ++i) sel.push_back(order[i]);

    const double factor = rebalance_factor(item, sel, LossConfig::ce());
    EXPECT_GE(factor, 1.0);
    // hard negatives carry above-average gradient, so the factor must come
    // in under the plain count ratio
    const double count_ratio = static_cast<double>(c - 1) /
                               static_cast<double>(k - 1);
    EXPECT_LT(factor, count_ratio);
    EXPECT_NEAR(factor,
                checks::oracle::rebalance_bruteforce(item, sel, LossConfig::ce()),
                1e-12);
}

TEST(RebalanceFactor, UniformRandomSelectionMatchesExpectedRatio) {
    // E[factor] ~ (C-1)/(C'-|pos|) under uniform selection of negatives
    Rng rng(37);
    const std::size_t c = 500;
    const std::size_t keep_negs = 25;
    LabeledLogits item;
    item.logits.resize(c);
    item.labels.assign(c, 0);
    item.labels[4] = 1;
    for (auto& z : item.logits) z = rng.uniform(-4.0, 4.0);

    std::vector<std::size_t> negs;
    for (std::size_t i = 0; i < c; ++i)
        if (item.labels[i] == 0) negs.push_back(i);

    double mean_inv = 0.0;
    const int draws = 1000;
    for (int d = 0; d < draws; ++d) {
        rng.shuffle(negs);
        std::vector<std::size_t> sel = {4};
        sel.insert(sel.end(), negs.begin(), negs.begin() + keep_negs);
        mean_inv += 1.0 / rebalance_factor(item, sel, LossConfig::ce());
    }
    mean_inv /= draws;
    // 1/factor is linear in the selected mass, so its expectation is exact
    EXPECT_NEAR(mean_inv, static_cast<double>(keep_negs) /
                              static_cast<double>(c - 1),
                0.05 * static_cast<double>(keep_negs) / static_cast<double>(c - 1));
}

TEST(DilutionOracles, BruteForceSuiteAgrees) {
    auto r = checks::check_dilution_bruteforce(101, 2000, 20);
    EXPECT_TRUE(r.pass) << r.name << ": " << r.detail;
}

TEST(SimulateTrace, ZeroLearningRateFreezesMetrics) {
    DilutionConfig cfg;
    cfg.categories = 120;
    cfg.loss = LossConfig::ce();
    cfg.lr = 0.0;
    cfg.iters = 25;
    cfg.seed = 5;
    auto trace = simulate_trace(cfg);
    ASSERT_EQ(trace.records.size(), 25u);
    EXPECT_FALSE(trace.diverged);
    for (const auto& r : trace.records) {
        EXPECT_DOUBLE_EQ(r.rho, trace.records[0].rho);
        EXPECT_DOUBLE_EQ(r.eta, trace.records[0].eta);
        EXPECT_DOUBLE_EQ(r.pos_grad_norm, trace.records[0].pos_grad_norm);
        EXPECT_DOUBLE_EQ(r.neg_grad_norm, trace.records[0].neg_grad_norm);
    }
}

TEST(SimulateTrace, Deterministic) {
    DilutionConfig cfg;
    cfg.categories = 300;
    cfg.loss = LossConfig::focal(0.25, 2.0);
    cfg.iters = 50;
    cfg.seed = 77;
    auto a = simulate_trace(cfg);
    auto b = simulate_trace(cfg);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].rho, b.records[i].rho);
        EXPECT_EQ(a.records[i].eta, b.records[i].eta);
        EXPECT_EQ(a.records[i].pos_grad_norm, b.records[i].pos_grad_norm);
        EXPECT_EQ(a.records[i].neg_grad_norm, b.records[i].neg_grad_norm);
    }
}

TEST(SimulateTrace, SmallVocabularyKeepsLargerRatio) {
    DilutionConfig small;
    small.categories = 80;
    small.loss = LossConfig::ce();
    small.iters = 500;
    small.seed = 11;

    DilutionConfig big = small;
    big.categories = 13204;

    const double rho_small = simulate_trace(small).mean_rho(500);
    const double rho_big = simulate_trace(big).mean_rho(500);
    EXPECT_GT(rho_small, rho_big);
    EXPECT_GT(rho_small, 2.0 * rho_big);
}

TEST(SimulateTrace, FocalBeatsCeAtVastVocabulary) {
    DilutionConfig ce;
    ce.categories = 13204;
    ce.loss = LossConfig::ce();
    ce.iters = 500;
    ce.seed = 11;

    DilutionConfig fl = ce;
    fl.loss = LossConfig::focal(0.25, 2.0);

    EXPECT_GT(simulate_trace(fl).mean_rho(500), simulate_trace(ce).mean_rho(500));
}

TEST(SimulateTrace, EtaStaysInUnitInterval) {
    DilutionConfig cfg;
    cfg.categories = 400;
    cfg.loss = LossConfig::asymmetric();
    cfg.iters = 200;
    cfg.seed = 13;
    auto trace = simulate_trace(cfg);
    for (const auto& r : trace.records) {
        EXPECT_GE(r.eta, 0.0);
        EXPECT_LE(r.eta, 1.0);
    }
}

TEST(SimulateTrace, HighGammaDivergesModerateGammaCompletes) {
    DilutionConfig cfg;
    cfg.categories = 13204;
    cfg.iters = 2000;
    cfg.seed = 11;

    cfg.loss = LossConfig::focal(0.25, 5.0);
    auto hot = simulate_trace(cfg);
    EXPECT_TRUE(hot.diverged);
    EXPECT_LT(hot.diverged_at, 2000u);

    cfg.loss = LossConfig::focal(0.25, 2.0);
    auto cool = simulate_trace(cfg);
    EXPECT_FALSE(cool.diverged);
    EXPECT_EQ(cool.records.size(), 2000u);
}

TEST(TraceCsv, HeaderAndRows) {
    DilutionConfig cfg;
    cfg.categories = 50;
    cfg.loss = LossConfig::ce();
    cfg.iters = 3;
    cfg.seed = 1;
    auto csv = trace_to_csv(simulate_trace(cfg));
    EXPECT_EQ(csv.find("iter,rho,eta,pos_grad_norm,neg_grad_norm\n"), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}
