#include <gtest/gtest.h>

#include <cmath>

#include "vastvocab/checks.hpp"
#include "vastvocab/losses.hpp"
#include "vastvocab/rng.hpp"

using namespace vastvocab;

TEST(SigmoidCeGrad, ZeroLogitPositive) {
    LabeledLogits item{{0.0}, {1}};
    EXPECT_DOUBLE_EQ(sigmoid_ce_grad(item)[0], -0.5);
}

TEST(SigmoidCeGrad, ZeroLogitNegative) {
    LabeledLogits item{{0.0}, {0}};
    EXPECT_DOUBLE_EQ(sigmoid_ce_grad(item)[0], 0.5);
}

TEST(SigmoidCeGrad, SaturatedPositive) {
    // high-precision oracle: sigma(20) - 1 = -2.0611536181902035814e-9
    LabeledLogits item{{20.0}, {1}};
    EXPECT_NEAR(sigmoid_ce_grad(item)[0], -2.0611536181902036e-9, 1e-20);
}

TEST(FocalGrad, DefaultConfigAtZeroLogit) {
    LabeledLogits item{{0.0}, {1}};
    auto cfg = LossConfig::focal(0.25, 2.0);
    const double fd = checks::fd_scalar(
        [&](double z) { return focal_value(z, 1, cfg); }, 0.0);
    EXPECT_NEAR(fd, -0.074572, 1e-6);
    // 0.0625 * (ln(1/2) - 1/2), cross-checked at 50 digits
    EXPECT_NEAR(focal_grad(item, cfg)[0], -0.074571698784996582, 1e-15);
    EXPECT_NEAR(focal_grad(item, cfg)[0], fd, 1e-10);
}

TEST(FocalGrad, GammaZeroIsAlphaScaledCe) {
    auto cfg = LossConfig::focal(0.5, 0.0);
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const double z = rng.uniform(-6.0, 6.0);
        const int y = rng.uniform01() < 0.5 ? 0 : 1;
        LabeledLogits item{{z}, {y}};
        EXPECT_DOUBLE_EQ(focal_grad(item, cfg)[0],
                         0.5 * sigmoid_ce_grad(item)[0]);
    }
}

TEST(FocalGrad, EasyNegativeFullyDownWeighted) {
    LabeledLogits item{{-20.0}, {0}};
    auto cfg = LossConfig::focal(0.25, 2.0);
    EXPECT_NEAR(focal_grad(item, cfg)[0], 0.0, 1e-17);
}

TEST(FocalGrad, NegativeGammaRejected) {
    auto cfg = LossConfig::focal(0.25, -1.0);
    LabeledLogits item{{0.0}, {0}};
    EXPECT_THROW(focal_grad(item, cfg), std::invalid_argument);
}

TEST(AsymmetricGrad, DegeneratesToCe) {
    auto cfg = LossConfig::asymmetric(0.0, 0.0, 0.0);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const double z = rng.uniform(-6.0, 6.0);
        const int y = rng.uniform01() < 0.5 ? 0 : 1;
        LabeledLogits item{{z}, {y}};
        EXPECT_NEAR(asymmetric_grad(item, cfg)[0], sigmoid_ce_grad(item)[0], 1e-15);
    }
}

TEST(AsymmetricGrad, ClippedEasyNegativeIsExactlyZero) {
    auto cfg = LossConfig::asymmetric(0.0, 4.0, 0.05);
    // sigma(-4) ~ 0.018 < 0.05
    LabeledLogits item{{-4.0}, {0}};
    EXPECT_DOUBLE_EQ(asymmetric_grad(item, cfg)[0], 0.0);
}

TEST(AsymmetricGrad, MatchesFiniteDifferenceAwayFromKink) {
    auto cfg = LossConfig::asymmetric(0.0, 4.0, 0.05);
    const double analytic = asymmetric_grad_scalar(1.0, 0, cfg);
    const double fd = checks::fd_scalar(
        [&](double z) { return asymmetric_value(z, 0, cfg); }, 1.0);
    EXPECT_NEAR(analytic, fd, 1e-8);
}

TEST(AsymmetricGrad, ClipOutOfRangeRejected) {
    auto cfg = LossConfig::asymmetric(0.0, 4.0, 1.0);
    LabeledLogits item{{0.0}, {0}};
    EXPECT_THROW(asymmetric_grad(item, cfg), std::invalid_argument);
}

TEST(LossGradients, HundredProbeFiniteDifferenceSuite) {
    for (auto family : {LossFamily::sigmoid_ce, LossFamily::focal,
                        LossFamily::asymmetric}) {
        auto r = checks::check_loss_gradients_fd(family, 2024);
        EXPECT_TRUE(r.pass) << r.name << ": " << r.detail;
    }
}

TEST(LossGradients, SignConvention) {
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        const double z = rng.uniform(-8.0, 8.0);
        LossConfig cfgs[3] = {
            LossConfig::ce(),
            LossConfig::focal(rng.uniform(0.05, 0.95), rng.uniform(0.0, 5.0)),
            LossConfig::asymmetric(rng.uniform(0.0, 3.0), rng.uniform(0.0, 6.0),
                                   rng.uniform(0.0, 0.5))};
        for (const auto& cfg : cfgs) {
            EXPECT_LE(loss_grad_scalar(z, 1, cfg), 0.0);
            EXPECT_GE(loss_grad_scalar(z, 0, cfg), 0.0);
        }
    }
}

// Non-decreasing in p below the near-saturation hump. Past p ~ 0.95 the
// focal magnitude peaks and settles back to 1-alpha, so the grid stops at
// p = 0.9.
TEST(LossGradients, FocalNegativeMagnitudeMonotoneInActivation) {
    const double z_max = std::log(0.9 / 0.1);
    for (double gamma : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        auto cfg = LossConfig::focal(0.25, gamma);
        double prev = 0.0;
        for (double z = -8.0; z <= z_max; z += 0.05) {
            const double g = std::fabs(focal_grad_scalar(z, 0, cfg));
            EXPECT_GE(g, prev - 1e-15) << "gamma " << gamma << " z " << z;
            prev = g;
        }
    }
}

TEST(ContrastiveAlignment, MatchedOrthonormalRowsGiveIdentity) {
    DenseMatrix obj = DenseMatrix::identity(4);
    DenseMatrix cat = DenseMatrix::identity(4);
    DenseMatrix s = contrastive_alignment(obj, cat);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            EXPECT_DOUBLE_EQ(s.at(i, j), i == j ? 1.0 : 0.0);
}

TEST(ContrastiveAlignment, ZeroObjectsGiveZeroScores) {
    Rng rng(8);
    DenseMatrix obj(3, 6);
    DenseMatrix cat = rng.gaussian_matrix(5, 6, 0.0, 1.0);
    DenseMatrix s = contrastive_alignment(obj, cat);
    for (double v : s.data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(ContrastiveAlignment, MatchesBruteForceDots) {
    Rng rng(9);
    DenseMatrix obj = rng.gaussian_matrix(3, 8, 0.0, 1.0);
    DenseMatrix cat = rng.gaussian_matrix(5, 8, 0.0, 1.0);
    DenseMatrix s = contrastive_alignment(obj, cat);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < 8; ++d) dot += obj.at(i, d) * cat.at(j, d);
            EXPECT_NEAR(s.at(i, j), dot, 1e-12);
        }
}

TEST(ContrastiveAlignment, DimMismatchRejected) {
    DenseMatrix obj(2, 4), cat(3, 5);
    EXPECT_THROW(contrastive_alignment(obj, cat), std::invalid_argument);
}
