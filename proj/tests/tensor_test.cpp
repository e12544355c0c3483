#include <gtest/gtest.h>

#include <cmath>

#include "vastvocab/checks.hpp"
#include "vastvocab/matrix.hpp"
#include "vastvocab/nn.hpp"
#include "vastvocab/rng.hpp"
#include "vastvocab/tape.hpp"

using namespace vastvocab;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    DenseMatrix m(2, 2);
    m.data = {3.0, -1.5, 2.0, 7.0};
    DenseMatrix out = matmul_plain(DenseMatrix::identity(2), m);
    EXPECT_EQ(out.data, m.data);
}

TEST(Matmul, HandComputedProduct) {
    DenseMatrix a(2, 2);
    a.data = {1, 2, 3, 4};
    DenseMatrix b(2, 1);
    b.data = {0, 1};
    DenseMatrix c = matmul_plain(a, b);
    ASSERT_EQ(c.rows, 2u);
    ASSERT_EQ(c.cols, 1u);
    EXPECT_DOUBLE_EQ(c.data[0], 2.0);
    EXPECT_DOUBLE_EQ(c.data[1], 4.0);
}

TEST(Matmul, DimensionMismatchReportsShapes) {
    DenseMatrix a(2, 3), b(4, 2);
    try {
        matmul_plain(a, b);
        FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("4x2"), std::string::npos);
    }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto r = checks::check_matmul_gradient(seed);
        EXPECT_TRUE(r.pass) << r.name << " seed " << seed << ": " << r.detail;
    }
}

TEST(SoftmaxRows, UniformRowForZeroInput) {
    DenseMatrix m(1, 3);
    DenseMatrix s = softmax_rows_plain(m);
    for (double v : s.data) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxRows, LargeLogitsDoNotOverflow) {
    DenseMatrix m(1, 2);
    m.data = {1000.0, 0.0};
    DenseMatrix s = softmax_rows_plain(m);
    EXPECT_TRUE(s.all_finite());
    EXPECT_NEAR(s.data[0], 1.0, 1e-12);
    EXPECT_NEAR(s.data[1], 0.0, 1e-12);
}

TEST(SoftmaxRows, RowsSumToOneAcrossWideInputRange) {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        DenseMatrix m(4, 9);
        for (auto& v : m.data) v = rng.uniform(-1e3, 1e3);
        DenseMatrix s = softmax_rows_plain(m);
        for (std::size_t i = 0; i < s.rows; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < s.cols; ++j) {
                EXPECT_GE(s.at(i, j), 0.0);
                sum += s.at(i, j);
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(SoftmaxRows, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto r = checks::check_softmax_gradient(seed);
        EXPECT_TRUE(r.pass) << r.detail << " seed " << seed;
    }
}

TEST(LayerNorm, ConstantRowMapsToZeros) {
    DenseMatrix x(1, 4, 1.0);
    auto p = LayerNormParams::init(4);
    auto f = layer_norm_plain(x, p.gamma, p.beta);
    for (double v : f.out.data) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(LayerNorm, TwoPointRow) {
    DenseMatrix x(1, 2);
    x.data = {0.0, 2.0};
    auto p = LayerNormParams::init(2);
    auto f = layer_norm_plain(x, p.gamma, p.beta);
    // variance 1 plus eps correction: values slightly inside [-1, 1]
    EXPECT_NEAR(f.out.data[0], -1.0, 1e-4);
    EXPECT_NEAR(f.out.data[1], 1.0, 1e-4);
    EXPECT_LT(std::fabs(f.out.data[0]), 1.0);
}

TEST(LayerNorm, SingleColumnRejected) {
    DenseMatrix x(3, 1, 2.0);
    auto p = LayerNormParams::init(1);
    EXPECT_THROW(layer_norm_plain(x, p.gamma, p.beta), std::invalid_argument);
}

TEST(LayerNorm, OutputRowMeansVanish) {
    Rng rng(11);
    DenseMatrix x = rng.gaussian_matrix(3, 8, 0.7, 2.3);
    auto p = LayerNormParams::init(8);
    auto f = layer_norm_plain(x, p.gamma, p.beta);
    for (std::size_t i = 0; i < 3; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 8; ++j) mean += f.out.at(i, j);
        mean /= 8.0;
        EXPECT_LT(std::fabs(mean), 1e-10);
        for (std::size_t j = 0; j < 8; ++j) {
            const double d = f.out.at(i, j) - mean;
            var += d * d;
        }
        var /= 8.0;
        // eps in the divisor pulls variance slightly below 1
        double raw_mean = 0.0, raw_var = 0.0;
        for (std::size_t j = 0; j < 8; ++j) raw_mean += x.at(i, j);
        raw_mean /= 8.0;
        for (std::size_t j = 0; j < 8; ++j) {
            const double d = x.at(i, j) - raw_mean;
            raw_var += d * d;
        }
        raw_var /= 8.0;
        EXPECT_NEAR(var, raw_var / (raw_var + kLayerNormEps), 1e-10);
    }
}

TEST(LayerNorm, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto r = checks::check_layer_norm_gradient(seed);
        EXPECT_TRUE(r.pass) << r.detail << " seed " << seed;
    }
}

TEST(MultiHeadAttention, SingleKeyOutputIgnoresQueryValues) {
    Rng rng(3);
    AttentionConfig cfg{2, 8};
    auto mha = MultiHeadAttention::init(cfg, rng);
    DenseMatrix kv = rng.gaussian_matrix(1, 8, 0.0, 1.0);
    DenseMatrix q1 = rng.gaussian_matrix(3, 8, 0.0, 1.0);
    DenseMatrix q2 = rng.gaussian_matrix(3, 8, 0.0, 5.0);

    auto run = [&](const DenseMatrix& q) {
        Tape t;
        auto p = mha.push(t);
        Var out = multi_head_attention(t, t.input(q), t.input(kv), t.input(kv), p, cfg);
        return t.value(out);
    };
    DenseMatrix o1 = run(q1);
    DenseMatrix o2 = run(q2);
    for (std::size_t i = 0; i < o1.size(); ++i)
        EXPECT_NEAR(o1.data[i], o2.data[i], 1e-12);

    // and it equals the output projection of the value projection of the row
    DenseMatrix v = matmul_plain(kv, mha.wv);
    for (std::size_t j = 0; j < 8; ++j) v.data[j] += mha.bv.data[j];
    DenseMatrix expect = matmul_plain(v, mha.wo);
    for (std::size_t j = 0; j < 8; ++j) expect.data[j] += mha.bo.data[j];
    for (std::size_t i = 0; i < o1.rows; ++i)
        for (std::size_t j = 0; j < o1.cols; ++j)
            EXPECT_NEAR(o1.at(i, j), expect.at(0, j), 1e-12);
}

TEST(MultiHeadAttention, IdentityProjectionsKeepOutputInValueHull) {
    AttentionConfig cfg{1, 4};
    MultiHeadAttention mha;
    mha.cfg = cfg;
    mha.wq = mha.wk = mha.wv = mha.wo = DenseMatrix::identity(4);
    mha.bq = mha.bk = mha.bv = mha.bo = DenseMatrix(1, 4);

    Rng rng(5);
    DenseMatrix x = rng.gaussian_matrix(6, 4, 0.0, 1.0);
    Tape t;
    auto p = mha.push(t);
    Var xv = t.input(x);
    Var out = multi_head_attention(t, xv, xv, xv, p, cfg);
    const DenseMatrix& o = t.value(out);

    for (std::size_t j = 0; j < 4; ++j) {
        double lo = x.at(0, j), hi = x.at(0, j);
        for (std::size_t i = 1; i < 6; ++i) {
            lo = std::min(lo, x.at(i, j));
            hi = std::max(hi, x.at(i, j));
        }
        for (std::size_t i = 0; i < 6; ++i) {
            EXPECT_GE(o.at(i, j), lo - 1e-12);
            EXPECT_LE(o.at(i, j), hi + 1e-12);
        }
    }
}

TEST(MultiHeadAttention, AllParameterGradientsMatchFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto r = checks::check_mha_gradient(seed);
        EXPECT_TRUE(r.pass) << r.detail << " seed " << seed;
    }
}

TEST(FfnBlock, ZeroWeightsGiveZeroOutput) {
    FeedForward f;
    f.hidden = 6;
    f.w1 = DenseMatrix(4, 6);
    f.b1 = DenseMatrix(1, 6);
    f.w2 = DenseMatrix(6, 4);
    f.b2 = DenseMatrix(1, 4);
    Rng rng(9);
    DenseMatrix x = rng.gaussian_matrix(2, 4, 0.0, 1.0);
    Tape t;
    auto p = f.push(t);
    Var out = ffn_block(t, t.input(x), p);
    for (double v : t.value(out).data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(FfnBlock, IdentityLayersPassThroughNonlinearity) {
    FeedForward f;
    f.hidden = 4;
    f.w1 = DenseMatrix::identity(4);
    f.b1 = DenseMatrix(1, 4);
    f.w2 = DenseMatrix::identity(4);
    f.b2 = DenseMatrix(1, 4);
    Rng rng(10);
    DenseMatrix x = rng.gaussian_matrix(3, 4, 0.0, 1.5);
    Tape t;
    auto p = f.push(t);
    Var out = ffn_block(t, t.input(x), p);
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_NEAR(t.value(out).data[i], gelu_scalar(x.data[i]), 1e-15);
}

TEST(FfnBlock, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto r = checks::check_ffn_gradient(seed);
        EXPECT_TRUE(r.pass) << r.detail << " seed " << seed;
    }
}

TEST(Tape, SharedSubexpressionAccumulatesLikeDuplicatedGraph) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto r = checks::check_shared_subgraph_accumulation(seed);
        EXPECT_TRUE(r.pass) << r.detail;
    }
}

TEST(Tape, GatherRowsRoutesGradientsToGatheredRowsOnly) {
    Rng rng(13);
    DenseMatrix x = rng.gaussian_matrix(5, 3, 0.0, 1.0);
    Tape t;
    Var xv = t.input(x);
    Var g = t.gather_rows(xv, {1, 3, 1});
    Var s = t.sum_all(g);
    t.backward(s);
    const DenseMatrix& gx = t.grad(xv);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_DOUBLE_EQ(gx.at(0, j), 0.0);
        EXPECT_DOUBLE_EQ(gx.at(1, j), 2.0);  // gathered twice
        EXPECT_DOUBLE_EQ(gx.at(2, j), 0.0);
        EXPECT_DOUBLE_EQ(gx.at(3, j), 1.0);
        EXPECT_DOUBLE_EQ(gx.at(4, j), 0.0);
    }
}

TEST(Tape, FiniteOutputsOnFiniteInputs) {
    Rng rng(17);
    AttentionConfig cfg{4, 16};
    auto mha = MultiHeadAttention::init(cfg, rng);
    DenseMatrix q = rng.gaussian_matrix(6, 16, 0.0, 30.0);
    DenseMatrix kv = rng.gaussian_matrix(11, 16, 0.0, 30.0);
    Tape t;
    auto p = mha.push(t);
    Var out = multi_head_attention(t, t.input(q), t.input(kv), t.input(kv), p, cfg);
    EXPECT_TRUE(t.value(out).all_finite());
}

TEST(Determinism, SameSeedGivesBitwiseIdenticalOutputs) {
    auto make = [](std::uint64_t seed) {
        Rng rng(seed);
        AttentionConfig cfg{2, 8};
        auto mha = MultiHeadAttention::init(cfg, rng);
        DenseMatrix q = rng.gaussian_matrix(4, 8, 0.0, 1.0);
        DenseMatrix kv = rng.gaussian_matrix(5, 8, 0.0, 1.0);
        Tape t;
        auto p = mha.push(t);
        Var out = multi_head_attention(t, t.input(q), t.input(kv), t.input(kv), p, cfg);
        return t.value(out);
    };
    DenseMatrix a = make(99);
    DenseMatrix b = make(99);
    ASSERT_EQ(a.data.size(), b.data.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.data[i], b.data[i]);
}

TEST(SeedSplitting, StreamsDiffer) {
    EXPECT_NE(split_seed(1, 0), split_seed(1, 1));
    EXPECT_NE(split_seed(1, 0), split_seed(2, 0));
    EXPECT_EQ(split_seed(5, 3), split_seed(5, 3));
}
