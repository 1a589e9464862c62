#include "gbda/relaxation.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace gbda;
using gbda::testing::random_matrix;

namespace {

double argmax_tv_distance(const ThetaMatrix& theta, double temperature, int draws, std::uint64_t seed)
{
    Rng rng(seed);
    Vector counts = Vector::Zero(theta.values.cols());
    for (int d = 0; d < draws; ++d) {
        Eigen::Index best = 0;
        sample_gumbel_softmax(theta, temperature, rng).soft.probs().row(0).maxCoeff(&best);
        counts(best) += 1.0;
    }
    Vector expected = softmax_rows(theta.values).row(0).transpose();
    return 0.5 * (counts / draws - expected).cwiseAbs().sum();
}

} // namespace

TEST(GumbelSoftmax, RowsSumToOne)
{
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        ThetaMatrix theta{random_matrix(rng, 4, 9, -5, 5), {}};
        auto s = sample_gumbel_softmax(theta, 1.0, rng);
        for (Eigen::Index i = 0; i < 4; ++i) {
            EXPECT_NEAR(s.soft.probs().row(i).sum(), 1.0, 1e-6);
        }
        EXPECT_TRUE(s.soft.is_relaxed());
    }
}

TEST(GumbelSoftmax, LowTemperatureIsNearlyOneHot)
{
    Rng rng(2);
    ThetaMatrix theta{Matrix{{10, 0}}, {}};
    for (int d = 0; d < 1000; ++d) {
        EXPECT_GT(sample_gumbel_softmax(theta, 0.01, rng).soft.probs().maxCoeff(), 0.999);
    }
}

TEST(GumbelSoftmax, ArgmaxMarginalMatchesCategoricalAtSeveralTemperatures)
{
    ThetaMatrix theta{Matrix{{1.0, -0.5, 0.3, 2.0, 0.0}}, {}};
    for (double t : {0.1, 0.5, 1.0, 3.0}) {
        EXPECT_LT(argmax_tv_distance(theta, t, 20000, 3), 0.02) << "T = " << t;
    }
}

TEST(GumbelSoftmax, ExpectedMaxEntryGrowsAsTemperatureFalls)
{
    ThetaMatrix theta{Matrix{{0.5, 0.0, -0.3, 0.2}}, {}};
    double previous = 0.0;
    for (double t : {1.0, 0.1, 0.01}) {
        Rng rng(4);
        double total = 0.0;
        for (int d = 0; d < 5000; ++d) {
            total += sample_gumbel_softmax(theta, t, rng).soft.probs().maxCoeff();
        }
        double mean = total / 5000;
        EXPECT_GE(mean, previous) << "T = " << t;
        previous = mean;
    }
}

TEST(GumbelSoftmax, NonPositiveTemperatureIsAConfigError)
{
    Rng rng(5);
    ThetaMatrix theta{Matrix::Zero(1, 3), {}};
    EXPECT_THROW(sample_gumbel_softmax(theta, 0.0, rng), ConfigError);
    EXPECT_THROW(sample_gumbel_softmax(theta, -1.0, rng), ConfigError);
}

TEST(GumbelSoftmax, StoredNoiseRebuildsTheDraw)
{
    Rng rng(6);
    ThetaMatrix theta{random_matrix(rng, 3, 5, -2, 2), {{1, 4}}};
    auto s = sample_gumbel_softmax(theta, 0.7, rng);
    EXPECT_EQ(gumbel_noise(3, 5, s.noise_seed), s.noise);
    auto rebuilt = relaxed_probs(ad::constant(theta.values), theta.frozen, s.noise, 0.7);
    EXPECT_LT((rebuilt.value() - s.soft.probs()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(s.soft.probs()(1, 4), 1.0);
}

TEST(GumbelSoftmaxProperty, JacobianMatchesFiniteDifferences)
{
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix theta = random_matrix(rng, 3, 4, -2, 2);
        Matrix noise = gumbel_noise(3, 4, 100 + trial);
        std::map<std::size_t, TokenId> frozen{{2, 1}};
        Matrix weights = random_matrix(rng, 3, 4, -1, 1);
        auto objective = [&](const ad::Var& t) {
            return ad::sum(ad::mul(relaxed_probs(t, frozen, noise, 0.8), ad::constant(weights)));
        };
        auto leaf = ad::leaf(theta, true);
        ad::backward(objective(leaf));
        const double h = 1e-4;
        for (Eigen::Index i = 0; i < 3; ++i) {
            for (Eigen::Index j = 0; j < 4; ++j) {
                Matrix plus = theta;
                Matrix minus = theta;
                plus(i, j) += h;
                minus(i, j) -= h;
                double numeric =
                    (objective(ad::constant(plus)).scalar() - objective(ad::constant(minus)).scalar()) / (2 * h);
                double analytic = leaf.grad()(i, j);
                double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
                EXPECT_LT(std::abs(analytic - numeric) / denom, 1e-4);
                if (i == 2) {
                    EXPECT_EQ(analytic, 0.0);
                }
            }
        }
    }
}

TEST(SampleCategorical, ConcentratedRowsReturnTheirArgmax)
{
    Rng rng(8);
    ThetaMatrix theta{Matrix::Zero(2, 5), {}};
    theta.values(0, 3) = 15;
    theta.values(1, 1) = 15;
    int hits = 0;
    for (int d = 0; d < 10000; ++d) {
        auto z = sample_categorical(theta, rng);
        hits += (z[0] == 3 && z[1] == 1);
    }
    EXPECT_GT(hits / 10000.0, 0.999);
}

TEST(SampleCategorical, UniformRowFrequencies)
{
    Rng rng(9);
    ThetaMatrix theta{Matrix::Zero(1, 4), {}};
    std::vector<int> counts(4, 0);
    for (int d = 0; d < 20000; ++d) {
        ++counts[sample_categorical(theta, rng)[0]];
    }
    for (int c : counts) {
        EXPECT_GE(c / 20000.0, 0.23);
        EXPECT_LE(c / 20000.0, 0.27);
    }
}

TEST(SampleCategorical, FrozenRowsEmitTheirToken)
{
    Rng rng(10);
    ThetaMatrix theta{Matrix::Zero(2, 4), {{1, 3}}};
    theta.values(1, 0) = 50;
    for (int d = 0; d < 500; ++d) {
        EXPECT_EQ(sample_categorical(theta, rng)[1], 3u);
    }
}

TEST(MixEmbeddings, OneHotIsExactLookup)
{
    Rng rng(11);
    EmbeddingTable table(random_matrix(rng, 7, 3, -1, 1));
    TokenSequence z({4, 0, 6, 6}, 7);
    Matrix mixed = mix_embeddings(SoftTokenSequence::from_tokens(z), table);
    EXPECT_EQ(mixed, table.lookup(z));
}

TEST(MixEmbeddings, UniformGivesColumnMean)
{
    Rng rng(12);
    Matrix e = random_matrix(rng, 5, 3, -1, 1);
    EmbeddingTable table(e);
    Matrix mixed = mix_embeddings(SoftTokenSequence(Matrix::Constant(1, 5, 0.2), false), table);
    EXPECT_LT((mixed.row(0) - e.colwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MixEmbeddings, HalfHalfCombination)
{
    Matrix e{{1, 0}, {0, 1}, {5, 5}};
    Matrix mixed = mix_embeddings(SoftTokenSequence(Matrix{{0.5, 0.5, 0.0}}, false), EmbeddingTable(e));
    EXPECT_DOUBLE_EQ(mixed(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(mixed(0, 1), 0.5);
}

TEST(MixEmbeddings, VocabularyMismatchIsRejected)
{
    EmbeddingTable table(Matrix::Zero(4, 2));
    EXPECT_THROW(mix_embeddings(SoftTokenSequence(Matrix::Constant(1, 3, 1.0 / 3), false), table), InvalidInput);
}

TEST(MixEmbeddingsProperty, StaysInsideTheConvexHullOfUsedRows)
{
    // In one dimension the hull of the used rows is [min, max] of their values,
    // so every coordinate must lie within the per-coordinate bounds.
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix e = random_matrix(rng, 6, 4, -3, 3);
        Matrix p = gbda::testing::random_stochastic(rng, 1, 6);
        std::uniform_int_distribution<int> drop(0, 5);
        int zeroed = drop(rng);
        p(0, zeroed) = 0.0;
        p /= p.sum();
        Matrix mixed = mix_embeddings(SoftTokenSequence(p, false), EmbeddingTable(e));
        for (Eigen::Index c = 0; c < 4; ++c) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (Eigen::Index r = 0; r < 6; ++r) {
                if (p(0, r) > 0) {
                    lo = std::min(lo, e(r, c));
                    hi = std::max(hi, e(r, c));
                }
            }
            EXPECT_GE(mixed(0, c), lo - 1e-12);
            EXPECT_LE(mixed(0, c), hi + 1e-12);
        }
        Vector weights = p.row(0).transpose();
        EXPECT_LT((mixed.row(0).transpose() - e.transpose() * weights).cwiseAbs().maxCoeff(), 1e-12);
    }
}
