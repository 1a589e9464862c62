#include "gbda/autodiff.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <functional>

using namespace gbda;
using gbda::testing::random_matrix;

namespace {

using ScalarFn = std::function<ad::Var(const ad::Var&)>;

// Central differences on every coordinate, compared against the tape.
double max_relative_error(const ScalarFn& f, const Matrix& at, double step = 1e-6)
{
    auto x = ad::leaf(at, true);
    ad::backward(f(x));
    Matrix analytic = x.grad();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < at.rows(); ++i) {
        for (Eigen::Index j = 0; j < at.cols(); ++j) {
            Matrix plus = at;
            Matrix minus = at;
            plus(i, j) += step;
            minus(i, j) -= step;
            double numeric = (f(ad::constant(plus)).scalar() - f(ad::constant(minus)).scalar()) / (2 * step);
            double a = analytic(i, j);
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-7});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

// Contracts a matrix-valued op to a scalar with fixed random weights so every
// output entry contributes a distinct gradient.
ScalarFn weighted(std::function<ad::Var(const ad::Var&)> op, Eigen::Index rows, Eigen::Index cols,
                  std::uint64_t seed)
{
    Rng rng(seed);
    auto w = ad::constant(random_matrix(rng, rows, cols, -1, 1));
    return [op, w](const ad::Var& x) { return ad::sum(ad::mul(op(x), w)); };
}

} // namespace

TEST(Autodiff, ElementwiseAndLinearOps)
{
    Rng rng(1);
    Matrix x = random_matrix(rng, 3, 4, -1, 1);
    auto b = ad::constant(random_matrix(rng, 4, 5, -1, 1));
    auto c = ad::constant(random_matrix(rng, 6, 4, -1, 1));
    auto r = ad::constant(random_matrix(rng, 1, 4, -1, 1));
    EXPECT_LT(max_relative_error(weighted([&](const ad::Var& v) { return ad::matmul(v, b); }, 3, 5, 2), x), 1e-6);
    EXPECT_LT(max_relative_error(weighted([&](const ad::Var& v) { return ad::matmul_transposed(v, c); }, 3, 6, 3), x),
              1e-6);
    EXPECT_LT(max_relative_error(weighted([&](const ad::Var& v) { return ad::tanh(v); }, 3, 4, 4), x), 1e-6);
    EXPECT_LT(max_relative_error(weighted([&](const ad::Var& v) { return ad::mul(v, v); }, 3, 4, 5), x), 1e-6);
    EXPECT_LT(max_relative_error(weighted([&](const ad::Var& v) { return ad::add_row(v, r) * 2.0; }, 3, 4, 6), x),
              1e-6);
    EXPECT_LT(max_relative_error(weighted([&](const ad::Var& v) { return ad::sub(ad::add_scalar(v, 3.0), v); }, 3, 4,
                                          7),
                                 x + Matrix::Constant(3, 4, 0.1)),
              1e-5);
    EXPECT_LT(max_relative_error(weighted([&](const ad::Var& v) { return ad::transpose(v); }, 4, 3, 8), x), 1e-6);
}

TEST(Autodiff, SoftmaxFamily)
{
    Rng rng(2);
    Matrix x = random_matrix(rng, 3, 5, -2, 2);
    EXPECT_LT(max_relative_error(weighted([](const ad::Var& v) { return ad::softmax_rows(v); }, 3, 5, 9), x), 1e-6);
    EXPECT_LT(max_relative_error(weighted([](const ad::Var& v) { return ad::log_softmax_rows(v); }, 3, 5, 10), x),
              1e-6);
    EXPECT_LT(max_relative_error(weighted([](const ad::Var& v) { return ad::normalize_rows(v); }, 3, 5, 11), x), 1e-6);
}

TEST(Autodiff, ReductionsAndSelections)
{
    Rng rng(3);
    Matrix x = random_matrix(rng, 4, 3, -1, 1);
    EXPECT_LT(max_relative_error([](const ad::Var& v) { return ad::mean(ad::mul(v, v)); }, x), 1e-6);
    EXPECT_LT(max_relative_error(weighted([](const ad::Var& v) { return ad::mean_rows(v); }, 1, 3, 12), x), 1e-6);
    EXPECT_LT(max_relative_error(weighted([](const ad::Var& v) { return ad::row_max(v); }, 4, 1, 13), x), 1e-6);
    EXPECT_LT(max_relative_error(weighted([](const ad::Var& v) { return ad::slice_rows(v, 1, 2); }, 2, 3, 14), x),
              1e-6);
    EXPECT_LT(max_relative_error([](const ad::Var& v) { return ad::pick(ad::tanh(v), 2, 1); }, x), 1e-6);
    EXPECT_LT(max_relative_error([](const ad::Var& v) { return ad::hinge(ad::pick(v, 0, 0)); },
                                 Matrix::Constant(1, 1, 0.4)),
              1e-6);
    std::vector<TokenId> ids{2, 0, 2, 3};
    EXPECT_LT(max_relative_error(weighted([&](const ad::Var& v) { return ad::gather_rows(v, ids); }, 4, 3, 15), x),
              1e-6);
    EXPECT_LT(max_relative_error(weighted(
                                     [](const ad::Var& v) {
                                         std::vector<ad::Var> parts{v, ad::tanh(v)};
                                         return ad::vstack(parts);
                                     },
                                     8, 3, 16),
                                 x),
              1e-6);
}

TEST(Autodiff, HingeIsZeroBelowTheKink)
{
    auto x = ad::leaf(Matrix::Constant(1, 1, -0.3), true);
    auto y = ad::hinge(x);
    EXPECT_EQ(y.scalar(), 0.0);
    ad::backward(y);
    EXPECT_EQ(x.grad()(0, 0), 0.0);
}

TEST(Autodiff, SharedSubexpressionsAccumulate)
{
    auto x = ad::leaf(Matrix::Constant(1, 1, 3.0), true);
    auto y = ad::mul(x, x);
    auto z = ad::add(y, y);
    ad::backward(ad::sum(z));
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 12.0);
}

TEST(Autodiff, ConstantsCollectNoGradient)
{
    auto c = ad::constant(Matrix::Constant(2, 2, 1.0));
    auto x = ad::leaf(Matrix::Constant(2, 2, 2.0), true);
    ad::backward(ad::sum(ad::mul(c, x)));
    EXPECT_EQ(c.grad().size(), 0);
    EXPECT_EQ(x.grad(), Matrix::Constant(2, 2, 1.0));
}

TEST(Autodiff, BackwardRequiresScalarRoot)
{
    auto x = ad::leaf(Matrix::Zero(2, 2), true);
    EXPECT_THROW(ad::backward(x), InvalidInput);
}

TEST(Autodiff, ShapeMismatchesAreRejected)
{
    auto a = ad::constant(Matrix::Zero(2, 3));
    auto b = ad::constant(Matrix::Zero(2, 2));
    EXPECT_THROW(ad::matmul(a, b), InvalidInput);
    EXPECT_THROW(ad::add(a, b), InvalidInput);
}
