#include "gbda/model_registry.hpp"
#include "gbda/reference_models.hpp"
#include "gbda/synthetic_task.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>

using namespace gbda;
using gbda::testing::random_matrix;
using gbda::testing::random_stochastic;
using gbda::testing::random_tokens;

namespace {

// One-coordinate finite-difference smoke test of d f / d inputs.
void expect_input_gradient(const std::function<ad::Var(const ad::Var&)>& f, const Matrix& at)
{
    auto x = ad::leaf(at, true);
    ad::backward(f(x));
    ASSERT_EQ(x.grad().rows(), at.rows());
    const double h = 1e-5;
    Matrix plus = at;
    Matrix minus = at;
    plus(0, 0) += h;
    minus(0, 0) -= h;
    double numeric = (f(ad::constant(plus)).scalar() - f(ad::constant(minus)).scalar()) / (2 * h);
    double analytic = x.grad()(0, 0);
    EXPECT_NEAR(analytic, numeric, 1e-6 + 1e-4 * std::abs(numeric));
}

struct ClassifierCase {
    std::string name;
    std::function<std::shared_ptr<const Classifier>()> make;
};

void PrintTo(const ClassifierCase& c, std::ostream* os) { *os << c.name; }

class ClassifierContract : public ::testing::TestWithParam<ClassifierCase> {};

struct LMCase {
    std::string name;
    std::function<std::shared_ptr<const CausalLM>()> make;
};

void PrintTo(const LMCase& c, std::ostream* os) { *os << c.name; }

class LMContract : public ::testing::TestWithParam<LMCase> {};

struct EmbedderCase {
    std::string name;
    std::function<std::shared_ptr<const ContextualEmbedder>()> make;
};

void PrintTo(const EmbedderCase& c, std::ostream* os) { *os << c.name; }

class EmbedderContract : public ::testing::TestWithParam<EmbedderCase> {};

} // namespace

TEST_P(ClassifierContract, ShapeEquivalenceAndGradient)
{
    auto model = GetParam().make();
    Rng rng(1);
    auto x = random_tokens(rng, 6, model->vocab_size());
    auto logits = model->forward_tokens(x);
    EXPECT_EQ(logits.num_classes(), model->num_classes());

    auto via_embeddings = model->forward_embeddings(ad::constant(model->embedding_table().lookup(x)));
    EXPECT_LT((via_embeddings.value().row(0).transpose() - logits.values()).cwiseAbs().maxCoeff(), 1e-5);
    auto via_soft = model->forward_soft(SoftTokenSequence::from_tokens(x));
    EXPECT_LT((via_soft.values() - logits.values()).cwiseAbs().maxCoeff(), 1e-5);

    Matrix w = random_matrix(rng, 1, static_cast<Eigen::Index>(model->num_classes()), -1, 1);
    expect_input_gradient(
        [&](const ad::Var& in) { return ad::sum(ad::mul(model->forward_embeddings(in), ad::constant(w))); },
        model->embedding_table().lookup(x));
}

TEST_P(LMContract, NormalizationEquivalenceAndGradient)
{
    auto model = GetParam().make();
    Rng rng(2);
    auto x = random_tokens(rng, 5, model->vocab_size());
    Matrix lp = model->next_token_logprobs(x);
    ASSERT_EQ(lp.rows(), 5);
    ASSERT_EQ(lp.cols(), static_cast<Eigen::Index>(model->vocab_size()));
    for (Eigen::Index i = 0; i < lp.rows(); ++i) {
        EXPECT_NEAR(std::log(lp.row(i).array().exp().sum()), 0.0, 1e-5);
    }
    // Row i never depends on tokens at or after i.
    std::vector<TokenId> changed = x.ids();
    changed[3] = static_cast<TokenId>((changed[3] + 1) % model->vocab_size());
    Matrix lp2 = model->next_token_logprobs(TokenSequence(changed, model->vocab_size()));
    EXPECT_LT((lp.topRows(4) - lp2.topRows(4)).cwiseAbs().maxCoeff(), 1e-12);

    Matrix w = random_matrix(rng, 5, static_cast<Eigen::Index>(model->vocab_size()), -1, 1);
    expect_input_gradient(
        [&](const ad::Var& in) { return ad::sum(ad::mul(model->next_token_logprobs(in), ad::constant(w))); },
        model->embedding_table().lookup(x));
}

TEST_P(EmbedderContract, UnitRowsEquivalenceAndGradient)
{
    auto model = GetParam().make();
    Rng rng(3);
    auto x = random_tokens(rng, 4, model->vocab_size());
    Matrix e = model->embed_tokens(x);
    ASSERT_EQ(e.rows(), 4);
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
        EXPECT_NEAR(e.row(i).norm(), 1.0, 1e-9);
    }
    EXPECT_LT((model->embed_soft(SoftTokenSequence::from_tokens(x)) - e).cwiseAbs().maxCoeff(), 1e-12);

    Matrix w = random_matrix(rng, 4, e.cols(), -1, 1);
    expect_input_gradient([&](const ad::Var& p) { return ad::sum(ad::mul(model->embed_soft(p), ad::constant(w))); },
                          random_stochastic(rng, 4, static_cast<Eigen::Index>(model->vocab_size())));
}

namespace {

std::shared_ptr<ReferenceLM> shared_tiny_lm()
{
    static auto lm = gbda::testing::tiny_models(14, 3, 7).lm;
    return lm;
}

} // namespace

INSTANTIATE_TEST_SUITE_P(
    Reference, ClassifierContract,
    ::testing::Values(ClassifierCase{"attention",
                                     [] {
                                         return std::shared_ptr<const Classifier>(
                                             gbda::testing::tiny_models(14, 3, 4).classifier);
                                     }},
                      ClassifierCase{"bag",
                                     [] {
                                         return std::shared_ptr<const Classifier>(
                                             gbda::testing::tiny_models(14, 4, 5, ClassifierArch::bag).classifier);
                                     }}),
    [](const auto& info) { return info.param.name; });

INSTANTIATE_TEST_SUITE_P(Reference, LMContract,
                         ::testing::Values(LMCase{"reference", [] { return std::shared_ptr<const CausalLM>(shared_tiny_lm()); }},
                                           LMCase{"bigram",
                                                  [] {
                                                      Rng rng(6);
                                                      return std::shared_ptr<const CausalLM>(
                                                          std::make_shared<gbda::testing::BigramLM>(
                                                              random_matrix(rng, 1, 5, -1, 1),
                                                              random_matrix(rng, 5, 5, -1, 1)));
                                                  }}),
                         [](const auto& info) { return info.param.name; });

INSTANTIATE_TEST_SUITE_P(
    Reference, EmbedderContract,
    ::testing::Values(EmbedderCase{"lm_hidden",
                                   [] {
                                       return std::shared_ptr<const ContextualEmbedder>(
                                           std::make_shared<LMEmbedder>(shared_tiny_lm()));
                                   }},
                      EmbedderCase{"bag",
                                   [] {
                                       return std::shared_ptr<const ContextualEmbedder>(
                                           std::make_shared<BagEmbedder>(shared_tiny_lm()->embedding_table()));
                                   }}),
    [](const auto& info) { return info.param.name; });

TEST(ReferenceClassifier, UntrainedModelEmitsKLogits)
{
    for (std::size_t k : {2u, 3u, 5u}) {
        auto m = gbda::testing::tiny_models(9, k, 10 + k);
        EXPECT_EQ(m.classifier->forward_tokens(TokenSequence({1, 2, 3}, 9)).num_classes(), k);
    }
}

TEST(ReferenceClassifier, TooLongInputIsRejected)
{
    auto m = gbda::testing::tiny_models(9, 2, 20);
    std::vector<TokenId> ids(m.classifier->shape().max_len + 1, 1);
    EXPECT_THROW(m.classifier->forward_tokens(TokenSequence(ids, 9)), InvalidInput);
}

TEST(SyntheticTask, LabelsAreBalanced)
{
    Rng rng(21);
    auto task = generate_synthetic_task(SyntheticTaskOptions{}, rng);
    std::vector<std::size_t> counts(4, 0);
    for (const auto& ex : task.train) {
        ++counts[ex.label];
    }
    for (auto c : counts) {
        double share = static_cast<double>(c) / static_cast<double>(task.train.size());
        EXPECT_NEAR(share, 0.25, 0.05);
    }
    for (const auto& ex : task.test) {
        EXPECT_EQ(ex.tokens[0], task.vocab.id("[CLS]"));
    }
}

TEST(SyntheticTask, TrainedClassifierReachesHighHeldOutAccuracy)
{
    const auto& ref = gbda::testing::trained_task();
    EXPECT_GE(accuracy(*ref.classifier, ref.task.test), 0.95);
}

TEST(SyntheticTask, TrainedLMPrefersInDistributionText)
{
    const auto& ref = gbda::testing::trained_task();
    Rng rng(22);
    double in_distribution = 0.0;
    double shuffled = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
        const auto& x = ref.task.test[i].tokens;
        in_distribution += ref.lm->sequence_nll(x);
        std::vector<TokenId> ids = x.ids();
        std::shuffle(ids.begin() + 1, ids.end(), rng);
        shuffled += ref.lm->sequence_nll(TokenSequence(ids, x.vocab_size()));
    }
    EXPECT_LT(in_distribution, shuffled);
}

TEST(SyntheticTask, EmbedderSelfSimilarityIsZero)
{
    const auto& ref = gbda::testing::trained_task();
    for (std::size_t i = 0; i < 10; ++i) {
        const auto& x = ref.task.test[i].tokens;
        EXPECT_NEAR(
            bertscore_dissimilarity(x, SoftTokenSequence::from_tokens(x), *ref.embedder, IdfWeights::uniform(x.size())),
            0.0, 1e-6);
    }
}

TEST(SyntheticTask, EmbedderReadsTheLanguageModelWeights)
{
    // Perturbing the LM's embedding table must change the embedder's output.
    auto m = gbda::testing::tiny_models(10, 2, 23);
    TokenSequence x({1, 2, 3}, 10);
    Matrix before = m.embedder->embed_tokens(x);
    Matrix table = m.lm->embedding_table().vectors();
    table.row(2).array() += 0.5;
    m.lm->assign_parameter("embedding", table);
    EXPECT_GT((m.embedder->embed_tokens(x) - before).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ModelBundle, RoundTripsParametersAndPredictions)
{
    auto m = gbda::testing::tiny_models(11, 3, 24);
    ModelBundle bundle;
    bundle.vocab = m.vocab;
    bundle.label_names = {"a", "b", "c"};
    bundle.classifiers["target"] = m.classifier;
    bundle.lms["lm"] = m.lm;
    auto path = (std::filesystem::temp_directory_path() / "gbda_bundle_roundtrip.json").string();
    bundle.save(path);
    auto loaded = ModelBundle::load(path);
    EXPECT_EQ(loaded.vocab.tokens(), m.vocab.tokens());
    EXPECT_EQ(loaded.vocab.special_ids(), m.vocab.special_ids());
    EXPECT_EQ(loaded.label_names, bundle.label_names);
    TokenSequence x({0, 3, 5, 9}, 11);
    EXPECT_EQ(loaded.classifiers.at("target")->forward_tokens(x).values(), m.classifier->forward_tokens(x).values());
    EXPECT_EQ(loaded.lms.at("lm")->next_token_logprobs(x), m.lm->next_token_logprobs(x));

    auto registry = ModelRegistry::with_builtins();
    EXPECT_NO_THROW(registry.classifier("reference:target", loaded));
    EXPECT_NO_THROW(registry.embedder("bag:lm", loaded));
    EXPECT_THROW(registry.classifier("reference:missing", loaded), ConfigError);
    EXPECT_THROW(registry.classifier("nosuchplugin:target", loaded), ConfigError);
    EXPECT_THROW(registry.lm("malformed", loaded), ConfigError);
    std::filesystem::remove(path);
}

TEST(ModelBundle, UnsupportedFilesAreConfigErrors)
{
    auto dir = std::filesystem::temp_directory_path();
    EXPECT_THROW(ModelBundle::load((dir / "gbda_no_such_bundle.json").string()), ConfigError);
    auto path = (dir / "gbda_bad_bundle.json").string();
    {
        std::ofstream out(path);
        out << R"({"format": "gbda-model-bundle", "version": 99})";
    }
    EXPECT_THROW(ModelBundle::load(path), ConfigError);
    std::filesystem::remove(path);
}
