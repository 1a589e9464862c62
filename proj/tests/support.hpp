#pragma once

#include "gbda/attack.hpp"
#include "gbda/reference_models.hpp"
#include "gbda/runner.hpp"
#include "gbda/synthetic_task.hpp"

#include <memory>
#include <random>

namespace gbda::testing {

/// Hand-rolled generators for property tests.
inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = u(rng);
        }
    }
    return m;
}

inline Matrix random_stochastic(Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
    Matrix m = random_matrix(rng, rows, cols, 0.01, 1.0);
    for (Eigen::Index i = 0; i < rows; ++i) {
        m.row(i) /= m.row(i).sum();
    }
    return m;
}

inline TokenSequence random_tokens(Rng& rng, std::size_t length, std::size_t vocab_size, TokenId lowest = 0)
{
    std::uniform_int_distribution<TokenId> pick(lowest, static_cast<TokenId>(vocab_size - 1));
    std::vector<TokenId> ids(length);
    for (auto& id : ids) {
        id = pick(rng);
    }
    return TokenSequence(std::move(ids), vocab_size);
}

/// Log-probabilities given by a fixed bigram table over identity embeddings:
/// row 0 is log p(. | BOS) and row i is log_softmax(inputs[i-1] * table).
class BigramLM final : public CausalLM {
public:
    BigramLM(RowVector bos, Matrix table)
        : bos_(std::move(bos)), table_(std::move(table)),
          identity_(Matrix::Identity(table_.rows(), table_.rows()))
    {
    }

    using CausalLM::next_token_logprobs;
    ad::Var next_token_logprobs(const ad::Var& inputs) const override
    {
        std::vector<ad::Var> rows{ad::constant(bos_)};
        if (inputs.rows() > 1) {
            rows.push_back(ad::matmul(ad::slice_rows(inputs, 0, inputs.rows() - 1), ad::constant(table_)));
        }
        return ad::log_softmax_rows(ad::vstack(rows));
    }
    const EmbeddingTable& embedding_table() const override { return identity_; }

private:
    RowVector bos_;
    Matrix table_;
    EmbeddingTable identity_;
};

/// Tiny vocabulary with [CLS] as the only special token, for gradient checks.
inline Vocabulary tiny_vocabulary(std::size_t size)
{
    std::vector<std::string> tokens{"[CLS]"};
    for (std::size_t i = 1; i < size; ++i) {
        tokens.push_back("w" + std::to_string(i));
    }
    return Vocabulary(tokens, {0});
}

struct TinyModels {
    Vocabulary vocab;
    std::shared_ptr<ReferenceClassifier> classifier;
    std::shared_ptr<ReferenceLM> lm;
    std::shared_ptr<LMEmbedder> embedder;

    ObjectiveModels objective() const { return {*classifier, *lm, *embedder}; }
};

/// Untrained desk-scale models over a small vocabulary.
inline TinyModels tiny_models(std::size_t vocab_size, std::size_t num_classes, std::uint64_t seed,
                              ClassifierArch arch = ClassifierArch::attention)
{
    Rng rng(seed);
    TinyModels m;
    m.vocab = tiny_vocabulary(vocab_size);
    m.classifier = build_reference_classifier(m.vocab, num_classes, 8, rng, arch);
    m.lm = build_reference_lm(m.vocab, 8, rng);
    m.embedder = std::make_shared<LMEmbedder>(m.lm);
    return m;
}

/// The synthetic task trained once per test binary (seed 1).
inline const ReferenceModels& trained_task()
{
    static const ReferenceModels models = [] {
        Rng rng(1);
        return train_synthetic_task(SyntheticTaskOptions{}, rng);
    }();
    return models;
}

inline LoadedModels loaded_from(const ReferenceModels& ref)
{
    LoadedModels m;
    m.vocab = ref.task.vocab;
    m.labels = ref.task.label_names;
    m.tokenizer = std::make_shared<WordTokenizer>(ref.task.vocab);
    m.target = ref.classifier;
    m.lm = ref.lm;
    m.embedder = ref.embedder;
    m.idf = IdfTable(ref.task.corpus, ref.task.vocab.size());
    return m;
}

inline std::vector<AttackInput> inputs_from(const std::vector<LabeledExample>& data, std::size_t count)
{
    std::vector<AttackInput> out;
    for (std::size_t i = 0; i < std::min(count, data.size()); ++i) {
        out.push_back({"ex" + std::to_string(i), data[i].tokens, data[i].label, {}});
    }
    return out;
}

} // namespace gbda::testing
