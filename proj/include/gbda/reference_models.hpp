#pragma once

// Desk-scale stand-ins for the transformer target, the causal LM and the
// BERTScore embedder. Small enough (d <= 32, one attention layer) for
// finite-difference gradient checks.

#include "gbda/models.hpp"

#include <string>
#include <utility>
#include <vector>

namespace gbda {

enum class ClassifierArch { attention, bag };

std::string to_string(ClassifierArch arch);
ClassifierArch classifier_arch_from_string(std::string_view name);

struct ClassifierShape {
    ClassifierArch arch = ClassifierArch::attention;
    std::size_t num_classes = 2;
    std::size_t dim = 16;
    std::size_t hidden = 32;
    std::size_t max_len = 48;
};

struct LMShape {
    std::size_t dim = 16;
    std::size_t hidden = 32;
    std::size_t max_len = 48;
};

using NamedParameters = std::vector<std::pair<std::string, ad::Var>>;

/// Single-head self-attention (or bag-of-embeddings) encoder, mean pooling,
/// tanh feature layer and a linear head.
class ReferenceClassifier final : public Classifier {
public:
    ReferenceClassifier(std::size_t vocab_size, ClassifierShape shape, Rng& rng);

    ad::Var forward_embeddings(const ad::Var& inputs) const override;
    const EmbeddingTable& embedding_table() const override { return table_; }
    std::size_t num_classes() const override { return shape_.num_classes; }

    const ClassifierShape& shape() const { return shape_; }
    const NamedParameters& parameters() const { return params_; }
    /// Overwrites one parameter; the shape must match.
    void assign_parameter(std::string_view name, const Matrix& value);
    void set_trainable(bool flag);

private:
    const ad::Var& param(std::string_view name) const;

    ClassifierShape shape_;
    NamedParameters params_;
    EmbeddingTable table_;
};

/// One causal self-attention block with a residual tanh feed-forward layer.
/// A learned begin-of-sequence vector is prepended to every input.
class ReferenceLM final : public CausalLM {
public:
    ReferenceLM(std::size_t vocab_size, LMShape shape, Rng& rng);

    using CausalLM::next_token_logprobs;
    ad::Var next_token_logprobs(const ad::Var& inputs) const override;
    const EmbeddingTable& embedding_table() const override { return table_; }

    /// (n + 1) x d hidden states; row 0 is the begin-of-sequence position.
    ad::Var hidden_states(const ad::Var& inputs) const;

    const LMShape& shape() const { return shape_; }
    const NamedParameters& parameters() const { return params_; }
    /// Overwrites one parameter; the shape must match.
    void assign_parameter(std::string_view name, const Matrix& value);
    void set_trainable(bool flag);

private:
    const ad::Var& param(std::string_view name) const;

    LMShape shape_;
    NamedParameters params_;
    EmbeddingTable table_;
};

/// Contextual embeddings taken from the hidden states of a reference LM.
class LMEmbedder final : public ContextualEmbedder {
public:
    explicit LMEmbedder(std::shared_ptr<const ReferenceLM> lm) : lm_(std::move(lm)) {}

    using ContextualEmbedder::embed_soft;
    ad::Var embed_soft(const ad::Var& probs) const override;
    std::size_t vocab_size() const override { return lm_->vocab_size(); }

private:
    std::shared_ptr<const ReferenceLM> lm_;
};

/// Position-independent embedder: normalized mixture of table rows.
class BagEmbedder final : public ContextualEmbedder {
public:
    explicit BagEmbedder(EmbeddingTable table) : table_(std::move(table)) {}

    using ContextualEmbedder::embed_soft;
    ad::Var embed_soft(const ad::Var& probs) const override;
    std::size_t vocab_size() const override { return table_.vocab_size(); }

private:
    EmbeddingTable table_;
};

std::shared_ptr<ReferenceClassifier> build_reference_classifier(const Vocabulary& vocab, std::size_t num_classes,
                                                                std::size_t dim, Rng& rng,
                                                                ClassifierArch arch = ClassifierArch::attention);
std::shared_ptr<ReferenceLM> build_reference_lm(const Vocabulary& vocab, std::size_t dim, Rng& rng);

struct LabeledExample {
    TokenSequence tokens;
    ClassId label = 0;
};

struct TrainOptions {
    std::size_t epochs = 6;
    std::size_t batch_size = 16;
    double learning_rate = 0.01;
};

/// Cross-entropy training with Adam; returns final-epoch mean loss.
double train_classifier(ReferenceClassifier& model, const std::vector<LabeledExample>& data,
                        const TrainOptions& options, Rng& rng);
/// Next-token NLL training with Adam; returns final-epoch mean per-token loss.
double train_lm(ReferenceLM& model, const std::vector<TokenSequence>& corpus, const TrainOptions& options, Rng& rng);

double accuracy(const Classifier& model, const std::vector<LabeledExample>& data);

} // namespace gbda
