#pragma once

#include "gbda/autodiff.hpp"
#include "gbda/core.hpp"
#include "gbda/relaxation.hpp"

#include <concepts>
#include <memory>

namespace gbda {

/// Target classifier h. Consumes a sequence of input vectors so that it can be
/// fed probability-vector embeddings as well as token lookups.
class Classifier {
public:
    virtual ~Classifier() = default;

    /// n x d inputs to 1 x K logits, differentiable w.r.t. the inputs.
    virtual ad::Var forward_embeddings(const ad::Var& inputs) const = 0;
    virtual const EmbeddingTable& embedding_table() const = 0;
    virtual std::size_t num_classes() const = 0;

    LogitVector forward_tokens(const TokenSequence& tokens) const;
    LogitVector forward_soft(const SoftTokenSequence& probs) const;
    std::size_t vocab_size() const { return embedding_table().vocab_size(); }
};

/// Causal language model g with log-probability outputs.
class CausalLM {
public:
    virtual ~CausalLM() = default;

    /// n x d inputs to n x V log-probabilities. Row i predicts token i from a
    /// begin-of-sequence context followed by inputs 0..i-1.
    virtual ad::Var next_token_logprobs(const ad::Var& inputs) const = 0;
    virtual const EmbeddingTable& embedding_table() const = 0;

    Matrix next_token_logprobs(const TokenSequence& tokens) const;
    /// -sum_i log p(x_i | x_<i).
    double sequence_nll(const TokenSequence& tokens) const;
    std::size_t vocab_size() const { return embedding_table().vocab_size(); }
};

/// Contextual token embeddings used for the BERTScore similarity term.
class ContextualEmbedder {
public:
    virtual ~ContextualEmbedder() = default;

    /// n x V probability rows to n x d' unit-norm rows.
    virtual ad::Var embed_soft(const ad::Var& probs) const = 0;
    virtual std::size_t vocab_size() const = 0;

    Matrix embed_tokens(const TokenSequence& tokens) const;
    Matrix embed_soft(const SoftTokenSequence& probs) const;
};

/// Target that reveals only its predicted class.
class HardLabelTarget {
public:
    virtual ~HardLabelTarget() = default;
    virtual ClassId predict(const TokenSequence& tokens) const = 0;
    virtual std::size_t vocab_size() const = 0;
};

/// Anything offering a way to read continuous scores for a sequence.
template <class T>
concept ExposesScores = requires(const T& t, const TokenSequence& z) { t.forward_tokens(z); }
                        || requires(const T& t, const TokenSequence& z) { t.logits(z); }
                        || requires(const T& t, const TokenSequence& z) { t.scores(z); }
                        || requires(const T& t, const TokenSequence& z) { t.probabilities(z); };

template <class T>
concept HardLabelOnly = std::derived_from<T, HardLabelTarget> && !ExposesScores<T>;

/// Hard-label view of a classifier; the wrapped model stays private.
class ClassifierLabeler final : public HardLabelTarget {
public:
    explicit ClassifierLabeler(std::shared_ptr<const Classifier> model) : model_(std::move(model)) {}

    ClassId predict(const TokenSequence& tokens) const override { return model_->forward_tokens(tokens).argmax(); }
    std::size_t vocab_size() const override { return model_->vocab_size(); }

private:
    std::shared_ptr<const Classifier> model_;
};

/// The only way transfer targets enter the harness.
template <HardLabelOnly T>
std::shared_ptr<const HardLabelTarget> as_transfer_target(std::shared_ptr<const T> target)
{
    return target;
}

} // namespace gbda
