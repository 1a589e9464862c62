#pragma once

#include "gbda/models.hpp"
#include "gbda/relaxation.hpp"

#include <span>
#include <vector>

namespace gbda {

/// Normalized idf weights over the positions of a reference sequence.
struct IdfWeights {
    Vector weights;

    static IdfWeights uniform(std::size_t length);
    std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
};

/// Smoothed document-frequency statistics over a tokenized corpus:
/// idf(t) = ln((N + 1) / (df(t) + 1)) + 1.
class IdfTable {
public:
    IdfTable() = default;
    IdfTable(std::span<const TokenSequence> corpus, std::size_t vocab_size);
    IdfTable(std::vector<double> idf, std::size_t num_documents)
        : idf_(std::move(idf)), num_documents_(num_documents) {}

    double idf(TokenId token) const { return idf_.at(token); }
    const std::vector<double>& values() const { return idf_; }
    std::size_t num_documents() const { return num_documents_; }
    bool empty() const { return num_documents_ == 0; }

    /// Uniform weights when the table was built from an empty corpus.
    IdfWeights weights_for(const TokenSequence& reference) const;

private:
    std::vector<double> idf_;
    std::size_t num_documents_ = 0;
};

IdfWeights compute_idf(std::span<const TokenSequence> corpus, const TokenSequence& reference);

/// max(logit_y - max_{k != y} logit_k + kappa, 0). Throws InvalidInput for K < 2.
double margin_loss(const LogitVector& logits, ClassId label, double kappa);
ad::Var margin_loss(const ad::Var& logits, ClassId label, double kappa);

/// Cross-entropy of each probability row against the LM's prediction from the
/// mixed embeddings of the preceding rows, summed over positions (or averaged
/// with per_token_mean).
double soft_nll(const SoftTokenSequence& probs, const CausalLM& lm, bool per_token_mean = false);
ad::Var soft_nll(const ad::Var& probs, const CausalLM& lm, bool per_token_mean = false);

/// 1 - sum_i w_i max_j v_i . v'_j over unit contextual embeddings.
double bertscore_dissimilarity(const TokenSequence& reference, const SoftTokenSequence& probs,
                               const ContextualEmbedder& embedder, const IdfWeights& idf);
/// Tape version against precomputed reference embeddings.
ad::Var bertscore_dissimilarity(const Matrix& reference_embeddings, const ad::Var& probs,
                                const ContextualEmbedder& embedder, const IdfWeights& idf);

struct ObjectiveModels {
    const Classifier& target;
    const CausalLM& lm;
    const ContextualEmbedder& embedder;
};

struct ObjectiveValue {
    LossBreakdown loss;
    /// d loss.total / d theta; empty when not requested.
    Matrix gradient;
};

/// Batch mean of margin + lambda_lm * NLL + lambda_sim * (1 - BERTScore) over
/// Gumbel-softmax samples rebuilt from theta and their stored noise.
ObjectiveValue combined_objective(const ThetaMatrix& theta, std::span<const GumbelSample> batch,
                                  const ObjectiveModels& models, const TokenSequence& reference, ClassId label,
                                  const IdfWeights& idf, const AttackConfig& config, bool with_gradient = true);

/// Throws ConfigError when any model disagrees with the vocabulary size.
void check_vocabularies(const ObjectiveModels& models, std::size_t vocab_size);

} // namespace gbda
