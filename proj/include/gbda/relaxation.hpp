#pragma once

#include "gbda/autodiff.hpp"
#include "gbda/core.hpp"

namespace gbda {

/// V x d lookup table mapping token ids to input vectors.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(Matrix vectors) : weights_(ad::constant(std::move(vectors))) {}
    /// Shares the parameter node, so a model's table can be trained in place.
    explicit EmbeddingTable(ad::Var weights) : weights_(std::move(weights)) {}

    const Matrix& vectors() const { return weights_.value(); }
    const ad::Var& var() const { return weights_; }
    std::size_t vocab_size() const { return static_cast<std::size_t>(weights_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(weights_.cols()); }

    Matrix lookup(const TokenSequence& tokens) const;

private:
    ad::Var weights_;
};

/// One relaxed draw from the Gumbel-softmax distribution. The noise matrix is
/// kept so the draw can be rebuilt on a gradient tape.
struct GumbelSample {
    SoftTokenSequence soft;
    std::uint64_t noise_seed = 0;
    Matrix noise;
    double temperature = 1.0;
};

/// i.i.d. standard Gumbel noise, -ln(-ln u), from a generator seeded with `seed`.
Matrix gumbel_noise(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

/// Throws ConfigError when temperature <= 0.
GumbelSample sample_gumbel_softmax(const ThetaMatrix& theta, double temperature, Rng& rng);

/// Differentiable Gumbel-softmax for fixed noise. Frozen rows come out as
/// constant one-hot rows with zero gradient.
ad::Var relaxed_probs(const ad::Var& theta, const std::map<std::size_t, TokenId>& frozen, const Matrix& noise,
                      double temperature);

/// Exact probabilities softmax(theta) on the tape, frozen rows one-hot.
ad::Var exact_probs(const ad::Var& theta, const std::map<std::size_t, TokenId>& frozen);

/// Independent categorical draw per position; frozen rows emit their token.
TokenSequence sample_categorical(const ThetaMatrix& theta, Rng& rng);

/// Row i is sum_j probs(i, j) * table(j).
Matrix mix_embeddings(const SoftTokenSequence& probs, const EmbeddingTable& table);
ad::Var mix_embeddings(const ad::Var& probs, const EmbeddingTable& table);

} // namespace gbda
