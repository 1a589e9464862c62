#include "gbda/core.hpp"

#include <cmath>

namespace gbda {

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::set<TokenId> special_ids)
    : tokens_(std::move(tokens)), special_ids_(std::move(special_ids))
{
    if (tokens_.empty()) {
        throw InvalidInput("vocabulary must not be empty");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
        if (!inserted) {
            throw InvalidInput("duplicate vocabulary token '" + tokens_[i] + "'");
        }
    }
    for (TokenId id : special_ids_) {
        if (id >= tokens_.size()) {
            throw InvalidInput("special token id " + std::to_string(id) + " outside vocabulary");
        }
    }
}

const std::string& Vocabulary::token(TokenId id) const
{
    if (id >= tokens_.size()) {
        throw InvalidInput("token id " + std::to_string(id) + " outside vocabulary");
    }
    return tokens_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const
{
    auto it = index_.find(std::string(token));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

TokenId Vocabulary::id(std::string_view token) const
{
    if (auto found = find(token)) {
        return *found;
    }
    throw InvalidInput("unknown token '" + std::string(token) + "'");
}

TokenSequence::TokenSequence(std::vector<TokenId> ids, std::size_t vocab_size)
    : ids_(std::move(ids)), vocab_size_(vocab_size)
{
    if (ids_.empty()) {
        throw InvalidInput("token sequence must contain at least one token");
    }
    for (TokenId id : ids_) {
        if (id >= vocab_size_) {
            throw InvalidInput("token id " + std::to_string(id) + " >= vocabulary size "
                               + std::to_string(vocab_size_));
        }
    }
}

Matrix TokenSequence::one_hot() const
{
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(ids_.size()), static_cast<Eigen::Index>(vocab_size_));
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        out(static_cast<Eigen::Index>(i), ids_[i]) = 1.0;
    }
    return out;
}

SoftTokenSequence::SoftTokenSequence(Matrix probs, bool relaxed) : probs_(std::move(probs)), relaxed_(relaxed)
{
    if (probs_.rows() == 0 || probs_.cols() == 0) {
        throw InvalidInput("soft token sequence must be non-empty");
    }
    for (Eigen::Index i = 0; i < probs_.rows(); ++i) {
        double total = probs_.row(i).sum();
        if (!(std::abs(total - 1.0) <= 1e-6) || probs_.row(i).minCoeff() < 0.0 || probs_.row(i).maxCoeff() > 1.0) {
            throw InvalidInput("row " + std::to_string(i) + " is not a probability vector");
        }
    }
}

SoftTokenSequence SoftTokenSequence::from_tokens(const TokenSequence& tokens)
{
    return SoftTokenSequence(tokens.one_hot(), false);
}

void AttackConfig::validate() const
{
    if (!(temperature > 0.0)) {
        throw ConfigError("temperature must be positive");
    }
    if (final_temperature && !(*final_temperature > 0.0)) {
        throw ConfigError("final temperature must be positive");
    }
    if (kappa < 0.0 || lambda_lm < 0.0 || lambda_sim < 0.0) {
        throw ConfigError("kappa, lambda_lm and lambda_sim must be non-negative");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning rate must be positive");
    }
    if (batch_size < 1) {
        throw ConfigError("batch size must be at least 1");
    }
    if (max_samples_whitebox < 1 || max_samples_transfer < 1) {
        throw ConfigError("sample budgets must be at least 1");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
        throw ConfigError("invalid adaptive-moment hyperparameters");
    }
}

ClassId LogitVector::argmax() const
{
    Eigen::Index best = 0;
    values_.maxCoeff(&best);
    return static_cast<ClassId>(best);
}

Matrix softmax_rows(const Matrix& logits)
{
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double peak = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - peak).exp().matrix();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

SoftTokenSequence row_softmax(const ThetaMatrix& theta)
{
    if (!theta.values.allFinite()) {
        throw InvalidInput("theta contains non-finite entries");
    }
    return SoftTokenSequence(softmax_rows(theta.values), false);
}

std::vector<double> row_entropy(const SoftTokenSequence& probs)
{
    const Matrix& p = probs.probs();
    std::vector<double> out(static_cast<std::size_t>(p.rows()), 0.0);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        double h = 0.0;
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            double q = p(i, j);
            if (q > 0.0) {
                h -= q * std::log(q);
            }
        }
        out[static_cast<std::size_t>(i)] = std::max(h, 0.0);
    }
    return out;
}

double mean_entropy(const ThetaMatrix& theta)
{
    auto h = row_entropy(row_softmax(theta));
    double total = 0.0;
    for (double v : h) {
        total += v;
    }
    return total / static_cast<double>(h.size());
}

} // namespace gbda
