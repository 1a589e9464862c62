#include "gbda/relaxation.hpp"

#include <cmath>
#include <limits>

namespace gbda {

Matrix EmbeddingTable::lookup(const TokenSequence& tokens) const
{
    if (tokens.vocab_size() != vocab_size()) {
        throw InvalidInput("token sequence vocabulary does not match embedding table");
    }
    Matrix out(static_cast<Eigen::Index>(tokens.size()), weights_.cols());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = vectors().row(tokens[i]);
    }
    return out;
}

Matrix gumbel_noise(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr double tiny = std::numeric_limits<double>::min();
    Matrix g(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            double u = std::max(unit(rng), tiny);
            g(i, j) = -std::log(-std::log(u));
        }
    }
    return g;
}

namespace {

Matrix frozen_mask(Eigen::Index rows, Eigen::Index cols, const std::map<std::size_t, TokenId>& frozen)
{
    Matrix keep = Matrix::Ones(rows, cols);
    for (const auto& [row, token] : frozen) {
        keep.row(static_cast<Eigen::Index>(row)).setZero();
    }
    return keep;
}

Matrix frozen_one_hot(Eigen::Index rows, Eigen::Index cols, const std::map<std::size_t, TokenId>& frozen)
{
    Matrix fixed = Matrix::Zero(rows, cols);
    for (const auto& [row, token] : frozen) {
        fixed(static_cast<Eigen::Index>(row), token) = 1.0;
    }
    return fixed;
}

ad::Var pin_frozen(const ad::Var& probs, const std::map<std::size_t, TokenId>& frozen)
{
    if (frozen.empty()) {
        return probs;
    }
    auto rows = probs.rows();
    auto cols = probs.cols();
    return ad::add(ad::mul(probs, ad::constant(frozen_mask(rows, cols, frozen))),
                   ad::constant(frozen_one_hot(rows, cols, frozen)));
}

void check_frozen(const ThetaMatrix& theta)
{
    for (const auto& [row, token] : theta.frozen) {
        if (row >= theta.length() || token >= theta.vocab_size()) {
            throw InvalidInput("frozen row outside theta");
        }
    }
}

} // namespace

ad::Var relaxed_probs(const ad::Var& theta, const std::map<std::size_t, TokenId>& frozen, const Matrix& noise,
                      double temperature)
{
    if (!(temperature > 0.0)) {
        throw ConfigError("Gumbel-softmax temperature must be positive");
    }
    auto logits = ad::scale(ad::add(theta, ad::constant(noise)), 1.0 / temperature);
    return pin_frozen(ad::softmax_rows(logits), frozen);
}

ad::Var exact_probs(const ad::Var& theta, const std::map<std::size_t, TokenId>& frozen)
{
    return pin_frozen(ad::softmax_rows(theta), frozen);
}

GumbelSample sample_gumbel_softmax(const ThetaMatrix& theta, double temperature, Rng& rng)
{
    if (!(temperature > 0.0)) {
        throw ConfigError("Gumbel-softmax temperature must be positive");
    }
    check_frozen(theta);
    GumbelSample sample;
    sample.noise_seed = rng();
    sample.temperature = temperature;
    sample.noise = gumbel_noise(theta.values.rows(), theta.values.cols(), sample.noise_seed);
    Matrix probs = softmax_rows((theta.values + sample.noise) / temperature);
    for (const auto& [row, token] : theta.frozen) {
        probs.row(static_cast<Eigen::Index>(row)).setZero();
        probs(static_cast<Eigen::Index>(row), token) = 1.0;
    }
    sample.soft = SoftTokenSequence(std::move(probs), true);
    return sample;
}

TokenSequence sample_categorical(const ThetaMatrix& theta, Rng& rng)
{
    check_frozen(theta);
    Matrix probs = softmax_rows(theta.values);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<TokenId> ids(theta.length());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double u = unit(rng);
        if (auto it = theta.frozen.find(i); it != theta.frozen.end()) {
            ids[i] = it->second;
            continue;
        }
        auto row = probs.row(static_cast<Eigen::Index>(i));
        Eigen::Index last = row.size() - 1;
        Eigen::Index pick = last;
        double cumulative = 0.0;
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            cumulative += row(j);
            if (u < cumulative) {
                pick = j;
                break;
            }
        }
        ids[i] = static_cast<TokenId>(pick);
    }
    return TokenSequence(std::move(ids), theta.vocab_size());
}

Matrix mix_embeddings(const SoftTokenSequence& probs, const EmbeddingTable& table)
{
    if (probs.vocab_size() != table.vocab_size()) {
        throw InvalidInput("probability vectors and embedding table disagree on vocabulary size");
    }
    return probs.probs() * table.vectors();
}

ad::Var mix_embeddings(const ad::Var& probs, const EmbeddingTable& table)
{
    if (static_cast<std::size_t>(probs.cols()) != table.vocab_size()) {
        throw InvalidInput("probability vectors and embedding table disagree on vocabulary size");
    }
    return ad::matmul(probs, table.var());
}

} // namespace gbda
