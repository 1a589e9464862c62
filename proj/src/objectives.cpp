#include "gbda/objectives.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace gbda {

IdfWeights IdfWeights::uniform(std::size_t length)
{
    if (length == 0) {
        throw InvalidInput("idf weights need a non-empty reference");
    }
    auto n = static_cast<Eigen::Index>(length);
    return IdfWeights{Vector::Constant(n, 1.0 / static_cast<double>(length))};
}

IdfTable::IdfTable(std::span<const TokenSequence> corpus, std::size_t vocab_size)
    : idf_(vocab_size, 1.0), num_documents_(corpus.size())
{
    std::vector<std::size_t> df(vocab_size, 0);
    for (const auto& doc : corpus) {
        std::set<TokenId> seen(doc.ids().begin(), doc.ids().end());
        for (TokenId t : seen) {
            if (t >= vocab_size) {
                throw InvalidInput("corpus token outside vocabulary");
            }
            ++df[t];
        }
    }
    double n = static_cast<double>(num_documents_);
    for (std::size_t t = 0; t < vocab_size; ++t) {
        idf_[t] = std::log((n + 1.0) / (static_cast<double>(df[t]) + 1.0)) + 1.0;
    }
}

IdfWeights IdfTable::weights_for(const TokenSequence& reference) const
{
    if (empty()) {
        return IdfWeights::uniform(reference.size());
    }
    Vector w(static_cast<Eigen::Index>(reference.size()));
    for (std::size_t i = 0; i < reference.size(); ++i) {
        w(static_cast<Eigen::Index>(i)) = idf(reference[i]);
    }
    return IdfWeights{w / w.sum()};
}

IdfWeights compute_idf(std::span<const TokenSequence> corpus, const TokenSequence& reference)
{
    return IdfTable(corpus, reference.vocab_size()).weights_for(reference);
}

double margin_loss(const LogitVector& logits, ClassId label, double kappa)
{
    if (logits.num_classes() < 2) {
        throw InvalidInput("margin loss needs at least two classes");
    }
    if (label >= logits.num_classes()) {
        throw InvalidInput("label outside class range");
    }
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < logits.num_classes(); ++k) {
        if (k != label) {
            runner_up = std::max(runner_up, logits[k]);
        }
    }
    return std::max(logits[label] - runner_up + kappa, 0.0);
}

ad::Var margin_loss(const ad::Var& logits, ClassId label, double kappa)
{
    auto k = logits.cols();
    if (logits.rows() != 1 || k < 2) {
        throw InvalidInput("margin loss needs a 1 x K logit row with K >= 2");
    }
    if (static_cast<Eigen::Index>(label) >= k) {
        throw InvalidInput("label outside class range");
    }
    auto y = static_cast<Eigen::Index>(label);
    Matrix exclude = Matrix::Zero(1, k);
    exclude(0, y) = -std::numeric_limits<double>::infinity();
    auto runner_up = ad::row_max(ad::add(logits, ad::constant(exclude)));
    auto gap = ad::add_scalar(ad::sub(ad::pick(logits, 0, y), runner_up), kappa);
    return ad::hinge(gap);
}

ad::Var soft_nll(const ad::Var& probs, const CausalLM& lm, bool per_token_mean)
{
    if (static_cast<std::size_t>(probs.cols()) != lm.vocab_size()) {
        throw ConfigError("language model vocabulary does not match the probability vectors");
    }
    auto logp = lm.next_token_logprobs(mix_embeddings(probs, lm.embedding_table()));
    auto nll = ad::scale(ad::sum(ad::mul(probs, logp)), -1.0);
    if (per_token_mean) {
        nll = ad::scale(nll, 1.0 / static_cast<double>(probs.rows()));
    }
    return nll;
}

double soft_nll(const SoftTokenSequence& probs, const CausalLM& lm, bool per_token_mean)
{
    return soft_nll(ad::constant(probs.probs()), lm, per_token_mean).scalar();
}

ad::Var bertscore_dissimilarity(const Matrix& reference_embeddings, const ad::Var& probs,
                                const ContextualEmbedder& embedder, const IdfWeights& idf)
{
    if (reference_embeddings.rows() == 0 || probs.rows() == 0) {
        throw InvalidInput("BERTScore needs non-empty sequences");
    }
    if (static_cast<Eigen::Index>(idf.size()) != reference_embeddings.rows()) {
        throw InvalidInput("idf weights must match the reference length");
    }
    if (static_cast<std::size_t>(probs.cols()) != embedder.vocab_size()) {
        throw ConfigError("embedder vocabulary does not match the probability vectors");
    }
    auto candidate = embedder.embed_soft(probs);
    auto cosines = ad::matmul_transposed(ad::constant(reference_embeddings), candidate);
    auto best = ad::row_max(cosines);
    auto recall = ad::matmul(ad::constant(idf.weights.transpose()), best);
    return ad::scale(ad::add_scalar(recall, -1.0), -1.0);
}

double bertscore_dissimilarity(const TokenSequence& reference, const SoftTokenSequence& probs,
                               const ContextualEmbedder& embedder, const IdfWeights& idf)
{
    if (reference.empty() || probs.size() == 0) {
        throw InvalidInput("BERTScore needs non-empty sequences");
    }
    return bertscore_dissimilarity(embedder.embed_tokens(reference), ad::constant(probs.probs()), embedder, idf)
        .scalar();
}

void check_vocabularies(const ObjectiveModels& models, std::size_t vocab_size)
{
    if (models.target.vocab_size() != vocab_size) {
        throw ConfigError("target classifier vocabulary size differs from theta");
    }
    if (models.lm.vocab_size() != vocab_size) {
        throw ConfigError("language model vocabulary size differs from theta");
    }
    if (models.embedder.vocab_size() != vocab_size) {
        throw ConfigError("embedder vocabulary size differs from theta");
    }
}

ObjectiveValue combined_objective(const ThetaMatrix& theta, std::span<const GumbelSample> batch,
                                  const ObjectiveModels& models, const TokenSequence& reference, ClassId label,
                                  const IdfWeights& idf, const AttackConfig& config, bool with_gradient)
{
    if (batch.empty()) {
        throw InvalidInput("objective needs at least one Gumbel-softmax sample");
    }
    check_vocabularies(models, theta.vocab_size());
    if (reference.vocab_size() != theta.vocab_size()) {
        throw ConfigError("reference vocabulary size differs from theta");
    }
    auto theta_var = ad::leaf(theta.values, with_gradient);
    Matrix reference_embeddings = models.embedder.embed_tokens(reference);
    double scale = 1.0 / static_cast<double>(batch.size());

    std::vector<ad::Var> totals;
    ObjectiveValue out;
    for (const auto& sample : batch) {
        if (sample.noise.rows() != theta.values.rows() || sample.noise.cols() != theta.values.cols()) {
            throw InvalidInput("Gumbel noise shape differs from theta");
        }
        auto probs = relaxed_probs(theta_var, theta.frozen, sample.noise, sample.temperature);
        auto logits = models.target.forward_embeddings(mix_embeddings(probs, models.target.embedding_table()));
        auto adversarial = margin_loss(logits, label, config.kappa);
        auto fluency = soft_nll(probs, models.lm, config.nll_per_token_mean);
        auto similarity = bertscore_dissimilarity(reference_embeddings, probs, models.embedder, idf);

        out.loss.adversarial += scale * adversarial.scalar();
        out.loss.fluency += scale * fluency.scalar();
        out.loss.similarity += scale * similarity.scalar();
        totals.push_back(ad::add(adversarial,
                                 ad::add(ad::scale(fluency, config.lambda_lm), ad::scale(similarity, config.lambda_sim))));
    }
    auto total = ad::scale(ad::sum(ad::vstack(totals)), scale);
    out.loss.total = total.scalar();
    if (with_gradient) {
        ad::backward(total);
        out.gradient = theta_var.grad().size() != 0 ? theta_var.grad() : Matrix::Zero(theta.values.rows(),
                                                                                      theta.values.cols());
    }
    return out;
}

} // namespace gbda
