#include "gbda/reference_models.hpp"

#include "gbda/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gbda {

// ---- interface helpers ----------------------------------------------------

LogitVector Classifier::forward_tokens(const TokenSequence& tokens) const
{
    if (tokens.vocab_size() != vocab_size()) {
        throw ConfigError("classifier vocabulary does not match token sequence");
    }
    auto inputs = ad::gather_rows(embedding_table().var(), tokens.ids());
    return LogitVector(forward_embeddings(inputs).value().row(0).transpose());
}

LogitVector Classifier::forward_soft(const SoftTokenSequence& probs) const
{
    auto inputs = mix_embeddings(ad::constant(probs.probs()), embedding_table());
    return LogitVector(forward_embeddings(inputs).value().row(0).transpose());
}

Matrix CausalLM::next_token_logprobs(const TokenSequence& tokens) const
{
    if (tokens.vocab_size() != vocab_size()) {
        throw ConfigError("language model vocabulary does not match token sequence");
    }
    return next_token_logprobs(ad::gather_rows(embedding_table().var(), tokens.ids())).value();
}

double CausalLM::sequence_nll(const TokenSequence& tokens) const
{
    Matrix logp = next_token_logprobs(tokens);
    double nll = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        nll -= logp(static_cast<Eigen::Index>(i), tokens[i]);
    }
    return nll;
}

Matrix ContextualEmbedder::embed_tokens(const TokenSequence& tokens) const
{
    if (tokens.vocab_size() != vocab_size()) {
        throw ConfigError("embedder vocabulary does not match token sequence");
    }
    return embed_soft(ad::constant(tokens.one_hot())).value();
}

Matrix ContextualEmbedder::embed_soft(const SoftTokenSequence& probs) const
{
    return embed_soft(ad::constant(probs.probs())).value();
}

// ---- construction ----------------------------------------------------------

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = normal(rng);
        }
    }
    return m;
}

const ad::Var& find_param(const NamedParameters& params, std::string_view name)
{
    for (const auto& [key, var] : params) {
        if (key == name) {
            return var;
        }
    }
    throw InvalidInput("unknown parameter '" + std::string(name) + "'");
}

void assign(NamedParameters& params, std::string_view name, const Matrix& value)
{
    ad::Var var = find_param(params, name);
    if (var.rows() != value.rows() || var.cols() != value.cols()) {
        throw InvalidInput("parameter '" + std::string(name) + "' has the wrong shape");
    }
    var.mutable_value() = value;
}

Matrix causal_mask(Eigen::Index n)
{
    Matrix mask = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            mask(i, j) = -1e9;
        }
    }
    return mask;
}

ad::Var attention(const ad::Var& h, const ad::Var& wq, const ad::Var& wk, const ad::Var& wv, double dim,
                  const Matrix* mask)
{
    auto scores = ad::scale(ad::matmul_transposed(ad::matmul(h, wq), ad::matmul(h, wk)), 1.0 / std::sqrt(dim));
    if (mask != nullptr) {
        scores = ad::add(scores, ad::constant(*mask));
    }
    return ad::matmul(ad::softmax_rows(scores), ad::matmul(h, wv));
}

} // namespace

std::string to_string(ClassifierArch arch)
{
    return arch == ClassifierArch::attention ? "attention" : "bag";
}

ClassifierArch classifier_arch_from_string(std::string_view name)
{
    if (name == "attention") return ClassifierArch::attention;
    if (name == "bag") return ClassifierArch::bag;
    throw ConfigError("unknown classifier architecture '" + std::string(name) + "'");
}

ReferenceClassifier::ReferenceClassifier(std::size_t vocab_size, ClassifierShape shape, Rng& rng) : shape_(shape)
{
    if (vocab_size < 4 || shape.num_classes < 2) {
        throw InvalidInput("reference classifier needs V >= 4 and K >= 2");
    }
    auto v = static_cast<Eigen::Index>(vocab_size);
    auto d = static_cast<Eigen::Index>(shape.dim);
    auto h = static_cast<Eigen::Index>(shape.hidden);
    auto k = static_cast<Eigen::Index>(shape.num_classes);
    double sd = 1.0 / std::sqrt(static_cast<double>(d));
    auto add = [&](std::string name, Matrix value) { params_.emplace_back(std::move(name), ad::constant(value)); };
    add("embedding", gaussian(v, d, 1.0, rng));
    add("position", gaussian(static_cast<Eigen::Index>(shape.max_len), d, 0.1, rng));
    add("query", gaussian(d, d, sd, rng));
    add("key", gaussian(d, d, sd, rng));
    add("value", gaussian(d, d, sd, rng));
    add("ff_weight", gaussian(d, h, sd, rng));
    add("ff_bias", Matrix::Zero(1, h));
    add("out_weight", gaussian(h, k, 1.0 / std::sqrt(static_cast<double>(h)), rng));
    add("out_bias", Matrix::Zero(1, k));
    table_ = EmbeddingTable(param("embedding"));
}

const ad::Var& ReferenceClassifier::param(std::string_view name) const { return find_param(params_, name); }

void ReferenceClassifier::assign_parameter(std::string_view name, const Matrix& value) { assign(params_, name, value); }

void ReferenceClassifier::set_trainable(bool flag)
{
    for (auto& [name, var] : params_) {
        var.set_requires_grad(flag);
        var.zero_grad();
    }
}

ad::Var ReferenceClassifier::forward_embeddings(const ad::Var& inputs) const
{
    auto n = inputs.rows();
    if (inputs.cols() != static_cast<Eigen::Index>(shape_.dim)) {
        throw InvalidInput("classifier input width does not match embedding dimension");
    }
    if (n < 1 || n > static_cast<Eigen::Index>(shape_.max_len)) {
        throw InvalidInput("classifier input length outside [1, max_len]");
    }
    ad::Var h = inputs;
    if (shape_.arch == ClassifierArch::attention) {
        h = ad::add(h, ad::slice_rows(param("position"), 0, n));
        h = ad::add(h, attention(h, param("query"), param("key"), param("value"), static_cast<double>(shape_.dim),
                                 nullptr));
    }
    auto features = ad::tanh(ad::add_row(ad::matmul(h, param("ff_weight")), param("ff_bias")));
    return ad::add_row(ad::matmul(ad::mean_rows(features), param("out_weight")), param("out_bias"));
}

ReferenceLM::ReferenceLM(std::size_t vocab_size, LMShape shape, Rng& rng) : shape_(shape)
{
    if (vocab_size < 4) {
        throw InvalidInput("reference LM needs V >= 4");
    }
    auto v = static_cast<Eigen::Index>(vocab_size);
    auto d = static_cast<Eigen::Index>(shape.dim);
    auto h = static_cast<Eigen::Index>(shape.hidden);
    double sd = 1.0 / std::sqrt(static_cast<double>(d));
    auto add = [&](std::string name, Matrix value) { params_.emplace_back(std::move(name), ad::constant(value)); };
    add("embedding", gaussian(v, d, 1.0, rng));
    add("bos", gaussian(1, d, 1.0, rng));
    add("position", gaussian(static_cast<Eigen::Index>(shape.max_len) + 1, d, 0.1, rng));
    add("query", gaussian(d, d, sd, rng));
    add("key", gaussian(d, d, sd, rng));
    add("value", gaussian(d, d, sd, rng));
    add("ff_in", gaussian(d, h, sd, rng));
    add("ff_bias", Matrix::Zero(1, h));
    add("ff_out", gaussian(h, d, 1.0 / std::sqrt(static_cast<double>(h)), rng));
    add("out_weight", gaussian(d, v, sd, rng));
    add("out_bias", Matrix::Zero(1, v));
    table_ = EmbeddingTable(param("embedding"));
}

const ad::Var& ReferenceLM::param(std::string_view name) const { return find_param(params_, name); }

void ReferenceLM::assign_parameter(std::string_view name, const Matrix& value) { assign(params_, name, value); }

void ReferenceLM::set_trainable(bool flag)
{
    for (auto& [name, var] : params_) {
        var.set_requires_grad(flag);
        var.zero_grad();
    }
}

ad::Var ReferenceLM::hidden_states(const ad::Var& inputs) const
{
    auto n = inputs.rows();
    if (inputs.cols() != static_cast<Eigen::Index>(shape_.dim)) {
        throw InvalidInput("LM input width does not match embedding dimension");
    }
    if (n < 1 || n > static_cast<Eigen::Index>(shape_.max_len)) {
        throw InvalidInput("LM input length outside [1, max_len]");
    }
    const ad::Var parts[] = {param("bos"), inputs};
    auto h = ad::add(ad::vstack(parts), ad::slice_rows(param("position"), 0, n + 1));
    Matrix mask = causal_mask(n + 1);
    h = ad::add(h, attention(h, param("query"), param("key"), param("value"), static_cast<double>(shape_.dim), &mask));
    auto ff = ad::tanh(ad::add_row(ad::matmul(h, param("ff_in")), param("ff_bias")));
    return ad::add(h, ad::matmul(ff, param("ff_out")));
}

ad::Var ReferenceLM::next_token_logprobs(const ad::Var& inputs) const
{
    auto h = hidden_states(inputs);
    auto logits = ad::add_row(ad::matmul(ad::slice_rows(h, 0, inputs.rows()), param("out_weight")),
                              param("out_bias"));
    return ad::log_softmax_rows(logits);
}

ad::Var LMEmbedder::embed_soft(const ad::Var& probs) const
{
    auto h = lm_->hidden_states(mix_embeddings(probs, lm_->embedding_table()));
    return ad::normalize_rows(ad::slice_rows(h, 1, probs.rows()));
}

ad::Var BagEmbedder::embed_soft(const ad::Var& probs) const
{
    return ad::normalize_rows(mix_embeddings(probs, table_));
}

std::shared_ptr<ReferenceClassifier> build_reference_classifier(const Vocabulary& vocab, std::size_t num_classes,
                                                                std::size_t dim, Rng& rng, ClassifierArch arch)
{
    ClassifierShape shape;
    shape.arch = arch;
    shape.num_classes = num_classes;
    shape.dim = dim;
    shape.hidden = 2 * dim;
    return std::make_shared<ReferenceClassifier>(vocab.size(), shape, rng);
}

std::shared_ptr<ReferenceLM> build_reference_lm(const Vocabulary& vocab, std::size_t dim, Rng& rng)
{
    LMShape shape;
    shape.dim = dim;
    shape.hidden = 2 * dim;
    return std::make_shared<ReferenceLM>(vocab.size(), shape, rng);
}

// ---- training --------------------------------------------------------------

namespace {

std::vector<ad::Var> trainable(const NamedParameters& params)
{
    std::vector<ad::Var> out;
    for (const auto& [name, var] : params) {
        out.push_back(var);
    }
    return out;
}

template <class Loss>
double run_epochs(std::size_t count, const TrainOptions& options, ParameterAdam& adam, Rng& rng, Loss&& loss_of)
{
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    double last_epoch = 0.0;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < count; start += options.batch_size) {
            std::size_t stop = std::min(count, start + options.batch_size);
            adam.zero_grad();
            for (std::size_t i = start; i < stop; ++i) {
                auto loss = loss_of(order[i]);
                total += loss.scalar();
                ad::backward(ad::scale(loss, 1.0 / static_cast<double>(stop - start)));
            }
            adam.step();
        }
        last_epoch = total / static_cast<double>(count);
    }
    return last_epoch;
}

} // namespace

double train_classifier(ReferenceClassifier& model, const std::vector<LabeledExample>& data,
                        const TrainOptions& options, Rng& rng)
{
    if (data.empty()) {
        return 0.0;
    }
    model.set_trainable(true);
    ParameterAdam adam(trainable(model.parameters()), options.learning_rate);
    double loss = run_epochs(data.size(), options, adam, rng, [&](std::size_t i) {
        const auto& ex = data[i];
        auto inputs = ad::gather_rows(model.embedding_table().var(), ex.tokens.ids());
        auto logp = ad::log_softmax_rows(model.forward_embeddings(inputs));
        return ad::scale(ad::pick(logp, 0, static_cast<Eigen::Index>(ex.label)), -1.0);
    });
    model.set_trainable(false);
    return loss;
}

double train_lm(ReferenceLM& model, const std::vector<TokenSequence>& corpus, const TrainOptions& options, Rng& rng)
{
    if (corpus.empty()) {
        return 0.0;
    }
    model.set_trainable(true);
    ParameterAdam adam(trainable(model.parameters()), options.learning_rate);
    double loss = run_epochs(corpus.size(), options, adam, rng, [&](std::size_t i) {
        const auto& seq = corpus[i];
        auto inputs = ad::gather_rows(model.embedding_table().var(), seq.ids());
        auto logp = model.next_token_logprobs(inputs);
        auto picked = ad::mul(logp, ad::constant(seq.one_hot()));
        return ad::scale(ad::sum(picked), -1.0 / static_cast<double>(seq.size()));
    });
    model.set_trainable(false);
    return loss;
}

double accuracy(const Classifier& model, const std::vector<LabeledExample>& data)
{
    if (data.empty()) {
        return 0.0;
    }
    std::size_t correct = 0;
    for (const auto& ex : data) {
        correct += model.forward_tokens(ex.tokens).argmax() == ex.label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace gbda
