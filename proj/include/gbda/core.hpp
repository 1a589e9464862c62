#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gbda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using TokenId = std::uint32_t;
using ClassId = std::size_t;
using Rng = std::mt19937_64;

/// Malformed or out-of-range data handed to an operation.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inconsistent configuration: bad hyperparameters, mismatched models, missing files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ordered token list. Ids are 0-based and bijective with the token strings.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens, std::set<TokenId> special_ids = {});

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(TokenId id) const;
    std::optional<TokenId> find(std::string_view token) const;
    /// Throws InvalidInput for unknown tokens.
    TokenId id(std::string_view token) const;
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::set<TokenId>& special_ids() const { return special_ids_; }
    bool is_special(TokenId id) const { return special_ids_.count(id) != 0; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    std::set<TokenId> special_ids_;
};

class TokenSequence {
public:
    TokenSequence() = default;
    TokenSequence(std::vector<TokenId> ids, std::size_t vocab_size);

    std::size_t size() const { return ids_.size(); }
    std::size_t vocab_size() const { return vocab_size_; }
    TokenId operator[](std::size_t i) const { return ids_[i]; }
    const std::vector<TokenId>& ids() const { return ids_; }
    bool empty() const { return ids_.empty(); }

    /// n x V matrix with a single 1 per row.
    Matrix one_hot() const;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

private:
    std::vector<TokenId> ids_;
    std::size_t vocab_size_ = 0;
};

/// Rows are probability vectors over the vocabulary: exact softmax(theta) rows
/// or relaxed Gumbel-softmax draws.
class SoftTokenSequence {
public:
    SoftTokenSequence() = default;
    SoftTokenSequence(Matrix probs, bool relaxed);

    static SoftTokenSequence from_tokens(const TokenSequence& tokens);

    const Matrix& probs() const { return probs_; }
    bool is_relaxed() const { return relaxed_; }
    std::size_t size() const { return static_cast<std::size_t>(probs_.rows()); }
    std::size_t vocab_size() const { return static_cast<std::size_t>(probs_.cols()); }

private:
    Matrix probs_;
    bool relaxed_ = false;
};

/// Parameters of the adversarial distribution, one row of logits per position.
/// Frozen rows are pinned to a fixed token and never optimized.
struct ThetaMatrix {
    Matrix values;
    std::map<std::size_t, TokenId> frozen;

    std::size_t length() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t vocab_size() const { return static_cast<std::size_t>(values.cols()); }
    bool is_frozen(std::size_t row) const { return frozen.count(row) != 0; }
};

struct AttackConfig {
    double temperature = 1.0;
    /// Linear anneal target for the temperature; unset keeps it fixed.
    std::optional<double> final_temperature;
    double kappa = 5.0;
    double lambda_lm = 1.0;
    double lambda_sim = 20.0;
    double init_c = 12.0;
    double learning_rate = 0.3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 10;
    std::size_t num_iterations = 100;
    std::size_t max_samples_whitebox = 100;
    std::size_t max_samples_transfer = 1000;
    bool nll_per_token_mean = false;
    std::uint64_t rng_seed = 0;

    /// Throws ConfigError on violated invariants.
    void validate() const;
};

class LogitVector {
public:
    LogitVector() = default;
    explicit LogitVector(Vector values) : values_(std::move(values)) {}

    const Vector& values() const { return values_; }
    std::size_t num_classes() const { return static_cast<std::size_t>(values_.size()); }
    double operator[](std::size_t k) const { return values_(static_cast<Eigen::Index>(k)); }
    ClassId argmax() const;

private:
    Vector values_;
};

struct LossBreakdown {
    double adversarial = 0.0;
    double fluency = 0.0;
    double similarity = 0.0;
    double total = 0.0;
};

struct AdversarialSample {
    /// What the target saw (the re-encoding when a tokenizer is in play).
    TokenSequence tokens;
    /// The raw draw from P_theta.
    TokenSequence drawn;
    bool success = false;
    bool retokenization_stable = true;
};

struct AttackResult {
    TokenSequence original;
    ClassId label = 0;
    std::vector<AdversarialSample> adversarial_samples;
    std::size_t queries_used = 0;
    double similarity = 0.0;
    std::vector<LossBreakdown> loss_trace;
    std::vector<double> entropy_trace;

    bool success() const { return !adversarial_samples.empty() && adversarial_samples.back().success; }
    const TokenSequence& final_sample() const { return adversarial_samples.back().tokens; }
};

/// Row-wise softmax of theta. Throws InvalidInput on non-finite entries.
SoftTokenSequence row_softmax(const ThetaMatrix& theta);

/// Numerically stable softmax of every row.
Matrix softmax_rows(const Matrix& logits);

/// Shannon entropy (natural log) of every row, with 0 ln 0 = 0.
std::vector<double> row_entropy(const SoftTokenSequence& probs);

double mean_entropy(const ThetaMatrix& theta);

} // namespace gbda
