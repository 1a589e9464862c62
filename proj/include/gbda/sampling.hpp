#pragma once

#include "gbda/models.hpp"
#include "gbda/tokenizer.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gbda {

struct SamplingBudget {
    std::size_t max_samples = 100;
    bool stop_on_success = true;
    /// Redraw (without querying) until the sample survives re-tokenization.
    bool resample_until_stable = false;
    std::size_t max_resample_attempts = 100;
};

/// A target failed mid-sampling; the queries issued so far are attached.
class TargetQueryError : public std::runtime_error {
public:
    TargetQueryError(const std::string& what, std::size_t queries_used)
        : std::runtime_error(what), queries_used_(queries_used) {}
    std::size_t queries_used() const { return queries_used_; }

private:
    std::size_t queries_used_;
};

struct RetokenizationCheck {
    bool stable = false;
    TokenSequence retokenized;
    std::string diagnostic;
};

/// Decodes z and encodes the text again. Decode or encode failures report
/// an unstable result carrying z unchanged.
RetokenizationCheck check_retokenization(const TokenSequence& z, const Tokenizer& tokenizer);

/// Token-level edit distance between original and retokenized sequences,
/// divided by the total original length.
double token_error_rate(std::span<const std::pair<TokenSequence, TokenSequence>> pairs);

/// Draws z ~ P_theta until the target mislabels one or the budget runs out.
/// With a tokenizer, every draw is re-tokenized and the re-encoding is what
/// the target sees. The last drawn sample decides success.
AttackResult sample_adversarial(const ThetaMatrix& theta, const HardLabelTarget& target, ClassId label,
                                const SamplingBudget& budget, Rng& rng, const Tokenizer* tokenizer = nullptr);

/// Fixed-length sentence vectors for similarity scoring.
class SentenceEncoder {
public:
    virtual ~SentenceEncoder() = default;
    virtual Vector encode(std::string_view text) const = 0;
};

/// Mean-pooled contextual embeddings, unit-normalized.
class EmbedderSentenceEncoder final : public SentenceEncoder {
public:
    EmbedderSentenceEncoder(std::shared_ptr<const Tokenizer> tokenizer,
                            std::shared_ptr<const ContextualEmbedder> embedder)
        : tokenizer_(std::move(tokenizer)), embedder_(std::move(embedder)) {}

    Vector encode(std::string_view text) const override;

private:
    std::shared_ptr<const Tokenizer> tokenizer_;
    std::shared_ptr<const ContextualEmbedder> embedder_;
};

/// Cosine of the two sentence vectors, clamped to [-1, 1]. Empty text is invalid.
double similarity_score(std::string_view a, std::string_view b, const SentenceEncoder& scorer);

struct TransferInput {
    std::string id;
    TokenSequence original;
    ClassId label = 0;
    ThetaMatrix theta;
};

struct TransferOutcome {
    std::string id;
    bool success = false;
    std::size_t queries = 0;
    double similarity = 0.0;
    TokenSequence adversarial;
    bool retokenization_stable = true;
};

struct TransferReport {
    std::string target_name;
    std::vector<TransferOutcome> inputs;
    std::size_t skipped = 0;

    /// Fraction of inputs for which no drawn sample fooled the target.
    double adversarial_accuracy() const;
    double success_rate() const;
    double mean_queries() const;
    double mean_similarity() const;
};

struct NamedTarget {
    std::string name;
    std::shared_ptr<const HardLabelTarget> target;
};

/// Seed for an independent stream keyed by (base, a, b).
std::uint64_t stream_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b);

/// Samples every stored theta against every hard-label target. Each
/// (target, input) pair gets its own RNG stream derived from `seed`.
std::vector<TransferReport> transfer_attack(std::span<const TransferInput> store, std::span<const NamedTarget> targets,
                                            const SamplingBudget& budget, const SentenceEncoder& scorer,
                                            const Tokenizer& tokenizer, std::uint64_t seed);

} // namespace gbda
