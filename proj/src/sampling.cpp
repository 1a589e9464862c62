#include "gbda/sampling.hpp"

#include "gbda/relaxation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace gbda {

RetokenizationCheck check_retokenization(const TokenSequence& z, const Tokenizer& tokenizer)
{
    RetokenizationCheck check;
    try {
        check.retokenized = tokenizer.encode(tokenizer.decode(z));
    } catch (const std::exception& e) {
        check.retokenized = z;
        check.diagnostic = e.what();
        return check;
    }
    check.stable = check.retokenized == z;
    if (!check.stable) {
        check.diagnostic = "decoded text re-encodes to " + std::to_string(check.retokenized.size()) + " tokens: \""
                           + tokenizer.decode(check.retokenized) + "\"";
    }
    return check;
}

namespace {

std::size_t edit_distance(const std::vector<TokenId>& a, const std::vector<TokenId>& b)
{
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

} // namespace

double token_error_rate(std::span<const std::pair<TokenSequence, TokenSequence>> pairs)
{
    std::size_t errors = 0;
    std::size_t total = 0;
    for (const auto& [original, retokenized] : pairs) {
        errors += edit_distance(original.ids(), retokenized.ids());
        total += original.size();
    }
    return total == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(total);
}

AttackResult sample_adversarial(const ThetaMatrix& theta, const HardLabelTarget& target, ClassId label,
                                const SamplingBudget& budget, Rng& rng, const Tokenizer* tokenizer)
{
    if (budget.max_samples < 1) {
        throw ConfigError("sampling budget must allow at least one sample");
    }
    AttackResult result;
    result.label = label;
    for (std::size_t q = 0; q < budget.max_samples; ++q) {
        AdversarialSample sample;
        sample.tokens = sample_categorical(theta, rng);
        sample.drawn = sample.tokens;
        if (tokenizer != nullptr) {
            auto check = check_retokenization(sample.tokens, *tokenizer);
            for (std::size_t attempt = 1; budget.resample_until_stable && !check.stable
                                          && attempt < budget.max_resample_attempts;
                 ++attempt) {
                sample.drawn = sample_categorical(theta, rng);
                check = check_retokenization(sample.drawn, *tokenizer);
            }
            sample.tokens = check.retokenized;
            sample.retokenization_stable = check.stable;
        }
        ClassId predicted = 0;
        try {
            predicted = target.predict(sample.tokens);
        } catch (const std::exception& e) {
            throw TargetQueryError(e.what(), result.queries_used);
        }
        ++result.queries_used;
        sample.success = predicted != label;
        bool hit = sample.success;
        result.adversarial_samples.push_back(std::move(sample));
        if (hit && budget.stop_on_success) {
            break;
        }
    }
    return result;
}

Vector EmbedderSentenceEncoder::encode(std::string_view text) const
{
    auto tokens = tokenizer_->encode(text);
    Vector pooled = embedder_->embed_tokens(tokens).colwise().mean().transpose();
    double norm = pooled.norm();
    return norm > 0.0 ? Vector(pooled / norm) : pooled;
}

double similarity_score(std::string_view a, std::string_view b, const SentenceEncoder& scorer)
{
    auto blank = [](std::string_view s) {
        return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
    };
    if (blank(a) || blank(b)) {
        throw InvalidInput("similarity needs non-empty texts");
    }
    Vector u = scorer.encode(a);
    Vector v = scorer.encode(b);
    double denom = u.norm() * v.norm();
    if (denom == 0.0) {
        return 0.0;
    }
    return std::clamp(u.dot(v) / denom, -1.0, 1.0);
}

double TransferReport::adversarial_accuracy() const
{
    if (inputs.empty()) {
        return 0.0;
    }
    auto held = std::count_if(inputs.begin(), inputs.end(), [](const auto& o) { return !o.success; });
    return static_cast<double>(held) / static_cast<double>(inputs.size());
}

double TransferReport::success_rate() const { return inputs.empty() ? 0.0 : 1.0 - adversarial_accuracy(); }

double TransferReport::mean_queries() const
{
    if (inputs.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& o : inputs) {
        total += static_cast<double>(o.queries);
    }
    return total / static_cast<double>(inputs.size());
}

double TransferReport::mean_similarity() const
{
    if (inputs.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& o : inputs) {
        total += o.similarity;
    }
    return total / static_cast<double>(inputs.size());
}

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b)
{
    // splitmix64 finalizer applied to each component in turn
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ b);
}

std::vector<TransferReport> transfer_attack(std::span<const TransferInput> store, std::span<const NamedTarget> targets,
                                            const SamplingBudget& budget, const SentenceEncoder& scorer,
                                            const Tokenizer& tokenizer, std::uint64_t seed)
{
    std::vector<TransferReport> reports;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto& target = *targets[t].target;
        if (target.vocab_size() != tokenizer.vocab_size()) {
            throw ConfigError("transfer target '" + targets[t].name + "' uses a different vocabulary");
        }
        TransferReport report;
        report.target_name = targets[t].name;
        for (std::size_t i = 0; i < store.size(); ++i) {
            const auto& input = store[i];
            Rng rng(stream_seed(seed, t + 1, i));
            auto result = sample_adversarial(input.theta, target, input.label, budget, rng, &tokenizer);
            TransferOutcome outcome;
            outcome.id = input.id;
            outcome.success = result.success();
            outcome.queries = result.queries_used;
            outcome.adversarial = result.final_sample();
            outcome.retokenization_stable = result.adversarial_samples.back().retokenization_stable;
            outcome.similarity = similarity_score(tokenizer.decode(input.original),
                                                  tokenizer.decode(outcome.adversarial), scorer);
            report.inputs.push_back(std::move(outcome));
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

} // namespace gbda
