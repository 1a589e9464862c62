#pragma once

#include "gbda/core.hpp"

#include <string>
#include <string_view>

namespace gbda {

/// Round-trip text codec over a fixed vocabulary.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual TokenSequence encode(std::string_view text) const = 0;
    virtual std::string decode(const TokenSequence& tokens) const = 0;
    virtual std::size_t vocab_size() const = 0;
};

/// Whitespace-separated word tokens.
class WordTokenizer final : public Tokenizer {
public:
    explicit WordTokenizer(Vocabulary vocab) : vocab_(std::move(vocab)) {}

    TokenSequence encode(std::string_view text) const override;
    std::string decode(const TokenSequence& tokens) const override;
    std::size_t vocab_size() const override { return vocab_.size(); }
    const Vocabulary& vocabulary() const { return vocab_; }

private:
    Vocabulary vocab_;
};

/// Renders ids as decimal numbers; always round-trips exactly.
class IdentityTokenizer final : public Tokenizer {
public:
    explicit IdentityTokenizer(std::size_t vocab_size) : vocab_size_(vocab_size) {}

    TokenSequence encode(std::string_view text) const override;
    std::string decode(const TokenSequence& tokens) const override;
    std::size_t vocab_size() const override { return vocab_size_; }

private:
    std::size_t vocab_size_;
};

/// Subword pieces concatenated without separators on decode and re-split by
/// greedy longest match on encode, like the merge step of a BPE tokenizer.
class MergeTokenizer final : public Tokenizer {
public:
    explicit MergeTokenizer(Vocabulary pieces);

    TokenSequence encode(std::string_view text) const override;
    std::string decode(const TokenSequence& tokens) const override;
    std::size_t vocab_size() const override { return pieces_.size(); }
    const Vocabulary& vocabulary() const { return pieces_; }

private:
    Vocabulary pieces_;
    std::size_t longest_ = 0;
};

} // namespace gbda
