#include "gbda/tokenizer.hpp"

#include <charconv>
#include <sstream>

namespace gbda {

TokenSequence WordTokenizer::encode(std::string_view text) const
{
    std::vector<TokenId> ids;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) {
        ids.push_back(vocab_.id(word));
    }
    if (ids.empty()) {
        throw InvalidInput("cannot encode empty text");
    }
    return TokenSequence(std::move(ids), vocab_.size());
}

std::string WordTokenizer::decode(const TokenSequence& tokens) const
{
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += vocab_.token(tokens[i]);
    }
    return out;
}

TokenSequence IdentityTokenizer::encode(std::string_view text) const
{
    std::vector<TokenId> ids;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] == ' ') {
            ++pos;
            continue;
        }
        TokenId id = 0;
        auto [end, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), id);
        if (ec != std::errc{}) {
            throw InvalidInput("identity tokenizer expects decimal ids");
        }
        ids.push_back(id);
        pos = static_cast<std::size_t>(end - text.data());
    }
    if (ids.empty()) {
        throw InvalidInput("cannot encode empty text");
    }
    return TokenSequence(std::move(ids), vocab_size_);
}

std::string IdentityTokenizer::decode(const TokenSequence& tokens) const
{
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += std::to_string(tokens[i]);
    }
    return out;
}

MergeTokenizer::MergeTokenizer(Vocabulary pieces) : pieces_(std::move(pieces))
{
    for (const auto& piece : pieces_.tokens()) {
        if (piece.empty()) {
            throw InvalidInput("merge tokenizer pieces must be non-empty");
        }
        longest_ = std::max(longest_, piece.size());
    }
}

TokenSequence MergeTokenizer::encode(std::string_view text) const
{
    std::vector<TokenId> ids;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t span = std::min(longest_, text.size() - pos);
        bool matched = false;
        for (; span > 0; --span) {
            if (auto id = pieces_.find(text.substr(pos, span))) {
                ids.push_back(*id);
                pos += span;
                matched = true;
                break;
            }
        }
        if (!matched) {
            throw InvalidInput("no piece matches text at offset " + std::to_string(pos));
        }
    }
    if (ids.empty()) {
        throw InvalidInput("cannot encode empty text");
    }
    return TokenSequence(std::move(ids), pieces_.size());
}

std::string MergeTokenizer::decode(const TokenSequence& tokens) const
{
    std::string out;
    for (TokenId id : tokens.ids()) {
        out += pieces_.token(id);
    }
    return out;
}

} // namespace gbda
