#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stg/error.hpp"

namespace stg {

// Word vocabulary with reserved special ids. Non-special ids are assigned by
// descending frequency, ties broken lexicographically, so the mapping is
// deterministic for a given corpus.
struct Vocab {
    static constexpr std::int32_t kPad = 0;
    static constexpr std::int32_t kUnk = 1;
    static constexpr std::int32_t kCls = 2;
    static constexpr std::int32_t kSep = 3;
    static constexpr std::int32_t kNumSpecial = 4;

    std::unordered_map<std::string, std::int32_t> token_to_id;
    std::vector<std::string> id_to_token;  // specials occupy ids 0..3

    std::int32_t size() const { return static_cast<std::int32_t>(id_to_token.size()); }

    std::int32_t lookup(const std::string& token) const {
        auto it = token_to_id.find(token);
        return it == token_to_id.end() ? kUnk : it->second;
    }
};

// Lowercases and splits on runs of non-alphanumeric characters.
std::vector<std::string> split_words(const std::string& text);

// Builds a vocabulary from training-split texts; tokens below min_freq are
// dropped and map to unk at tokenization time.
Vocab build_vocab(const std::vector<std::string>& texts, std::size_t min_freq);

// [cls, w1, ..., w_{max_len-1}] truncated from the tail, padded with pad.
// The mask marks non-pad positions. Empty text yields [cls, pad, ...].
std::pair<std::vector<std::int32_t>, std::vector<std::uint8_t>> tokenize(
    const std::string& text, const Vocab& vocab, std::size_t max_len);

void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

}  // namespace stg
