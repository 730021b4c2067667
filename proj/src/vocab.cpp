#include "stg/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "stg/io_util.hpp"

namespace stg {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

Vocab build_vocab(const std::vector<std::string>& texts, std::size_t min_freq) {
    if (texts.empty()) throw DataError("build_vocab: empty corpus");
    std::map<std::string, std::size_t> freq;  // ordered map keeps ties lexicographic
    for (const auto& t : texts)
        for (auto& w : split_words(t)) ++freq[w];

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [word, count] : freq)
        if (count >= min_freq) kept.emplace_back(word, count);
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    Vocab vocab;
    vocab.id_to_token = {"<pad>", "<unk>", "<cls>", "<sep>"};
    for (auto& [word, count] : kept) {
        vocab.token_to_id.emplace(word, vocab.size());
        vocab.id_to_token.push_back(word);
    }
    return vocab;
}

std::pair<std::vector<std::int32_t>, std::vector<std::uint8_t>> tokenize(
    const std::string& text, const Vocab& vocab, std::size_t max_len) {
    if (max_len < 2) throw ParameterError("tokenize: max_len must be at least 2");
    std::vector<std::int32_t> ids(max_len, Vocab::kPad);
    std::vector<std::uint8_t> mask(max_len, 0);
    ids[0] = Vocab::kCls;
    mask[0] = 1;
    std::size_t pos = 1;
    for (const auto& w : split_words(text)) {
        if (pos >= max_len) break;
        ids[pos] = vocab.lookup(w);
        mask[pos] = 1;
        ++pos;
    }
    return {std::move(ids), std::move(mask)};
}

void save_vocab(const std::string& path, const Vocab& vocab) {
    std::string body;
    for (std::int32_t i = Vocab::kNumSpecial; i < vocab.size(); ++i) {
        body += vocab.id_to_token[i];
        body += '\n';
    }
    atomic_write_text(path, body);
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DependencyError("load_vocab: cannot open " + path);
    Vocab vocab;
    vocab.id_to_token = {"<pad>", "<unk>", "<cls>", "<sep>"};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (vocab.token_to_id.count(line))
            throw DataError("load_vocab: duplicate token '" + line + "'");
        vocab.token_to_id.emplace(line, vocab.size());
        vocab.id_to_token.push_back(line);
    }
    return vocab;
}

}  // namespace stg
