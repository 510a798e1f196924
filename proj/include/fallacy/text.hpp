#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace fallacy {

inline constexpr std::string_view kSepToken = "<SEP>";
inline constexpr std::string_view kClsToken = "<CLS>";

struct Token {
    std::string text;         // surface form as it appears in the source
    std::size_t offset = 0;   // byte offset into the source
    bool is_word = true;      // false for punctuation / special markers
    bool is_special = false;  // <SEP>, <CLS>
};

// Word/punctuation tokenizer. Words are maximal runs of alphanumerics and
// non-ASCII bytes, with single inner apostrophes or hyphens; every other
// non-space byte is its own punctuation token. <SEP> and <CLS> are kept whole.
std::vector<Token> tokenize(std::string_view text);
std::vector<std::string> token_strings(std::string_view text);

// Rebuilds `text` with token i replaced by replacements[i] when non-empty.
std::string replace_tokens(std::string_view text, const std::vector<Token>& tokens,
                           const std::vector<std::string>& replacements);

bool is_punctuation(std::string_view token);

// Fixed English stopword list (data/stopwords.txt carries the same words).
const std::unordered_set<std::string>& stopwords();
bool is_stopword(std::string_view token);  // case-insensitive
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

// FNV-1a 64.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fnv1a_bytes(const void* data, std::size_t size,
                          std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t v);

// splitmix64 mixing for per-item / per-stage seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);
std::uint64_t derive_seed(std::uint64_t base, std::string_view salt);

// Hashing vocabulary: ids 0..3 are reserved for PAD/UNK/CLS/SEP, words hash
// into the remaining buckets. Stateless, so every curriculum stage and
// every process agrees on token ids without a fitted vocabulary file.
class HashingVocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kReserved = 4;

    explicit HashingVocab(int size = 4096);

    int size() const { return size_; }
    int id(std::string_view token) const;
    std::vector<int> encode(std::string_view text) const;  // lowercased words + punctuation

private:
    int size_;
};

}  // namespace fallacy
