#include "fallacy/text.hpp"

#include <cctype>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fallacy/errors.hpp"
#include "fallacy/taxonomy.hpp"

namespace fallacy {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80 || c == '_'; }

const char* const kStopwords[] = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during",
    "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
    "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into",
    "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor",
    "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such",
    "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom",
    "why", "will", "with", "would", "you", "your", "yours", "yourself", "yourselves",
};

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (c == '<' || c == '[') {
            bool matched = false;
            for (std::string_view special : {kSepToken, kClsToken}) {
                if (text.substr(i, special.size()) == special) {
                    out.push_back(Token{std::string(special), i, false, true});
                    i += special.size();
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }
        if (is_word_byte(c)) {
            std::size_t j = i + 1;
            while (j < n) {
                const auto d = static_cast<unsigned char>(text[j]);
                if (is_word_byte(d)) {
                    ++j;
                } else if ((d == '\'' || d == '-') && j + 1 < n &&
                           is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
                    j += 2;
                } else {
                    break;
                }
            }
            out.push_back(Token{std::string(text.substr(i, j - i)), i, true, false});
            i = j;
            continue;
        }
        out.push_back(Token{std::string(1, text[i]), i, false, false});
        ++i;
    }
    return out;
}

std::vector<std::string> token_strings(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : tokenize(text)) out.push_back(std::move(t.text));
    return out;
}

std::string replace_tokens(std::string_view text, const std::vector<Token>& tokens,
                           const std::vector<std::string>& replacements) {
    std::string out;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i >= replacements.size() || replacements[i].empty()) continue;
        out.append(text.substr(cursor, tokens[i].offset - cursor));
        out.append(replacements[i]);
        cursor = tokens[i].offset + tokens[i].text.size();
    }
    out.append(text.substr(cursor));
    return out;
}

bool is_punctuation(std::string_view token) {
    if (token.empty()) return false;
    for (char c : token)
        if (is_word_byte(static_cast<unsigned char>(c))) return false;
    return true;
}

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words(std::begin(kStopwords),
                                                       std::end(kStopwords));
    return words;
}

bool is_stopword(std::string_view token) { return stopwords().count(to_lower(token)) > 0; }

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open stopword list " + path.string());
    std::unordered_set<std::string> out;
    std::string w;
    while (in >> w) out.insert(to_lower(w));
    return out;
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t size, std::uint64_t seed) {
    auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    return fnv1a_bytes(bytes.data(), bytes.size(), seed);
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view salt) {
    return derive_seed(base, fnv1a(salt));
}

HashingVocab::HashingVocab(int size) : size_(size) {
    if (size <= kReserved) throw ConfigError("vocabulary size must exceed reserved ids");
}

int HashingVocab::id(std::string_view token) const {
    if (token == kSepToken) return kSep;
    if (token == kClsToken) return kCls;
    if (token.empty()) return kUnk;
    const auto buckets = static_cast<std::uint64_t>(size_ - kReserved);
    return kReserved + static_cast<int>(fnv1a(to_lower(token)) % buckets);
}

std::vector<int> HashingVocab::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& t : tokenize(text)) ids.push_back(id(t.text));
    return ids;
}

}  // namespace fallacy
