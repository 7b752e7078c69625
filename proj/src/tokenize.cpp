#include "cbw/tokenize.hpp"

#include <cctype>

namespace cbw {

namespace {

bool is_space_byte(unsigned char c) { return c < 0x80 && std::isspace(c); }
bool is_punct_byte(unsigned char c) { return c < 0x80 && std::ispunct(c); }

char lower_byte(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                  : static_cast<char>(c);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (is_space_byte(c)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else if (is_punct_byte(c)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            tokens.emplace_back(1, static_cast<char>(c));
        } else {
            current.push_back(lower_byte(c));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

std::string normalize_text(std::string_view text) {
    return join_tokens(tokenize(text));
}

bool contains_token_seq(const std::vector<std::string>& haystack,
                        const std::vector<std::string>& needle) {
    if (needle.empty()) return true;
    if (needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (haystack[i + j] != needle[j]) {
                match = false;
                break;
            }
        }
        if (match) return true;
    }
    return false;
}

bool ends_with_token_seq(const std::vector<std::string>& haystack,
                         const std::vector<std::string>& needle) {
    if (needle.size() > haystack.size()) return false;
    const std::size_t off = haystack.size() - needle.size();
    for (std::size_t j = 0; j < needle.size(); ++j) {
        if (haystack[off + j] != needle[j]) return false;
    }
    return true;
}

}  // namespace cbw
