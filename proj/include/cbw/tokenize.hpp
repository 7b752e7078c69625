#pragma once

// Workbench-wide tokenization: lowercase, split on whitespace and punctuation
// boundaries, punctuation kept as standalone tokens. Re-serialization joins
// with single spaces. Bytes >= 0x80 are treated as word characters so UTF-8
// text passes through unmangled.

#include <string>
#include <string_view>
#include <vector>

namespace cbw {

std::vector<std::string> tokenize(std::string_view text);

// Join with single spaces (inverse of tokenize up to spacing/case).
std::string join_tokens(const std::vector<std::string>& tokens);

// join_tokens(tokenize(text)); the canonical form used by all metrics.
std::string normalize_text(std::string_view text);

// True when needle's token sequence occurs contiguously inside haystack's.
bool contains_token_seq(const std::vector<std::string>& haystack,
                        const std::vector<std::string>& needle);

// True when haystack's token sequence ends with needle's.
bool ends_with_token_seq(const std::vector<std::string>& haystack,
                         const std::vector<std::string>& needle);

}  // namespace cbw
