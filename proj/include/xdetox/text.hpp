#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xdetox {

// Tokenization used across the whole framework: lowercase, strip
// punctuation, split on whitespace. Scorers and corpora must agree on it.
std::vector<std::string> tokenize(std::string_view text);

// Inverse of tokenize for normalized tokens: single-space join.
std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace xdetox
