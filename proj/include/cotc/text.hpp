#pragma once
// Token-level text helpers shared by the intent parser and the answer parser.

#include <string>
#include <vector>

namespace cotc::text {

struct Token {
    std::string word;
    bool clause_start = false;  // preceded by . , ; : ! ? or start of text
};

// Lowercases, drops apostrophes ("don't" -> "dont") and splits on anything
// outside [a-z0-9-].
std::vector<Token> tokenize(const std::string& s);
std::vector<std::string> words(const std::string& s);

// Index of the first whole-token occurrence of `phrase` in `tokens`, or npos.
std::size_t find_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase,
                        std::size_t from = 0);
inline bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
    return find_phrase(tokens, phrase) != std::string::npos;
}

}  // namespace cotc::text
