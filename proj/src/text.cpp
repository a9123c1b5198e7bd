#include "cotc/text.hpp"

#include <algorithm>
#include <cctype>

namespace cotc::text {

std::vector<Token> tokenize(const std::string& s) {
    std::vector<Token> out;
    std::string cur;
    bool boundary = true;
    auto flush = [&] {
        if (cur.empty()) return;
        out.push_back({std::move(cur), boundary});
        cur.clear();
        boundary = false;
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c == '\'') continue;
        // U+2019 right single quotation mark
        if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
            static_cast<unsigned char>(s[i + 2]) == 0x99) {
            i += 2;
            continue;
        }
        if (std::isalnum(c) || c == '-') {
            cur.push_back(static_cast<char>(std::tolower(c)));
            continue;
        }
        flush();
        if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?') boundary = true;
    }
    flush();
    return out;
}

std::vector<std::string> words(const std::string& s) {
    std::vector<std::string> out;
    for (auto& t : tokenize(s)) out.push_back(std::move(t.word));
    return out;
}

std::size_t find_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase,
                        std::size_t from) {
    if (phrase.empty() || phrase.size() > tokens.size()) return std::string::npos;
    for (std::size_t i = from; i + phrase.size() <= tokens.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) return i;
    }
    return std::string::npos;
}

}  // namespace cotc::text
