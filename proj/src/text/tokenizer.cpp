#include "sftgen/text/tokenizer.hpp"

#include <cstdint>

namespace sftgen::text {

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

/// Decodes one code point at `pos`, advancing it. Invalid sequences consume
/// one byte and yield kInvalid.
char32_t decode(std::string_view s, std::size_t& pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) {
        ++pos;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++pos;
        return kInvalid;
    }
    if (pos + static_cast<std::size_t>(len) > s.size()) {
        ++pos;
        return kInvalid;
    }
    for (int i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + static_cast<std::size_t>(i)]);
        if ((b & 0xC0) != 0x80) {
            ++pos;
            return kInvalid;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    pos += static_cast<std::size_t>(len);
    return cp;
}

void encode(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

enum class Class { space, word, ideograph, symbol };

bool in(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

Class classify(char32_t c) {
    if (c == kInvalid) return Class::symbol;
    if (c < 0x80) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            return Class::space;
        }
        if (in(c, '0', '9') || in(c, 'a', 'z') || in(c, 'A', 'Z')) return Class::word;
        return Class::symbol;
    }
    if (c == 0x85 || c == 0xA0 || c == 0x1680 || in(c, 0x2000, 0x200A) || c == 0x2028 ||
        c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000) {
        return Class::space;
    }
    // Latin-1 letters, Latin Extended A/B, IPA, Greek, Cyrillic, Armenian,
    // Hebrew and Arabic letters, Latin Extended Additional, Greek Extended.
    if ((in(c, 0xC0, 0x24F) && c != 0xD7 && c != 0xF7) || in(c, 0x250, 0x2AF) ||
        (in(c, 0x370, 0x3FF) && c != 0x37E && c != 0x387) || in(c, 0x400, 0x52F) ||
        in(c, 0x531, 0x587) || in(c, 0x5D0, 0x5EA) || in(c, 0x620, 0x64A) ||
        in(c, 0x660, 0x669) || in(c, 0x1E00, 0x1FFF) || c == 0xAA || c == 0xB5 || c == 0xBA) {
        return Class::word;
    }
    // Hangul syllables and jamo are written with spaces between words.
    if (in(c, 0xAC00, 0xD7A3) || in(c, 0x1100, 0x11FF) || in(c, 0x3130, 0x318F)) {
        return Class::word;
    }
    // Fullwidth digits and Latin letters.
    if (in(c, 0xFF10, 0xFF19) || in(c, 0xFF21, 0xFF3A) || in(c, 0xFF41, 0xFF5A)) {
        return Class::word;
    }
    // Scripts without inter-word spaces: one token per code point.
    if (in(c, 0x3040, 0x30FF) || in(c, 0x3400, 0x4DBF) || in(c, 0x4E00, 0x9FFF) ||
        in(c, 0xF900, 0xFAFF) || in(c, 0x20000, 0x2FA1F) || in(c, 0x0E00, 0x0E7F)) {
        return Class::ideograph;
    }
    return Class::symbol;
}

char32_t lower(char32_t c) {
    if (in(c, 'A', 'Z')) return c + 0x20;
    if (c < 0x80) return c;
    if (in(c, 0xC0, 0xDE) && c != 0xD7) return c + 0x20;
    if ((in(c, 0x100, 0x137) || in(c, 0x14A, 0x177)) && c % 2 == 0) return c + 1;
    if (in(c, 0x139, 0x148) && c % 2 == 1) return c + 1;
    if (in(c, 0x391, 0x3A9) && c != 0x3A2) return c + 0x20;
    if (in(c, 0x410, 0x42F)) return c + 0x20;
    if (in(c, 0x400, 0x40F)) return c + 0x50;
    if (in(c, 0xFF21, 0xFF3A)) return c + 0x20;
    return c;
}

}  // namespace

std::vector<Span> scan(std::string_view s) {
    std::vector<Span> spans;
    std::size_t pos = 0;
    bool in_word = false;
    while (pos < s.size()) {
        const std::size_t start = pos;
        const Class cls = classify(decode(s, pos));
        if (cls == Class::word) {
            if (in_word) {
                spans.back().end = pos;
            } else {
                spans.push_back({start, pos, true});
                in_word = true;
            }
            continue;
        }
        in_word = false;
        if (cls == Class::ideograph) {
            spans.push_back({start, pos, true});
        } else if (cls == Class::symbol) {
            spans.push_back({start, pos, false});
        }
    }
    return spans;
}

std::string fold_case(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (pos < s.size()) {
        const std::size_t start = pos;
        const char32_t c = decode(s, pos);
        if (c == kInvalid) {
            out.append(s.substr(start, pos - start));
        } else {
            encode(lower(c), out);
        }
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    for (const auto& span : scan(s)) {
        if (span.word) tokens.push_back(fold_case(s.substr(span.begin, span.end - span.begin)));
    }
    return tokens;
}

std::size_t count_tokens(std::string_view s) { return scan(s).size(); }

bool is_space(std::string_view s) {
    std::size_t pos = 0;
    while (pos < s.size()) {
        if (classify(decode(s, pos)) != Class::space) return false;
    }
    return true;
}

}  // namespace sftgen::text
