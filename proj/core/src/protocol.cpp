#include "sigma/protocol.hpp"

#include <algorithm>
#include <cctype>

namespace sigma::protocol {

const char* to_string(SpanKind kind) {
    switch (kind) {
    case SpanKind::SearchQuery: return "SearchQuery";
    case SpanKind::Answer: return "Answer";
    case SpanKind::Plain: return "Plain";
    }
    return "Plain";
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(c);
    }
    return out;
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

std::vector<TokenSpan> scan_generation(std::string_view text) {
    std::vector<TokenSpan> spans;
    size_t plain_start = 0;            // start of the current unclaimed run
    std::optional<size_t> pending_open; // offset of the latest unmatched opener
    size_t pos = 0;

    while (pos < text.size()) {
        const size_t next_open = text.find(kBeginSearchQuery, pos);
        const size_t next_close = text.find(kEndSearchQuery, pos);
        if (next_open == std::string_view::npos &&
            next_close == std::string_view::npos) {
            break;
        }
        if (next_open < next_close) {
            // A newer opener supersedes any pending one; the old opener's text
            // stays inside the plain run.
            pending_open = next_open;
            pos = next_open + kBeginSearchQuery.size();
            continue;
        }
        // Closer first.
        if (pending_open) {
            const size_t open_at = *pending_open;
            const size_t inner_begin = open_at + kBeginSearchQuery.size();
            const size_t span_end = next_close + kEndSearchQuery.size();
            if (open_at > plain_start) {
                spans.push_back({SpanKind::Plain, plain_start, open_at,
                                 std::string(text.substr(plain_start,
                                                         open_at - plain_start))});
            }
            spans.push_back({SpanKind::SearchQuery, open_at, span_end,
                             trim(text.substr(inner_begin,
                                              next_close - inner_begin))});
            plain_start = span_end;
            pending_open.reset();
            pos = span_end;
        } else {
            // Orphaned closer: stays plain.
            pos = next_close + kEndSearchQuery.size();
        }
    }
    if (plain_start < text.size()) {
        spans.push_back({SpanKind::Plain, plain_start, text.size(),
                         std::string(text.substr(plain_start))});
    }
    if (spans.empty()) {
        spans.push_back({SpanKind::Plain, 0, 0, ""});
    }
    return spans;
}

namespace {

// Integer with optional sign, either plain digits or valid 1-3,3,3,... comma
// grouping. Returns the canonical form ("007" -> "7", "1,234" -> "1234").
std::optional<std::string> canonical_integer(const std::string& s) {
    if (s.empty()) return std::nullopt;
    size_t i = 0;
    bool negative = false;
    if (s[0] == '+' || s[0] == '-') {
        negative = s[0] == '-';
        i = 1;
    }
    if (i >= s.size()) return std::nullopt;

    std::string digits;
    const std::string body = s.substr(i);
    const bool has_comma = body.find(',') != std::string::npos;
    if (has_comma) {
        size_t group = 0;
        bool first = true;
        for (size_t j = 0; j <= body.size(); ++j) {
            if (j == body.size() || body[j] == ',') {
                if (first ? (group < 1 || group > 3) : group != 3) return std::nullopt;
                if (j == body.size() && body[j - 1] == ',') return std::nullopt;
                first = false;
                group = 0;
            } else if (std::isdigit(static_cast<unsigned char>(body[j]))) {
                ++group;
            } else {
                return std::nullopt;
            }
        }
        for (char c : body)
            if (c != ',') digits.push_back(c);
    } else {
        for (char c : body) {
            if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        }
        digits = body;
    }
    if (digits.empty()) return std::nullopt;
    size_t nz = digits.find_first_not_of('0');
    if (nz == std::string::npos) return std::string("0");
    digits = digits.substr(nz);
    return negative ? "-" + digits : digits;
}

} // namespace

std::string normalize_answer(std::string_view raw) {
    std::string s = collapse_whitespace(trim(raw));
    while (!s.empty() && s.back() == '.') s.pop_back();
    s = trim(s);
    if (auto canon = canonical_integer(s)) return *canon;
    return lower_ascii(s);
}

namespace {

// Payload of the last \boxed{...} whose braces balance.
std::optional<std::string> last_boxed_payload(std::string_view text) {
    static constexpr std::string_view marker = "\\boxed{";
    std::optional<std::string> found;
    size_t pos = 0;
    while ((pos = text.find(marker, pos)) != std::string_view::npos) {
        size_t i = pos + marker.size();
        int depth = 1;
        std::string payload;
        for (; i < text.size(); ++i) {
            char c = text[i];
            if (c == '{') ++depth;
            if (c == '}') {
                --depth;
                if (depth == 0) break;
            }
            payload.push_back(c);
        }
        if (depth == 0) {
            found = payload;
            pos = i + 1;
        } else {
            break; // unterminated; no later well-formed marker can start inside
        }
    }
    return found;
}

std::optional<std::string> last_final_answer_line(std::string_view text) {
    static constexpr std::string_view marker = "final answer:";
    std::optional<std::string> found;
    size_t line_start = 0;
    const std::string lowered = lower_ascii(text);
    while (line_start <= text.size()) {
        size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        const std::string_view lower_line =
            std::string_view(lowered).substr(line_start, line_end - line_start);
        const size_t at = lower_line.rfind(marker);
        if (at != std::string_view::npos) {
            found = std::string(
                text.substr(line_start + at + marker.size(),
                            line_end - line_start - at - marker.size()));
        }
        if (line_end == text.size()) break;
        line_start = line_end + 1;
    }
    return found;
}

} // namespace

std::optional<std::string> extract_answer(std::string_view text) {
    std::optional<std::string> payload = last_boxed_payload(text);
    if (!payload) payload = last_final_answer_line(text);
    if (!payload) return std::nullopt;
    std::string normalized = normalize_answer(*payload);
    if (normalized.empty()) return std::nullopt;
    return normalized;
}

std::string format_search_results(const std::vector<RankedChunk>& ranked,
                                  int limit_chars) {
    std::string payload;
    if (ranked.empty()) {
        payload = std::string(kNoResultsText) + "\n";
    } else {
        const size_t limit = limit_chars > 0 ? static_cast<size_t>(limit_chars) : 0;
        for (size_t m = 0; m < ranked.size(); ++m) {
            std::string line = "[" + std::to_string(m + 1) + "] ";
            line += ranked[m].chunk.text;
            line += '\n';
            if (m == 0 && line.size() > limit) {
                // First chunk always appears; cut its text to fit the budget.
                size_t keep = limit >= 1 ? limit - 1 : 0; // reserve the newline
                if (keep < line.size() - 1) {
                    line.resize(keep);
                    // A byte cut may land inside a multibyte UTF-8 sequence;
                    // drop the incomplete tail, keep a complete one.
                    size_t p = line.size();
                    while (p > 0 &&
                           (static_cast<unsigned char>(line[p - 1]) & 0xC0) == 0x80) {
                        --p;
                    }
                    if (p > 0) {
                        const auto lead = static_cast<unsigned char>(line[p - 1]);
                        const size_t expect = lead < 0x80            ? 1
                                              : (lead & 0xE0) == 0xC0 ? 2
                                              : (lead & 0xF0) == 0xE0 ? 3
                                              : (lead & 0xF8) == 0xF0 ? 4
                                                                      : 1;
                        if (line.size() - (p - 1) < expect) line.resize(p - 1);
                    }
                    line += '\n';
                }
                payload = line;
                break;
            }
            if (payload.size() + line.size() > limit) break;
            payload += line;
        }
    }
    std::string out;
    out.reserve(payload.size() + 64);
    out += kBeginSearchResults;
    out += '\n';
    out += payload;
    out += kEndSearchResults;
    return out;
}

} // namespace sigma::protocol
