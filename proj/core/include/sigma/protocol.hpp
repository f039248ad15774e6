#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sigma/types.hpp"

namespace sigma::protocol {

// Wire-level prompt contract; these strings must stay bit-exact.
inline constexpr std::string_view kBeginSearchQuery = "<|begin_search_query|>";
inline constexpr std::string_view kEndSearchQuery = "<|end_search_query|>";
inline constexpr std::string_view kBeginSearchResults = "<|begin_search_results|>";
inline constexpr std::string_view kEndSearchResults = "<|end_search_results|>";

inline constexpr std::string_view kNoResultsText = "No results found.";

enum class SpanKind { SearchQuery, Answer, Plain };

const char* to_string(SpanKind kind);

/// Half-open byte range [start, end) into the scanned text. For SearchQuery
/// spans the range covers both delimiters and payload is the trimmed inner
/// text; for Plain spans payload is the raw covered text.
struct TokenSpan {
    SpanKind kind = SpanKind::Plain;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string payload;

    bool operator==(const TokenSpan&) const = default;
};

/// Splits one complete generation step into well-formed search-query spans and
/// Plain spans for everything else. A span is well-formed when an opening
/// delimiter is followed by a closing delimiter with no opener in between
/// (innermost match); orphaned delimiters degrade to Plain. Total over
/// arbitrary bytes, never throws. Returned spans are ordered, non-overlapping,
/// and tile [0, text.size()) exactly.
std::vector<TokenSpan> scan_generation(std::string_view text);

/// Normalization applied to every answer string: trim, collapse internal
/// whitespace, strip trailing periods, canonicalize integers (drop leading
/// zeros, thousands separators, '+'), lowercase non-numeric answers.
/// Idempotent.
std::string normalize_answer(std::string_view raw);

/// Payload of the last well-formed `\boxed{...}` (balanced braces), else the
/// text after the last "Final answer:" line marker (case-insensitive), both
/// normalized. Absent when neither matches or normalization leaves nothing.
std::optional<std::string> extract_answer(std::string_view text);

/// Renders ranked chunks (descending similarity) as the injectable block:
///   <|begin_search_results|>
///   [1] <chunk text>
///   ...
///   <|end_search_results|>
/// Chunk lines are appended while the payload stays within limit_chars,
/// cutting at chunk boundaries; the first chunk is always present, its text
/// truncated if needed. An empty list yields the block with kNoResultsText.
std::string format_search_results(const std::vector<RankedChunk>& ranked,
                                  int limit_chars);

// Shared string helpers used across modules.
std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::string lower_ascii(std::string_view s);

} // namespace sigma::protocol
