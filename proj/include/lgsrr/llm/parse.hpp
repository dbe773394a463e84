#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lgsrr::llm {

struct SemanticAspect {
    std::string name;
    std::string abbreviation;
    std::size_t frequency = 0;
};

/// Lowercased, whitespace-collapsed, trailing punctuation removed.
std::string normalize_name(std::string_view name);

/// Initials of the non-stopword words: "Tone and Manner of Speaking" -> "TMS".
std::string derive_abbreviation(std::string_view name);

struct ListedAspect {
    std::string name;
    std::string abbreviation;  // empty unless written as "Name (ABBR)"
};

/// Bullet or numbered list items of one discovery response. Text after a colon
/// or a spaced dash is treated as commentary and dropped.
std::vector<ListedAspect> parse_aspect_list(std::string_view response);

/// Accumulates aspects across responses. Names merge case-insensitively and
/// count once per response; the first spelling and the first explicit
/// abbreviation win. Abbreviations are made unique within the result.
class AspectTally {
public:
    /// Returns the number of aspects found in the response.
    std::size_t add_response(std::string_view response);
    std::vector<SemanticAspect> aspects() const;

private:
    struct Entry {
        std::string name;
        std::string abbreviation;
        std::size_t frequency = 0;
        std::size_t first_seen = 0;
    };
    std::map<std::string, Entry> entries_;
};

struct Selection {
    std::vector<SemanticAspect> aspects;
    std::optional<std::string> warning;
};

/// The k most frequent aspects; ties broken by normalized name.
Selection select_top_k(std::span<const SemanticAspect> aspects, std::size_t k);

struct ParsedDescriptions {
    /// Keyed by abbreviation; empty text when the heading was missing.
    std::map<std::string, std::string> text;
    std::vector<std::string> missing;
};

/// Splits a description response by aspect headings such as "(1) Speakers' Actions:",
/// "2. Facial Expressions (E):" or "**Interaction with Others**". Sections are
/// matched by name or abbreviation, not position.
ParsedDescriptions parse_descriptions(std::string_view response, std::span<const SemanticAspect> aspects);

/// Parses an ordering such as "I > A > E", a numbered list, or a comma list
/// into abbreviations. Returns nullopt unless the result is a permutation.
std::optional<std::vector<std::string>> parse_ranking(std::string_view response,
                                                      std::span<const SemanticAspect> aspects);

} // namespace lgsrr::llm
