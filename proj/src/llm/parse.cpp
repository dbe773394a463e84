#include "lgsrr/llm/parse.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lgsrr::llm {

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && ws(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        out.push_back(text.substr(0, nl));
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

// Unicode apostrophes and dashes mapped to ASCII, emphasis markers removed.
std::string plain(std::string_view s) {
    std::string out(s);
    out = replace_all(out, "\xE2\x80\x99", "'");
    out = replace_all(out, "\xE2\x80\x93", "-");
    out = replace_all(out, "\xE2\x80\x94", "-");
    out = replace_all(out, "**", "");
    out = replace_all(out, "__", "");
    out = replace_all(out, "`", "");
    return out;
}

struct Marked {
    bool marker = false;
    std::string rest;
};

// Drops heading hashes and one leading bullet or number marker.
Marked strip_marker(std::string_view line) {
    std::string s = plain(trim(line));
    std::string_view v = s;
    bool marker = false;
    while (!v.empty() && v.front() == '#') {
        v.remove_prefix(1);
        marker = true;
    }
    v = trim(v);
    if (v.rfind("\xE2\x80\xA2", 0) == 0) {
        v.remove_prefix(3);
        marker = true;
    } else if (!v.empty() && (v.front() == '-' || v.front() == '*' || v.front() == '+')) {
        v.remove_prefix(1);
        marker = true;
    } else if (!v.empty() && v.front() == '(') {
        std::size_t i = 1;
        while (i < v.size() && std::isdigit(static_cast<unsigned char>(v[i]))) ++i;
        if (i > 1 && i < v.size() && v[i] == ')') {
            v.remove_prefix(i + 1);
            marker = true;
        }
    } else {
        std::size_t i = 0;
        while (i < v.size() && std::isdigit(static_cast<unsigned char>(v[i]))) ++i;
        if (i > 0 && i < v.size() && (v[i] == '.' || v[i] == ')')) {
            v.remove_prefix(i + 1);
            marker = true;
        }
    }
    return {marker, std::string(trim(v))};
}

bool is_abbreviation(std::string_view s) {
    if (s.empty() || s.size() > 6) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isupper(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c));
    });
}

// Splits "Name (ABBR)" into its parts; abbreviation empty when absent.
std::pair<std::string, std::string> split_abbreviation(std::string_view item) {
    item = trim(item);
    if (!item.empty() && item.back() == ')') {
        const auto open = item.rfind('(');
        if (open != std::string_view::npos) {
            const auto inside = trim(item.substr(open + 1, item.size() - open - 2));
            if (is_abbreviation(inside)) {
                return {std::string(trim(item.substr(0, open))), std::string(inside)};
            }
        }
    }
    return {std::string(item), ""};
}

// Normalized name with apostrophes dropped and plural "s" trimmed per word.
std::string loose_key(std::string_view name) {
    std::istringstream words(replace_all(normalize_name(plain(name)), "'", ""));
    std::string w;
    std::string out;
    while (words >> w) {
        if (w.size() > 3 && w.back() == 's') {
            w.pop_back();
        }
        out += (out.empty() ? "" : " ") + w;
    }
    return out;
}

std::optional<std::size_t> resolve(std::string_view token, std::span<const SemanticAspect> aspects) {
    std::string t = plain(trim(token));
    while (!t.empty() && std::string_view("\"'.,;").find(t.back()) != std::string_view::npos) t.pop_back();
    while (!t.empty() && std::string_view("\"'").find(t.front()) != std::string_view::npos) t.erase(0, 1);
    t = std::string(trim(t));
    if (t.empty()) {
        return std::nullopt;
    }
    const auto [name, abbr] = split_abbreviation(t);
    for (std::size_t i = 0; i < aspects.size(); ++i) {
        if (!abbr.empty() && abbr == aspects[i].abbreviation) return i;
    }
    for (std::size_t i = 0; i < aspects.size(); ++i) {
        if (name == aspects[i].abbreviation) return i;
    }
    const std::string key = loose_key(name);
    for (std::size_t i = 0; i < aspects.size(); ++i) {
        if (key == loose_key(aspects[i].name)) return i;
    }
    return std::nullopt;
}

std::optional<std::vector<std::string>> as_permutation(const std::vector<std::optional<std::size_t>>& picks,
                                                       std::span<const SemanticAspect> aspects) {
    if (picks.size() != aspects.size()) {
        return std::nullopt;
    }
    std::set<std::size_t> seen;
    std::vector<std::string> out;
    for (const auto& p : picks) {
        if (!p || !seen.insert(*p).second) {
            return std::nullopt;
        }
        out.push_back(aspects[*p].abbreviation);
    }
    return out;
}

} // namespace

std::string normalize_name(std::string_view name) {
    std::string out;
    bool space = false;
    for (char c : plain(trim(name))) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
            continue;
        }
        if (space) {
            out += ' ';
            space = false;
        }
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    while (!out.empty() && std::string_view(".:;,").find(out.back()) != std::string_view::npos) {
        out.pop_back();
    }
    return out;
}

std::string derive_abbreviation(std::string_view name) {
    static const std::set<std::string> stop = {"a", "an", "and", "the", "of", "with", "to", "in", "on", "for", "or"};
    std::istringstream words(replace_all(plain(name), "-", " "));
    std::string w;
    std::string out;
    while (words >> w) {
        std::string lower;
        for (char c : w) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (stop.count(lower) || !std::isalpha(static_cast<unsigned char>(w.front()))) {
            continue;
        }
        out += static_cast<char>(std::toupper(static_cast<unsigned char>(w.front())));
    }
    return out.empty() ? "X" : out;
}

std::vector<ListedAspect> parse_aspect_list(std::string_view response) {
    std::vector<ListedAspect> out;
    for (std::string_view line : lines_of(response)) {
        const Marked m = strip_marker(line);
        if (!m.marker) {
            continue;
        }
        std::string_view item = m.rest;
        item = item.substr(0, item.find(':'));
        item = item.substr(0, item.find(" - "));
        auto [name, abbr] = split_abbreviation(item);
        while (!name.empty() && std::string_view(".;,").find(name.back()) != std::string_view::npos) {
            name.pop_back();
        }
        if (!trim(name).empty()) {
            out.push_back({std::string(trim(name)), abbr});
        }
    }
    return out;
}

std::size_t AspectTally::add_response(std::string_view response) {
    std::set<std::string> seen;
    for (const ListedAspect& item : parse_aspect_list(response)) {
        const std::string key = normalize_name(item.name);
        if (key.empty() || !seen.insert(key).second) {
            continue;
        }
        auto [it, fresh] = entries_.try_emplace(key);
        Entry& e = it->second;
        if (fresh) {
            e.name = item.name;
            e.first_seen = entries_.size() - 1;
        }
        if (e.abbreviation.empty()) {
            e.abbreviation = item.abbreviation;
        }
        ++e.frequency;
    }
    return seen.size();
}

std::vector<SemanticAspect> AspectTally::aspects() const {
    std::vector<const Entry*> order;
    for (const auto& [key, e] : entries_) {
        order.push_back(&e);
    }
    std::sort(order.begin(), order.end(), [](const Entry* a, const Entry* b) { return a->first_seen < b->first_seen; });
    std::set<std::string> taken;
    const auto claim = [&taken](std::string abbr) {
        std::string candidate = abbr;
        for (int n = 2; taken.count(candidate); ++n) {
            candidate = abbr + std::to_string(n);
        }
        taken.insert(candidate);
        return candidate;
    };
    std::vector<SemanticAspect> out(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        out[i].name = order[i]->name;
        out[i].frequency = order[i]->frequency;
        if (!order[i]->abbreviation.empty()) {
            out[i].abbreviation = claim(order[i]->abbreviation);
        }
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (out[i].abbreviation.empty()) {
            out[i].abbreviation = claim(derive_abbreviation(order[i]->name));
        }
    }
    return out;
}

Selection select_top_k(std::span<const SemanticAspect> aspects, std::size_t k) {
    if (k == 0) {
        throw std::invalid_argument("select_top_k: K must be at least 1");
    }
    Selection s;
    s.aspects.assign(aspects.begin(), aspects.end());
    std::stable_sort(s.aspects.begin(), s.aspects.end(), [](const SemanticAspect& a, const SemanticAspect& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return normalize_name(a.name) < normalize_name(b.name);
    });
    if (k > s.aspects.size()) {
        s.warning = "requested K=" + std::to_string(k) + " but only " + std::to_string(s.aspects.size()) +
                    " aspects were discovered; using all of them";
    } else {
        s.aspects.resize(k);
    }
    return s;
}

ParsedDescriptions parse_descriptions(std::string_view response, std::span<const SemanticAspect> aspects) {
    ParsedDescriptions out;
    std::vector<std::string> body(aspects.size());
    std::vector<bool> found(aspects.size(), false);
    std::optional<std::size_t> current;
    for (std::string_view line : lines_of(response)) {
        const Marked m = strip_marker(line);
        const auto colon = m.rest.find(':');
        std::optional<std::size_t> heading;
        if (m.marker || colon != std::string::npos) {
            const std::string head = m.rest.substr(0, colon);
            if (const auto hit = resolve(head, aspects); hit && !found[*hit]) {
                heading = hit;
            }
        }
        if (heading) {
            current = heading;
            found[*heading] = true;
            if (colon != std::string::npos) {
                body[*heading] = std::string(trim(std::string_view(m.rest).substr(colon + 1)));
            }
            continue;
        }
        if (current) {
            std::string& b = body[*current];
            b += b.empty() ? "" : "\n";
            b += trim(line);
        }
    }
    for (std::size_t i = 0; i < aspects.size(); ++i) {
        std::string text(trim(body[i]));
        if (text.empty()) {
            out.missing.push_back(aspects[i].abbreviation);
        }
        out.text[aspects[i].abbreviation] = std::move(text);
    }
    return out;
}

std::optional<std::vector<std::string>> parse_ranking(std::string_view response,
                                                      std::span<const SemanticAspect> aspects) {
    const auto lines = lines_of(response);
    const auto split = [&](std::string_view line, char sep) {
        std::vector<std::optional<std::size_t>> picks;
        std::string_view rest = line;
        while (true) {
            const auto pos = rest.find(sep);
            picks.push_back(resolve(rest.substr(0, pos), aspects));
            if (pos == std::string_view::npos) break;
            rest.remove_prefix(pos + 1);
        }
        return picks;
    };
    const auto after_label = [](std::string_view line) {
        const auto colon = line.find(':');
        return colon == std::string_view::npos ? line : line.substr(colon + 1);
    };
    for (std::string_view line : lines) {
        if (line.find('>') != std::string_view::npos) {
            if (auto p = as_permutation(split(after_label(line), '>'), aspects)) return p;
        }
    }
    std::vector<std::optional<std::size_t>> listed;
    for (std::string_view line : lines) {
        const Marked m = strip_marker(line);
        if (m.marker) {
            listed.push_back(resolve(std::string_view(m.rest).substr(0, m.rest.find(':')), aspects));
        }
    }
    if (auto p = as_permutation(listed, aspects)) return p;
    for (std::string_view line : lines) {
        if (line.find(',') != std::string_view::npos) {
            if (auto p = as_permutation(split(after_label(line), ','), aspects)) return p;
        }
    }
    if (aspects.size() == 1 && lines.size() >= 1) {
        if (auto p = as_permutation({resolve(lines.front(), aspects)}, aspects)) return p;
    }
    return std::nullopt;
}

} // namespace lgsrr::llm
