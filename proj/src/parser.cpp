#include "hybridgl/parser.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>

#include "hybridgl/core.hpp"

namespace hybridgl {

std::string to_string(RelationType r) {
    switch (r) {
        case RelationType::Left: return "left";
        case RelationType::Right: return "right";
        case RelationType::Top: return "top";
        case RelationType::Bottom: return "bottom";
        case RelationType::Within: return "within";
        case RelationType::Smaller: return "smaller";
        case RelationType::Bigger: return "bigger";
    }
    throw Error("unknown relation");
}

std::string to_string(PositionCue p) {
    switch (p) {
        case PositionCue::Top: return "top";
        case PositionCue::Bottom: return "bottom";
        case PositionCue::Left: return "left";
        case PositionCue::Right: return "right";
        case PositionCue::Middle: return "middle";
    }
    throw Error("unknown position cue");
}

std::string to_string(SizeCue s) {
    switch (s) {
        case SizeCue::None: return "none";
        case SizeCue::Big: return "big";
        case SizeCue::Small: return "small";
    }
    throw Error("unknown size cue");
}

RelationType relation_from_string(std::string_view s) {
    static const std::map<std::string_view, RelationType> names{
        {"left", RelationType::Left},       {"right", RelationType::Right},
        {"top", RelationType::Top},         {"bottom", RelationType::Bottom},
        {"within", RelationType::Within},   {"smaller", RelationType::Smaller},
        {"bigger", RelationType::Bigger}};
    if (auto it = names.find(s); it != names.end()) return it->second;
    throw Error("unknown relation: " + std::string(s));
}

PositionCue position_from_string(std::string_view s) {
    static const std::map<std::string_view, PositionCue> names{
        {"top", PositionCue::Top},   {"bottom", PositionCue::Bottom}, {"left", PositionCue::Left},
        {"right", PositionCue::Right}, {"middle", PositionCue::Middle}};
    if (auto it = names.find(s); it != names.end()) return it->second;
    throw Error("unknown position cue: " + std::string(s));
}

namespace {

struct Word {
    std::string text;   // as written
    std::string lower;
};

std::vector<Word> tokenize(std::string_view text) {
    std::vector<Word> words;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        Word w{cur, cur};
        std::transform(w.lower.begin(), w.lower.end(), w.lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        words.push_back(std::move(w));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || ch == '\'' || ch == '-') {
            cur.push_back(ch);
        } else {
            flush();
        }
    }
    flush();
    return words;
}

// Directional words: relation when followed by of/to/from + NP, else a cue.
const std::map<std::string, PositionCue>& directional() {
    static const std::map<std::string, PositionCue> m{
        {"left", PositionCue::Left},     {"leftmost", PositionCue::Left},
        {"right", PositionCue::Right},   {"rightmost", PositionCue::Right},
        {"top", PositionCue::Top},       {"upper", PositionCue::Top},
        {"topmost", PositionCue::Top},   {"bottom", PositionCue::Bottom},
        {"lower", PositionCue::Bottom},  {"bottommost", PositionCue::Bottom}};
    return m;
}

const std::set<std::string>& middle_words() {
    static const std::set<std::string> s{"middle", "center", "centre", "central"};
    return s;
}

// Prepositions that relate directly to a following NP.
const std::map<std::string, RelationType>& prepositional() {
    static const std::map<std::string, RelationType> m{
        {"above", RelationType::Top},       {"over", RelationType::Top},
        {"below", RelationType::Bottom},    {"under", RelationType::Bottom},
        {"beneath", RelationType::Bottom},  {"underneath", RelationType::Bottom},
        {"in", RelationType::Within},       {"inside", RelationType::Within},
        {"within", RelationType::Within}};
    return m;
}

const std::map<std::string, PositionCue>& prepositional_cue() {
    static const std::map<std::string, PositionCue> m{
        {"above", PositionCue::Top},        {"over", PositionCue::Top},
        {"below", PositionCue::Bottom},     {"under", PositionCue::Bottom},
        {"beneath", PositionCue::Bottom},   {"underneath", PositionCue::Bottom}};
    return m;
}

const std::map<std::string, RelationType>& comparatives() {
    static const std::map<std::string, RelationType> m{
        {"smaller", RelationType::Smaller}, {"bigger", RelationType::Bigger},
        {"larger", RelationType::Bigger}};
    return m;
}

const std::map<std::string, SizeCue>& size_words() {
    static const std::map<std::string, SizeCue> m{
        {"big", SizeCue::Big},       {"large", SizeCue::Big},     {"huge", SizeCue::Big},
        {"biggest", SizeCue::Big},   {"largest", SizeCue::Big},   {"bigger", SizeCue::Big},
        {"larger", SizeCue::Big},    {"small", SizeCue::Small},   {"tiny", SizeCue::Small},
        {"little", SizeCue::Small},  {"smallest", SizeCue::Small}, {"smaller", SizeCue::Small}};
    return m;
}

const std::set<std::string>& stop_words() {
    static const std::set<std::string> s{
        "on",   "at",     "to",     "of",    "in",         "inside", "within", "near",
        "next", "from",   "above",  "below", "under",      "beneath", "underneath", "over",
        "behind", "with", "that",   "which", "who",        "and",    "than",   "by",
        "beside", "between", "whose", "while"};
    return s;
}

const std::set<std::string>& leading_preps() {
    static const std::set<std::string> s{"on", "to", "at", "in", "towards", "toward"};
    return s;
}

const std::set<std::string>& image_words() {
    static const std::set<std::string> s{"image", "picture", "photo", "frame", "screen", "pic"};
    return s;
}

bool is_determiner(const std::string& w) { return w == "the" || w == "a" || w == "an"; }

std::string join(const std::vector<Word>& words, size_t begin, size_t end) {
    std::string out;
    for (size_t i = begin; i < end; ++i) {
        if (!out.empty()) out.push_back(' ');
        out += words[i].text;
    }
    return out;
}

// Noun phrase starting at `begin`: runs until a stop word or a directional
// word that itself opens a relation. Returns the end index.
size_t noun_phrase_end(const std::vector<Word>& w, size_t begin) {
    size_t i = begin;
    while (i < w.size()) {
        const auto& lw = w[i].lower;
        if (stop_words().count(lw)) break;
        if (directional().count(lw) && i + 1 < w.size() &&
            (w[i + 1].lower == "of" || w[i + 1].lower == "to" || w[i + 1].lower == "from")) {
            break;
        }
        ++i;
    }
    return i;
}

bool np_has_content(const std::vector<Word>& w, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
        if (!is_determiner(w[i].lower)) return true;
    }
    return false;
}

bool np_is_image(const std::vector<Word>& w, size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
        if (image_words().count(w[i].lower)) return true;
    }
    return false;
}

// Start of a phrase ending at `i`, extended back over "(prep) (the)".
size_t phrase_start(const std::vector<Word>& w, size_t i) {
    size_t s = i;
    if (s > 0 && is_determiner(w[s - 1].lower)) --s;
    if (s > 0 && leading_preps().count(w[s - 1].lower)) --s;
    return s;
}

bool preceded_by_preposition(const std::vector<Word>& w, size_t i) {
    size_t s = i;
    if (s > 0 && is_determiner(w[s - 1].lower)) --s;
    return s > 0 && leading_preps().count(w[s - 1].lower);
}

}  // namespace

ParsedExpression RuleBasedParser::parse(std::string_view text) const {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) throw Error("empty text");
    const auto last = text.find_last_not_of(" \t\r\n");

    ParsedExpression out;
    out.raw_text = std::string(text.substr(first, last - first + 1));
    const auto w = tokenize(out.raw_text);

    std::optional<size_t> head_end;
    auto cut = [&](size_t at) {
        if (!head_end) head_end = at;
    };

    size_t i = 0;
    while (i < w.size()) {
        const auto& lw = w[i].lower;

        if (auto d = directional().find(lw); d != directional().end()) {
            const bool linked = i + 1 < w.size() &&
                                (w[i + 1].lower == "of" || w[i + 1].lower == "to" ||
                                 w[i + 1].lower == "from");
            if (linked) {
                const size_t np_begin = i + 2;
                const size_t np_end = noun_phrase_end(w, np_begin);
                if (np_has_content(w, np_begin, np_end)) {
                    cut(phrase_start(w, i));
                    if (np_is_image(w, np_begin, np_end)) {
                        out.position_cues.insert(d->second);
                    } else {
                        out.relations.push_back(
                            {relation_from_string(to_string(d->second)), join(w, np_begin, np_end)});
                    }
                    i = np_end;
                    continue;
                }
            }
            out.position_cues.insert(d->second);
            if (preceded_by_preposition(w, i)) cut(phrase_start(w, i));
            ++i;
            continue;
        }

        if (middle_words().count(lw)) {
            out.position_cues.insert(PositionCue::Middle);
            if (preceded_by_preposition(w, i)) cut(phrase_start(w, i));
            ++i;
            continue;
        }

        if (auto p = prepositional().find(lw); p != prepositional().end()) {
            size_t np_begin = i + 1;
            while (np_begin < w.size() && is_determiner(w[np_begin].lower)) ++np_begin;
            const bool opens_cue =
                np_begin < w.size() && (directional().count(w[np_begin].lower) ||
                                        middle_words().count(w[np_begin].lower) ||
                                        w[np_begin].lower == "front" || w[np_begin].lower == "back");
            if (!opens_cue) {
                const size_t np_end = noun_phrase_end(w, i + 1);
                if (np_has_content(w, i + 1, np_end) && !np_is_image(w, i + 1, np_end)) {
                    cut(i);
                    out.relations.push_back({p->second, join(w, i + 1, np_end)});
                    i = np_end;
                    continue;
                }
                if (auto c = prepositional_cue().find(lw); c != prepositional_cue().end()) {
                    // "the shelf above", "above in the picture"
                    out.position_cues.insert(c->second);
                    cut(i);
                    i = np_end > i + 1 ? np_end : i + 1;
                    continue;
                }
                if (np_is_image(w, i + 1, np_end)) {
                    cut(i);
                    i = np_end;
                    continue;
                }
            }
            ++i;
            continue;
        }

        if (auto c = comparatives().find(lw); c != comparatives().end()) {
            if (i + 1 < w.size() && w[i + 1].lower == "than") {
                const size_t np_begin = i + 2;
                const size_t np_end = noun_phrase_end(w, np_begin);
                if (np_has_content(w, np_begin, np_end)) {
                    cut(i);
                    out.relations.push_back({c->second, join(w, np_begin, np_end)});
                    i = np_end;
                    continue;
                }
            }
        }

        if (auto s = size_words().find(lw); s != size_words().end()) {
            if (out.size_cue == SizeCue::None) out.size_cue = s->second;
        }
        ++i;
    }

    const size_t end = head_end.value_or(w.size());
    out.head_phrase = np_has_content(w, 0, end) ? join(w, 0, end) : out.raw_text;
    return out;
}

ParsedExpression parse_expression(std::string_view text) { return RuleBasedParser{}.parse(text); }

nlohmann::json to_json(const ParsedExpression& parsed) {
    nlohmann::json rels = nlohmann::json::array();
    for (const auto& r : parsed.relations) {
        rels.push_back({{"relation", to_string(r.type)}, {"anchor", r.anchor_phrase}});
    }
    nlohmann::json cues = nlohmann::json::array();
    for (auto c : parsed.position_cues) cues.push_back(to_string(c));
    return {{"head_phrase", parsed.head_phrase},
            {"relations", std::move(rels)},
            {"position_cues", std::move(cues)},
            {"size_cue", to_string(parsed.size_cue)},
            {"raw_text", parsed.raw_text}};
}

}  // namespace hybridgl
