// parser.hpp
//
// Referring-expression decomposition: head phrase, (relation, anchor) pairs,
// position cues and a size cue.

#pragma once

#include <json.hpp>

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hybridgl {

enum class RelationType { Left, Right, Top, Bottom, Within, Smaller, Bigger };
enum class PositionCue { Top, Bottom, Left, Right, Middle };
enum class SizeCue { None, Big, Small };

std::string to_string(RelationType r);
std::string to_string(PositionCue p);
std::string to_string(SizeCue s);
/// Throw Error on unknown names.
RelationType relation_from_string(std::string_view s);
PositionCue position_from_string(std::string_view s);

struct Relation {
    RelationType type;
    std::string anchor_phrase;

    bool operator==(const Relation&) const = default;
};

struct ParsedExpression {
    std::string head_phrase;
    std::vector<Relation> relations;
    std::set<PositionCue> position_cues;
    SizeCue size_cue = SizeCue::None;
    std::string raw_text;

    bool operator==(const ParsedExpression&) const = default;
};

/// Parser seam, so a dependency-parse backend can replace the rule set.
class ExpressionParser {
public:
    virtual ~ExpressionParser() = default;
    virtual ParsedExpression parse(std::string_view text) const = 0;
};

/// Lexicon- and preposition-pattern parser. A directional word followed by
/// of/to/from and a noun phrase is a relation; otherwise it is a position
/// cue. Prepositions (above, below, under, in, inside, within, ...) followed
/// by a noun phrase are relations. Comparatives need "than".
class RuleBasedParser final : public ExpressionParser {
public:
    ParsedExpression parse(std::string_view text) const override;
};

/// Rule-based parse; throws Error on empty/blank text.
ParsedExpression parse_expression(std::string_view text);

nlohmann::json to_json(const ParsedExpression& parsed);

}  // namespace hybridgl
