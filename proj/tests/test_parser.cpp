#include <doctest.h>

#include "hybridgl/guidance.hpp"
#include "hybridgl/parser.hpp"

using namespace hybridgl;

TEST_SUITE("parser") {

TEST_CASE("relation with anchor") {
    const auto p = parse_expression("the pizza on the right of the man");
    CHECK(p.head_phrase == "the pizza");
    REQUIRE(p.relations.size() == 1);
    CHECK(p.relations[0] == Relation{RelationType::Right, "the man"});
    CHECK(p.position_cues.empty());
    CHECK(p.raw_text == "the pizza on the right of the man");
}

TEST_CASE("bare noun") {
    const auto p = parse_expression("dog");
    CHECK(p.head_phrase == "dog");
    CHECK(p.relations.empty());
    CHECK(p.position_cues.empty());
    CHECK(p.size_cue == SizeCue::None);
}

TEST_CASE("position and size cues") {
    const auto p = parse_expression("small cup on the left");
    CHECK(p.head_phrase == "small cup");
    CHECK(p.position_cues == std::set<PositionCue>{PositionCue::Left});
    CHECK(p.size_cue == SizeCue::Small);
    CHECK(p.relations.empty());
    CHECK(GuidanceConfig{}.lambda_for(p.size_cue) == 14.0);
    CHECK(GuidanceConfig{}.lambda_for(parse_expression("big dog").size_cue) == 3.0);
    CHECK(GuidanceConfig{}.lambda_for(SizeCue::None) == 9.0);
}

TEST_CASE("keyword followed by a noun phrase is a relation") {
    CHECK(parse_expression("the left dog").position_cues == std::set<PositionCue>{PositionCue::Left});
    CHECK(parse_expression("the left dog").relations.empty());
    const auto rel = parse_expression("the dog left of the man");
    REQUIRE(rel.relations.size() == 1);
    CHECK(rel.relations[0].type == RelationType::Left);
    CHECK(rel.relations[0].anchor_phrase == "the man");
    CHECK(rel.position_cues.empty());
}

TEST_CASE("prepositions") {
    auto p = parse_expression("the cat under the table");
    REQUIRE(p.relations.size() == 1);
    CHECK(p.relations[0] == Relation{RelationType::Bottom, "the table"});
    p = parse_expression("the cup in the box");
    REQUIRE(p.relations.size() == 1);
    CHECK(p.relations[0].type == RelationType::Within);
    p = parse_expression("the lamp above the bed");
    REQUIRE(p.relations.size() == 1);
    CHECK(p.relations[0].type == RelationType::Top);
}

TEST_CASE("comparatives need than") {
    auto p = parse_expression("the dog bigger than the cat");
    REQUIRE(p.relations.size() == 1);
    CHECK(p.relations[0] == Relation{RelationType::Bigger, "the cat"});
    p = parse_expression("the smaller dog");
    CHECK(p.relations.empty());
}

TEST_CASE("middle is a position cue only") {
    const auto p = parse_expression("the dog in the middle");
    CHECK(p.position_cues.count(PositionCue::Middle) == 1);
    CHECK(p.relations.empty());
}

TEST_CASE("keywords match whole words") {
    const auto p = parse_expression("lefty");
    CHECK(p.position_cues.empty());
    CHECK(p.relations.empty());
    CHECK(p.head_phrase == "lefty");
}

TEST_CASE("several cues") {
    const auto p = parse_expression("the top left circle");
    CHECK(p.position_cues == std::set<PositionCue>{PositionCue::Top, PositionCue::Left});
}

TEST_CASE("blank text") {
    CHECK_THROWS_AS(parse_expression(""), Error);
    CHECK_THROWS_AS(parse_expression("   "), Error);
}

TEST_CASE("names round trip") {
    for (auto r : {RelationType::Left, RelationType::Right, RelationType::Top, RelationType::Bottom,
                   RelationType::Within, RelationType::Smaller, RelationType::Bigger}) {
        CHECK(relation_from_string(to_string(r)) == r);
    }
    for (auto c : {PositionCue::Top, PositionCue::Bottom, PositionCue::Left, PositionCue::Right, PositionCue::Middle}) {
        CHECK(position_from_string(to_string(c)) == c);
    }
    CHECK_THROWS_AS(relation_from_string("beside"), Error);
    CHECK_THROWS_AS(position_from_string("far"), Error);
}

TEST_CASE("json form") {
    const auto j = to_json(parse_expression("the pizza on the right of the man"));
    CHECK(j.at("head_phrase") == "the pizza");
    CHECK(j.at("relations").size() == 1);
}

}
