// scenes.hpp
//
// Seeded synthetic referring scenes: a few coloured shapes on a dark
// background, an expression that singles out exactly one of them, and a
// proposal set made of the exact shape masks plus distractors.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hybridgl/core.hpp"
#include "hybridgl/parser.hpp"
#include "hybridgl/pipeline.hpp"
#include "hybridgl/proposals.hpp"

namespace hybridgl {

enum class ShapeKind { Circle, Square, Triangle };

std::string to_string(ShapeKind k);

struct SceneShape {
    ShapeKind kind;
    BoundingBox box;  // inclusive pixel box the shape is drawn in
    BinaryMask mask;
};

enum class SceneKind { Position, Relation };

struct SyntheticScene {
    std::string image_id;
    SceneKind kind = SceneKind::Position;
    ImageData image;
    std::vector<SceneShape> shapes;
    std::string expression;
    int target = 0;  // index into shapes
};

struct SceneBundle {
    SyntheticScene scene;
    Sample sample;
    ProposalSet proposals;
};

inline constexpr int kSceneSide = 64;
inline constexpr int kSceneCell = 16;

std::vector<SceneBundle> generate_scenes(int count, std::uint64_t seed);

/// Indices of shapes satisfying every cue and relation of `parsed`, decided
/// from the shapes' geometry alone.
std::vector<int> satisfying_shapes(const SyntheticScene& scene, const ParsedExpression& parsed);

/// Writes `images/<id>.png`, `proposals/<id>.proposals.json` and
/// `dataset.jsonl` under `dir`. Sample image paths are updated to match.
void write_scenes(const std::filesystem::path& dir, std::vector<SceneBundle>& bundles);

}  // namespace hybridgl
