// guidance.hpp
//
// Spatial guidance: the binary relation test between two masks, relational
// semantic scores, coherence/position guidance maps and their product, the
// per-mask spatial score, and the final semantic/spatial fusion.

#pragma once

#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "hybridgl/core.hpp"
#include "hybridgl/encoder.hpp"
#include "hybridgl/parser.hpp"

namespace hybridgl {

enum class GuidanceKind { Coherence, Position, Combined };

/// Unnormalized real-valued map, row-major.
struct RealMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

/// H x W map with entries in [0, 1].
struct GuidanceMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;
    GuidanceKind kind = GuidanceKind::Combined;

    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    static GuidanceMap filled(int height, int width, double v, GuidanceKind kind);
};

struct GuidanceConfig {
    double alpha = 0.6;
    double lambda = 9.0;
    double lambda_big = 3.0;
    double lambda_small = 14.0;
    int top_k = 5;
    double within_containment = 0.9;
    double temperature = 1.0;

    double lambda_for(SizeCue cue) const;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

/// Geometry a relation test needs, precomputed once per mask.
struct MaskGeometry {
    BoundingBox box;
    Point2 center;
    size_t area = 0;

    static MaskGeometry of(const BinaryMask& mask);
};

/// 1 when `subject` stands in `rel` to `anchor`, else 0. Directional
/// relations compare bbox centers, `within` uses containment of the
/// subject, smaller/bigger compare areas strictly.
int relation_holds(RelationType rel, const BinaryMask& subject, const BinaryMask& anchor,
                   const GuidanceConfig& config = {});

/// Same test from precomputed geometry; `intersection` = |subject & anchor|.
int relation_holds(RelationType rel, const MaskGeometry& subject, const MaskGeometry& anchor,
                   size_t intersection, double within_containment);

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

/// Max-subtracted softmax.
std::vector<double> softmax(const std::vector<double>& scores, double temperature = 1.0);

/// Softmax over the k highest scores (ties to the lower index); others get 0.
std::vector<double> topk_softmax(const std::vector<double>& scores, int k,
                                 double temperature = 1.0);

/// One relation's contribution: relation[i][j] = R(i, j), anchor = P(q, .).
struct RelationTerm {
    std::vector<std::vector<int>> relation;
    std::vector<double> anchor_probs;
};

/// S_i = sum over terms, sum_j P(p, i) R(i, j) P(q, j).
std::vector<double> combine_relational(const std::vector<double>& head_probs,
                                       const std::vector<RelationTerm>& terms);

/// Relational semantic scores for a parsed expression with >= 1 relation.
std::vector<double> relational_semantic_scores(const std::vector<MaskProposal>& proposals,
                                               const ParsedExpression& parsed,
                                               const std::vector<FeatureVector>& features,
                                               const TextEncoder& text_encoder,
                                               const GuidanceConfig& config);

// ---------------------------------------------------------------------------
// Guidance maps
// ---------------------------------------------------------------------------

/// Text-conditioned localization behind an interface; any output resolution.
class LocalizationProvider {
public:
    virtual ~LocalizationProvider() = default;
    virtual RealMap locate(const ImageData& image, std::string_view text) const = 0;
    virtual bool reentrant() const { return false; }
};

enum class Upsampling { Nearest, Bilinear };

/// Upsamples `raw` to height x width and min-max normalizes; a constant map
/// becomes all 0.5.
GuidanceMap normalize_coherence(const RealMap& raw, int height, int width,
                                Upsampling mode = Upsampling::Nearest);

GuidanceMap coherence_map(const ImageData& image, std::string_view text,
                          const LocalizationProvider& provider,
                          Upsampling mode = Upsampling::Nearest);

/// Linear-gradient prior for one cue, or all-ones when `cue` is empty.
GuidanceMap position_map(std::optional<PositionCue> cue, int height, int width);

/// coherence * prod(position_map(cue)).
GuidanceMap compose_guidance(const GuidanceMap& coherence, const std::set<PositionCue>& cues);

/// mean(G | mask) - lambda * mean(G | ~mask); second term is 0 if ~mask is empty.
double spatial_score(const GuidanceMap& guidance, const BinaryMask& mask, double lambda);

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

struct ScoreRow {
    int index = 0;
    double semantic_raw = 0.0;
    double semantic_norm = 0.0;
    double spatial_raw = 0.0;
    double spatial_norm = 0.0;
    double final_score = 0.0;
};

struct ScoreTable {
    std::vector<ScoreRow> rows;
    int winner_index = -1;
};

/// Softmax both columns, final = (1 - alpha) S^s + alpha S^g, argmax with
/// the lowest index winning ties.
ScoreTable fuse_scores(const std::vector<double>& semantic, const std::vector<double>& spatial,
                       double alpha, double temperature = 1.0);

/// Index of the maximum, lowest index on ties.
int argmax(const std::vector<double>& values);

}  // namespace hybridgl
