// pipeline.hpp
//
// End-to-end segmentation of one (image, expression) pair over a set of mask
// proposals, and dataset evaluation with oIoU / mIoU.

#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hybridgl/core.hpp"
#include "hybridgl/encoder.hpp"
#include "hybridgl/guidance.hpp"
#include "hybridgl/parser.hpp"
#include "hybridgl/proposals.hpp"

namespace hybridgl {

/// Thrown by segment() when no proposal is left to choose from.
class NoProposalsError : public Error {
public:
    explicit NoProposalsError(const std::string& image_id)
        : Error("no proposals for image '" + image_id + "'"), image_id_(image_id) {}
    const std::string& image_id() const { return image_id_; }

private:
    std::string image_id_;
};

struct Ablations {
    bool no_relations = false;  // always score with plain cosine
    bool no_position = false;   // drop position cues from the guidance
    bool no_coherence = false;  // coherence map replaced by all ones

    bool any() const { return no_relations || no_position || no_coherence; }
    /// Sorted flag names, e.g. {"no-position", "no-relations"}.
    std::vector<std::string> names() const;
    /// Accepts "no-relations", "no-position", "no-coherence".
    void set(std::string_view name);
    bool operator==(const Ablations&) const = default;
};

struct PipelineConfig {
    HybridConfig hybrid;
    GuidanceConfig guidance;
    Ablations ablations;
    Upsampling coherence_upsampling = Upsampling::Nearest;
    /// On a localization failure, use an all-ones coherence map and record
    /// a warning instead of failing the sample.
    bool coherence_fallback = false;
    /// Prompt template for every phrase sent to the text encoder.
    std::string text_template = "{}";
};

std::string to_string(Upsampling mode);
Upsampling upsampling_from_string(std::string_view s);
nlohmann::json to_json(const PipelineConfig& config);

/// Everything segment() calls out to. `localizer` may be null, in which
/// case the coherence map is all ones.
struct Components {
    const LayeredEncoder& encoder;
    const TextEncoder& text;
    const LocalizationProvider* localizer = nullptr;
    const ExpressionParser& parser;
};

struct SegmentResult {
    BinaryMask winner;
    ScoreTable table;
    ParsedExpression parsed;
    bool relational = false;  // scores came from the relational path
    double lambda = 0.0;
    std::vector<std::string> warnings;
};

SegmentResult segment(const ImageData& image, std::string_view expression,
                      const std::vector<MaskProposal>& proposals, const Components& components,
                      const PipelineConfig& config, const std::string& image_id = "image");

nlohmann::json to_json(const SegmentResult& result);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct Sample {
    std::string image_id;
    std::filesystem::path image_path;
    std::optional<ImageData> image;  // used instead of image_path when set
    std::string expression;
    BinaryMask gt_mask;

    ImageData load_image() const;
};

/// One sample per line: {"image_id", "image_path", "expression", "gt_rle"}.
/// Relative image paths are resolved against the file's directory.
std::vector<Sample> load_dataset(const std::filesystem::path& jsonl);
void write_dataset(const std::filesystem::path& jsonl, const std::vector<Sample>& samples);

/// Per-image proposals: `<cache_dir>/<image_id>.proposals.json` when present,
/// else the live provider.
struct ProposalLookup {
    std::optional<std::filesystem::path> cache_dir;
    ProposalProvider* provider = nullptr;
    ProposalGenConfig config;
};

struct SampleResult {
    std::string image_id;
    std::string expression;
    size_t intersection = 0;
    size_t union_area = 0;
    double iou = 0.0;
    int winner_index = -1;
    bool exact = false;  // winner mask equals the ground truth
    std::optional<std::string> error;
};

struct EvalReport {
    double oiou = 0.0;
    double miou = 0.0;
    double accuracy = 0.0;
    size_t total_intersection = 0;
    size_t total_union = 0;
    size_t failures = 0;
    std::vector<SampleResult> samples;  // sorted by (image_id, expression)
    nlohmann::json config;
    Ablations ablations;
};

/// Folds per-sample results into a report; independent of input order.
EvalReport aggregate(std::vector<SampleResult> results);

/// Scores every sample; failures get IoU 0 and an error note. `workers`
/// threads share the work; the report does not depend on it.
EvalReport evaluate(const std::vector<Sample>& dataset, const ProposalLookup& proposals,
                    const Components& components, const PipelineConfig& config, int workers = 1);

nlohmann::json to_json(const EvalReport& report);
/// Aligned-column summary plus one row per sample.
std::string format_table(const EvalReport& report);

}  // namespace hybridgl
