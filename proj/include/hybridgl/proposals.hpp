// proposals.hpp
//
// Mask proposal ingestion: cached proposal files, an optional live provider,
// and the quality gates applied to both.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hybridgl/core.hpp"

namespace hybridgl {

struct ProposalGenConfig {
    double predicted_iou_threshold = 0.7;
    double stability_score_threshold = 0.7;
    int points_per_side = 8;

    void validate() const;
};

struct ProposalSet {
    std::string image_id;
    int height = 0;
    int width = 0;
    std::vector<MaskProposal> proposals;
};

/// Live proposal generator. Implementations need not be reentrant.
class ProposalProvider {
public:
    virtual ~ProposalProvider() = default;
    virtual std::vector<MaskProposal> generate(const ImageData& image,
                                               const ProposalGenConfig& config) = 0;
};

/// Keeps proposals passing both inclusive thresholds with a non-empty mask,
/// drops exact duplicates (keeping the higher predicted IoU), then applies
/// the canonical ordering.
std::vector<MaskProposal> filter(std::vector<MaskProposal> proposals,
                                 const ProposalGenConfig& config);

/// `<image_id>.proposals.json`
std::filesystem::path proposal_cache_path(const std::filesystem::path& dir,
                                          const std::string& image_id);

/// Reads a cache file without filtering. A zero-byte file yields an empty set.
ProposalSet read_proposal_cache(const std::filesystem::path& path);
void write_proposal_cache(const std::filesystem::path& path, const ProposalSet& set);

/// Where proposals come from: a cache file, a live provider, or both
/// (the cache wins when it exists).
struct ProposalSource {
    std::optional<std::filesystem::path> cache_path;
    ProposalProvider* provider = nullptr;
};

ProposalSet load_or_generate(const ImageData& image, const std::string& image_id,
                             const ProposalSource& source, const ProposalGenConfig& config);

/// Stand-in live generator: flood-fills colour-homogeneous regions from a
/// points_per_side x points_per_side seed grid. predicted_iou is the IoU of
/// the region grown at tolerance and at half tolerance; stability_score is
/// the IoU between the regions at tolerance +/- delta (as in SAM's
/// stability score, with colour distance in place of logits).
class FloodFillProposer : public ProposalProvider {
public:
    explicit FloodFillProposer(int tolerance = 24, int delta = 8)
        : tolerance_(tolerance), delta_(delta) {}

    std::vector<MaskProposal> generate(const ImageData& image,
                                       const ProposalGenConfig& config) override;

private:
    int tolerance_;
    int delta_;
};

}  // namespace hybridgl
