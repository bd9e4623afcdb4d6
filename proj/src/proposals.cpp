#include "hybridgl/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "hybridgl/json_io.hpp"

namespace hybridgl {

void ProposalGenConfig::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(predicted_iou_threshold)) throw Error("predicted_iou_threshold must be in [0,1]");
    if (!in_unit(stability_score_threshold)) {
        throw Error("stability_score_threshold must be in [0,1]");
    }
    if (points_per_side < 1) throw Error("points_per_side must be >= 1");
}

std::vector<MaskProposal> filter(std::vector<MaskProposal> proposals,
                                 const ProposalGenConfig& config) {
    std::vector<MaskProposal> kept;
    for (auto& p : proposals) {
        if (p.predicted_iou < config.predicted_iou_threshold) continue;
        if (p.stability_score < config.stability_score_threshold) continue;
        if (p.mask.empty_mask()) continue;
        kept.push_back(std::move(p));
    }
    // Canonical order puts duplicates next to each other with the best
    // predicted_iou first, so dedup is a single pass.
    canonical_order(kept);
    std::vector<MaskProposal> unique;
    for (auto& p : kept) {
        if (!unique.empty() && unique.back().mask == p.mask) continue;
        unique.push_back(std::move(p));
    }
    for (size_t i = 0; i < unique.size(); ++i) unique[i].index = static_cast<int>(i);
    return unique;
}

std::filesystem::path proposal_cache_path(const std::filesystem::path& dir,
                                          const std::string& image_id) {
    return dir / (image_id + ".proposals.json");
}

ProposalSet read_proposal_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open proposal cache: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    ProposalSet set;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        set.image_id = path.filename().string();
        if (auto pos = set.image_id.find(".proposals.json"); pos != std::string::npos) {
            set.image_id.resize(pos);
        }
        return set;
    }
    try {
        const auto j = nlohmann::json::parse(text);
        set.image_id = j.at("image_id").get<std::string>();
        set.height = j.at("height").get<int>();
        set.width = j.at("width").get<int>();
        const auto& arr = j.at("proposals");
        for (size_t i = 0; i < arr.size(); ++i) {
            const auto& e = arr[i];
            MaskProposal p;
            p.mask = mask_from_json(e.at("rle"));
            p.predicted_iou = e.at("predicted_iou").get<double>();
            p.stability_score = e.at("stability_score").get<double>();
            p.index = static_cast<int>(i);
            set.proposals.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed proposal cache " + path.string() + ": " + e.what());
    }
    return set;
}

void write_proposal_cache(const std::filesystem::path& path, const ProposalSet& set) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : set.proposals) {
        arr.push_back({{"rle", mask_to_json(p.mask)},
                       {"predicted_iou", p.predicted_iou},
                       {"stability_score", p.stability_score}});
    }
    nlohmann::json j{{"image_id", set.image_id},
                     {"height", set.height},
                     {"width", set.width},
                     {"proposals", std::move(arr)}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write proposal cache: " + path.string());
    out << j.dump() << "\n";
}

ProposalSet load_or_generate(const ImageData& image, const std::string& image_id,
                             const ProposalSource& source, const ProposalGenConfig& config) {
    config.validate();
    ProposalSet set;
    if (source.cache_path && std::filesystem::exists(*source.cache_path)) {
        set = read_proposal_cache(*source.cache_path);
    } else if (source.provider) {
        set.proposals = source.provider->generate(image, config);
    } else {
        throw Error("no proposal cache for '" + image_id + "' and no live provider");
    }
    set.image_id = image_id;
    set.height = image.height();
    set.width = image.width();
    for (size_t i = 0; i < set.proposals.size(); ++i) {
        const auto& m = set.proposals[i].mask;
        if (m.height() != image.height() || m.width() != image.width()) {
            throw Error("proposal " + std::to_string(i) + " of '" + image_id + "' has shape " +
                        std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                        ", image is " + std::to_string(image.height()) + "x" +
                        std::to_string(image.width()));
        }
    }
    set.proposals = filter(std::move(set.proposals), config);
    return set;
}

// ---------------------------------------------------------------------------
// FloodFillProposer
// ---------------------------------------------------------------------------

namespace {

BinaryMask grow_region(const ImageData& image, int sy, int sx, int tolerance) {
    BinaryMask mask(image.height(), image.width());
    const int r0 = image.at(sy, sx, 0), g0 = image.at(sy, sx, 1), b0 = image.at(sy, sx, 2);
    std::vector<std::pair<int, int>> stack{{sy, sx}};
    mask.set(sy, sx, true);
    while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        constexpr int dy[4] = {-1, 1, 0, 0};
        constexpr int dx[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int ny = y + dy[k], nx = x + dx[k];
            if (ny < 0 || nx < 0 || ny >= image.height() || nx >= image.width()) continue;
            if (mask.at(ny, nx)) continue;
            const int d = std::max({std::abs(image.at(ny, nx, 0) - r0),
                                    std::abs(image.at(ny, nx, 1) - g0),
                                    std::abs(image.at(ny, nx, 2) - b0)});
            if (d > tolerance) continue;
            mask.set(ny, nx, true);
            stack.emplace_back(ny, nx);
        }
    }
    return mask;
}

}  // namespace

std::vector<MaskProposal> FloodFillProposer::generate(const ImageData& image,
                                                      const ProposalGenConfig& config) {
    config.validate();
    std::vector<MaskProposal> out;
    const int n = config.points_per_side;
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const int sy = static_cast<int>((iy + 0.5) * image.height() / n);
            const int sx = static_cast<int>((ix + 0.5) * image.width() / n);
            MaskProposal p;
            p.mask = grow_region(image, sy, sx, tolerance_);
            const auto tight = grow_region(image, sy, sx, std::max(0, tolerance_ - delta_));
            const auto loose = grow_region(image, sy, sx, tolerance_ + delta_);
            const auto half = grow_region(image, sy, sx, tolerance_ / 2);
            p.stability_score = mask_iou(tight, loose);
            p.predicted_iou = mask_iou(half, p.mask);
            out.push_back(std::move(p));
        }
    }
    return out;
}

}  // namespace hybridgl
