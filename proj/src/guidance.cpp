#include "hybridgl/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hybridgl {

GuidanceMap GuidanceMap::filled(int height, int width, double v, GuidanceKind kind) {
    return GuidanceMap{height, width,
                       std::vector<double>(static_cast<size_t>(height) * width, v), kind};
}

double GuidanceConfig::lambda_for(SizeCue cue) const {
    switch (cue) {
        case SizeCue::Big: return lambda_big;
        case SizeCue::Small: return lambda_small;
        case SizeCue::None: break;
    }
    return lambda;
}

void GuidanceConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must be in [0,1]");
    if (!(lambda >= 0.0 && lambda_big >= 0.0 && lambda_small >= 0.0)) {
        throw Error("lambda values must be >= 0");
    }
    if (top_k < 1) throw Error("top_k must be >= 1");
    if (!(within_containment > 0.0 && within_containment <= 1.0)) {
        throw Error("within_containment must be in (0,1]");
    }
    if (!(temperature > 0.0)) throw Error("temperature must be > 0");
}

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

MaskGeometry MaskGeometry::of(const BinaryMask& mask) {
    const auto bc = bbox_and_center(mask);
    return MaskGeometry{bc.box, bc.center, mask.area()};
}

int relation_holds(RelationType rel, const MaskGeometry& s, const MaskGeometry& a,
                   size_t intersection, double within_containment) {
    switch (rel) {
        case RelationType::Left: return s.center.x < a.center.x ? 1 : 0;
        case RelationType::Right: return s.center.x > a.center.x ? 1 : 0;
        case RelationType::Top: return s.center.y < a.center.y ? 1 : 0;
        case RelationType::Bottom: return s.center.y > a.center.y ? 1 : 0;
        case RelationType::Within:
            if (s.area == 0) return 0;
            return static_cast<double>(intersection) / static_cast<double>(s.area) >=
                           within_containment
                       ? 1
                       : 0;
        case RelationType::Smaller: return s.area < a.area ? 1 : 0;
        case RelationType::Bigger: return s.area > a.area ? 1 : 0;
    }
    throw Error("unknown relation");
}

int relation_holds(RelationType rel, const BinaryMask& subject, const BinaryMask& anchor,
                   const GuidanceConfig& config) {
    if (!subject.same_shape(anchor)) throw Error("mask shape mismatch");
    const auto s = MaskGeometry::of(subject);
    const auto a = MaskGeometry::of(anchor);
    const size_t inter = rel == RelationType::Within ? intersection_area(subject, anchor) : 0;
    return relation_holds(rel, s, a, inter, config.within_containment);
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

std::vector<double> softmax(const std::vector<double>& scores, double temperature) {
    if (scores.empty()) return {};
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - mx) / temperature);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

std::vector<double> topk_softmax(const std::vector<double>& scores, int k, double temperature) {
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    const size_t keep = std::min(order.size(), static_cast<size_t>(std::max(k, 0)));
    std::vector<double> top;
    for (size_t i = 0; i < keep; ++i) top.push_back(scores[order[i]]);
    const auto probs = softmax(top, temperature);
    std::vector<double> out(scores.size(), 0.0);
    for (size_t i = 0; i < keep; ++i) out[order[i]] = probs[i];
    return out;
}

std::vector<double> combine_relational(const std::vector<double>& head_probs,
                                       const std::vector<RelationTerm>& terms) {
    const size_t n = head_probs.size();
    std::vector<double> out(n, 0.0);
    for (const auto& t : terms) {
        if (t.relation.size() != n || t.anchor_probs.size() != n) {
            throw Error("relation term size mismatch");
        }
        for (size_t i = 0; i < n; ++i) {
            if (head_probs[i] == 0.0) continue;
            double acc = 0.0;
            for (size_t j = 0; j < n; ++j) acc += t.relation[i][j] * t.anchor_probs[j];
            out[i] += head_probs[i] * acc;
        }
    }
    return out;
}

std::vector<double> relational_semantic_scores(const std::vector<MaskProposal>& proposals,
                                               const ParsedExpression& parsed,
                                               const std::vector<FeatureVector>& features,
                                               const TextEncoder& text_encoder,
                                               const GuidanceConfig& config) {
    const size_t n = proposals.size();
    if (n < 1) throw Error("relational scoring needs at least one proposal");
    if (features.size() != n) throw Error("feature count does not match proposals");

    auto phrase_probs = [&](const std::string& phrase) {
        const auto f = encode_text(phrase, text_encoder);
        return topk_softmax(semantic_scores(features, f), config.top_k, config.temperature);
    };

    std::vector<MaskGeometry> geom;
    geom.reserve(n);
    for (const auto& p : proposals) geom.push_back(MaskGeometry::of(p.mask));

    const auto head = phrase_probs(parsed.head_phrase);
    std::vector<RelationTerm> terms;
    for (const auto& rel : parsed.relations) {
        RelationTerm term;
        term.anchor_probs = phrase_probs(rel.anchor_phrase);
        term.relation.assign(n, std::vector<int>(n, 0));
        for (size_t i = 0; i < n; ++i) {
            if (head[i] == 0.0) continue;
            for (size_t j = 0; j < n; ++j) {
                // A mask is never its own anchor; pairs outside both top-k
                // sets contribute nothing either way.
                if (i == j || term.anchor_probs[j] == 0.0) continue;
                const size_t inter = rel.type == RelationType::Within
                                         ? intersection_area(proposals[i].mask, proposals[j].mask)
                                         : 0;
                term.relation[i][j] =
                    relation_holds(rel.type, geom[i], geom[j], inter, config.within_containment);
            }
        }
        terms.push_back(std::move(term));
    }
    return combine_relational(head, terms);
}

// ---------------------------------------------------------------------------
// Guidance maps
// ---------------------------------------------------------------------------

GuidanceMap normalize_coherence(const RealMap& raw, int height, int width, Upsampling mode) {
    if (raw.height < 1 || raw.width < 1 ||
        raw.values.size() != static_cast<size_t>(raw.height) * raw.width) {
        throw Error("malformed localization map");
    }
    for (double v : raw.values) {
        if (!std::isfinite(v)) throw Error("non-finite localization map");
    }
    GuidanceMap out = GuidanceMap::filled(height, width, 0.0, GuidanceKind::Coherence);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double v;
            if (mode == Upsampling::Nearest) {
                const int sy = std::min(raw.height - 1, static_cast<int>((y + 0.5) * raw.height / height));
                const int sx = std::min(raw.width - 1, static_cast<int>((x + 0.5) * raw.width / width));
                v = raw.at(sy, sx);
            } else {
                const double fy = std::clamp((y + 0.5) * raw.height / height - 0.5, 0.0, raw.height - 1.0);
                const double fx = std::clamp((x + 0.5) * raw.width / width - 0.5, 0.0, raw.width - 1.0);
                const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
                const int y1 = std::min(y0 + 1, raw.height - 1), x1 = std::min(x0 + 1, raw.width - 1);
                const double wy = fy - y0, wx = fx - x0;
                v = (1 - wy) * ((1 - wx) * raw.at(y0, x0) + wx * raw.at(y0, x1)) +
                    wy * ((1 - wx) * raw.at(y1, x0) + wx * raw.at(y1, x1));
            }
            out.values[static_cast<size_t>(y) * width + x] = v;
        }
    }
    const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
    const double mn = *lo, mx = *hi;
    if (mx == mn) {
        std::fill(out.values.begin(), out.values.end(), 0.5);
    } else {
        for (auto& v : out.values) v = (v - mn) / (mx - mn);
    }
    return out;
}

GuidanceMap coherence_map(const ImageData& image, std::string_view text,
                          const LocalizationProvider& provider, Upsampling mode) {
    RealMap raw;
    try {
        raw = provider.locate(image, text);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(std::string("localization provider failed: ") + e.what());
    }
    return normalize_coherence(raw, image.height(), image.width(), mode);
}

GuidanceMap position_map(std::optional<PositionCue> cue, int height, int width) {
    GuidanceMap out = GuidanceMap::filled(height, width, 1.0, GuidanceKind::Position);
    if (!cue) return out;
    const double wx = width > 1 ? width - 1.0 : 0.0;
    const double hy = height > 1 ? height - 1.0 : 0.0;
    const double cx = wx / 2.0, cy = hy / 2.0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double nx = wx > 0 ? x / wx : 0.0;
            const double ny = hy > 0 ? y / hy : 0.0;
            double v = 1.0;
            switch (*cue) {
                case PositionCue::Left: v = wx > 0 ? 1.0 - nx : 1.0; break;
                case PositionCue::Right: v = wx > 0 ? nx : 1.0; break;
                case PositionCue::Top: v = hy > 0 ? 1.0 - ny : 1.0; break;
                case PositionCue::Bottom: v = hy > 0 ? ny : 1.0; break;
                case PositionCue::Middle: {
                    const double dx = cx > 0 ? std::abs(x - cx) / cx : 0.0;
                    const double dy = cy > 0 ? std::abs(y - cy) / cy : 0.0;
                    v = 1.0 - std::max(dx, dy);
                    break;
                }
            }
            out.values[static_cast<size_t>(y) * width + x] = v;
        }
    }
    return out;
}

GuidanceMap compose_guidance(const GuidanceMap& coherence, const std::set<PositionCue>& cues) {
    GuidanceMap out = coherence;
    out.kind = GuidanceKind::Combined;
    for (auto cue : cues) {
        const auto pos = position_map(cue, coherence.height, coherence.width);
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] *= pos.values[i];
    }
    return out;
}

double spatial_score(const GuidanceMap& guidance, const BinaryMask& mask, double lambda) {
    if (mask.height() != guidance.height || mask.width() != guidance.width) {
        throw Error("guidance map shape does not match mask");
    }
    const auto data = mask.data();
    double in_sum = 0.0, out_sum = 0.0;
    size_t in_n = 0, out_n = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        if (data[i]) {
            in_sum += guidance.values[i];
            ++in_n;
        } else {
            out_sum += guidance.values[i];
            ++out_n;
        }
    }
    if (in_n == 0) throw Error("empty mask");
    const double inside = in_sum / static_cast<double>(in_n);
    const double outside = out_n ? out_sum / static_cast<double>(out_n) : 0.0;
    return inside - lambda * outside;
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

int argmax(const std::vector<double>& values) {
    if (values.empty()) return -1;
    size_t best = 0;
    for (size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return static_cast<int>(best);
}

ScoreTable fuse_scores(const std::vector<double>& semantic, const std::vector<double>& spatial,
                       double alpha, double temperature) {
    if (semantic.size() != spatial.size()) throw Error("score length mismatch");
    if (semantic.empty()) throw Error("no proposals");
    const auto sn = softmax(semantic, temperature);
    const auto gn = softmax(spatial, temperature);
    ScoreTable table;
    std::vector<double> final_scores(semantic.size());
    for (size_t i = 0; i < semantic.size(); ++i) {
        final_scores[i] = (1.0 - alpha) * sn[i] + alpha * gn[i];
        table.rows.push_back({static_cast<int>(i), semantic[i], sn[i], spatial[i], gn[i],
                              final_scores[i]});
    }
    table.winner_index = argmax(final_scores);
    return table;
}

}  // namespace hybridgl
