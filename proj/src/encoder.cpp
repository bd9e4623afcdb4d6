#include "hybridgl/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace hybridgl {

void LayeredEncoderSpec::validate() const {
    if (num_layers < 2) throw Error("encoder needs at least 2 layers");
    if (embed_dim < 1) throw Error("embed_dim must be positive");
    if (grid_side < 1) throw Error("grid_side must be positive");
    if (input_side < grid_side) throw Error("input_side must be >= grid_side");
}

size_t TokenMask::count() const {
    return static_cast<size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

TokenMask TokenMask::all(int k, bool value) {
    return TokenMask{std::vector<std::uint8_t>(static_cast<size_t>(k), value ? 1 : 0)};
}

AttentionMaskSpec AttentionMaskSpec::from_token_mask(const TokenMask& mask, int from_layer) {
    AttentionMaskSpec spec;
    spec.applies_from_layer = from_layer;
    spec.outside_tokens.reserve(mask.bits.size());
    for (auto b : mask.bits) spec.outside_tokens.push_back(b ? 0 : 1);
    return spec;
}

std::string to_string(FusionStrategy s) {
    switch (s) {
        case FusionStrategy::G2L: return "g2l";
        case FusionStrategy::L2G: return "l2g";
        case FusionStrategy::GPlusL: return "g+l";
        case FusionStrategy::LocalOnly: return "local";
        case FusionStrategy::GlobalOnly: return "global";
    }
    return "g2l";
}

FusionStrategy fusion_strategy_from_string(std::string_view s) {
    if (s == "g2l") return FusionStrategy::G2L;
    if (s == "l2g") return FusionStrategy::L2G;
    if (s == "g+l" || s == "gpl") return FusionStrategy::GPlusL;
    if (s == "local") return FusionStrategy::LocalOnly;
    if (s == "global") return FusionStrategy::GlobalOnly;
    throw Error("unknown fusion strategy: " + std::string(s));
}

namespace {

int map_layer(int layer, int depth) {
    if (layer <= depth) return layer;
    const double scaled = static_cast<double>(layer) * depth / kReferenceLayers;
    return std::clamp(static_cast<int>(std::lround(scaled)), 1, depth);
}

}  // namespace

HybridConfig HybridConfig::resolved_for(const LayeredEncoderSpec& spec) const {
    HybridConfig out = *this;
    out.attention_mask_start_layer = map_layer(attention_start(), spec.num_layers);
    out.fusion_start_layer = map_layer(fusion_start_layer, spec.num_layers);
    return out;
}

void HybridConfig::validate(const LayeredEncoderSpec& spec) const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error("beta must be finite and >= 0");
    if (fusion_start_layer < 1 || fusion_start_layer > spec.num_layers) {
        throw Error("fusion_start_layer must be in [1, " + std::to_string(spec.num_layers) + "]");
    }
    const int a = attention_start();
    if (a < 1 || a > spec.num_layers) {
        throw Error("attention_mask_start_layer must be in [1, " +
                    std::to_string(spec.num_layers) + "]");
    }
    if (!(blur_sigma >= 0.0)) throw Error("blur_sigma must be >= 0");
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

ImageData preprocess_local(const ImageData& image, const BinaryMask& mask) {
    if (mask.height() != image.height() || mask.width() != image.width()) {
        throw Error("mask shape does not match image");
    }
    ImageData out = image;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (mask.at(y, x)) continue;
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = 0;
        }
    }
    return out;
}

namespace {

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

}  // namespace

ImageData gaussian_blur(const ImageData& image, double sigma) {
    if (sigma <= 0.0) return image;
    const int radius = static_cast<int>(std::ceil(2.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= sum;

    const int h = image.height(), w = image.width();
    std::vector<double> tmp(static_cast<size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[i + radius] * image.at(y, reflect101(x + i, w), c);
                }
                tmp[(static_cast<size_t>(y) * w + x) * 3 + c] = acc;
            }
        }
    }
    ImageData out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = reflect101(y + i, h);
                    acc += kernel[i + radius] * tmp[(static_cast<size_t>(yy) * w + x) * 3 + c];
                }
                out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
            }
        }
    }
    return out;
}

ImageData preprocess_global(const ImageData& image, const BinaryMask& mask,
                            const HybridConfig& config) {
    if (mask.height() != image.height() || mask.width() != image.width()) {
        throw Error("mask shape does not match image");
    }
    const double side = std::max(image.height(), image.width());
    const ImageData blurred = gaussian_blur(image, config.blur_sigma * side / 224.0);
    ImageData out = image;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (mask.at(y, x)) continue;
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = blurred.at(y, x, c);
        }
    }
    return out;
}

TokenMask token_mask_of(const BinaryMask& mask, const LayeredEncoderSpec& spec) {
    const int p = spec.grid_side;
    const int h = mask.height(), w = mask.width();
    std::vector<double> coverage(static_cast<size_t>(p) * p, 0.0);
    for (int r = 0; r < p; ++r) {
        const int y0 = static_cast<int>(static_cast<long>(r) * h / p);
        const int y1 = static_cast<int>(static_cast<long>(r + 1) * h / p);
        for (int c = 0; c < p; ++c) {
            const int x0 = static_cast<int>(static_cast<long>(c) * w / p);
            const int x1 = static_cast<int>(static_cast<long>(c + 1) * w / p);
            const long cell = static_cast<long>(y1 - y0) * (x1 - x0);
            if (cell == 0) continue;
            long on = 0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) on += mask.at(y, x) ? 1 : 0;
            }
            coverage[static_cast<size_t>(r) * p + c] = static_cast<double>(on) / cell;
        }
    }

    TokenMask tm = TokenMask::all(p * p, false);
    for (size_t i = 0; i < coverage.size(); ++i) tm.bits[i] = coverage[i] >= 0.5 ? 1 : 0;
    if (tm.count() > 0) return tm;
    for (size_t i = 0; i < coverage.size(); ++i) tm.bits[i] = coverage[i] > 0.0 ? 1 : 0;
    if (tm.count() > 0) return tm;

    const auto bc = bbox_and_center(mask);
    const int r = std::min(p - 1, static_cast<int>((bc.center.y + 0.5) * p / h));
    const int c = std::min(p - 1, static_cast<int>((bc.center.x + 0.5) * p / w));
    tm.bits[static_cast<size_t>(r) * p + c] = 1;
    return tm;
}

// ---------------------------------------------------------------------------
// Hybrid forward
// ---------------------------------------------------------------------------

namespace {

void check_finite(const TokenSequence& seq, int layer, const char* branch) {
    if (!seq.tokens.allFinite()) {
        throw Error(std::string("non-finite activations at layer ") + std::to_string(layer) +
                    " (" + branch + " branch)");
    }
}

/// dst image rows += scale * src image rows, restricted to `tokens` if given.
void fuse_into(TokenSequence& dst, const TokenSequence& src, double scale,
               const TokenMask* tokens) {
    if (scale == 0.0) return;
    const auto k = static_cast<Eigen::Index>(dst.tokens.rows() - 1);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (tokens && !tokens->bits[static_cast<size_t>(i)]) continue;
        dst.tokens.row(i + 1) += scale * src.tokens.row(i + 1);
    }
}

FeatureVector normalized(const FeatureVector& f) {
    const double n = f.values.norm();
    if (n == 0.0) throw Error("zero-norm feature");
    return FeatureVector{f.values / n};
}

}  // namespace

FeatureVector hybrid_forward(const ImageData& local_input, const ImageData& global_input,
                             const TokenMask& token_mask, const LayeredEncoder& encoder,
                             const HybridConfig& config) {
    const auto& spec = encoder.spec();
    config.validate(spec);
    if (token_mask.bits.size() != static_cast<size_t>(spec.num_tokens())) {
        throw Error("token mask size does not match encoder grid");
    }
    const auto attn = AttentionMaskSpec::from_token_mask(token_mask, config.attention_start());
    const int start = config.fusion_start_layer;
    const auto strategy = config.strategy;

    TokenSequence local = encoder.embed(local_input);
    TokenSequence global = encoder.embed(global_input);
    check_finite(local, 0, "local");
    check_finite(global, 0, "global");

    const bool need_local = strategy != FusionStrategy::GlobalOnly;
    const bool need_global = strategy != FusionStrategy::LocalOnly;

    for (int l = 1; l <= spec.num_layers; ++l) {
        TokenSequence next_global;
        if (need_global) {
            if (strategy == FusionStrategy::L2G && l >= start) {
                TokenSequence fused = global;
                fuse_into(fused, local, config.beta, nullptr);
                next_global = encoder.run_layer(l, fused, &attn);
            } else {
                next_global = encoder.run_layer(l, global, &attn);
            }
            check_finite(next_global, l, "global");
        }
        if (need_local) {
            if (strategy == FusionStrategy::G2L && l >= start) {
                fuse_into(local, global, config.beta, &token_mask);
            }
            local = encoder.run_layer(l, local, nullptr);
            check_finite(local, l, "local");
        }
        if (need_global) global = std::move(next_global);
    }

    switch (strategy) {
        case FusionStrategy::G2L:
        case FusionStrategy::LocalOnly:
            return encoder.project_cls(local);
        case FusionStrategy::L2G:
        case FusionStrategy::GlobalOnly:
            return encoder.project_cls(global);
        case FusionStrategy::GPlusL: {
            const auto fl = normalized(encoder.project_cls(local));
            const auto fg = normalized(encoder.project_cls(global));
            return FeatureVector{fl.values + config.beta * fg.values};
        }
    }
    return encoder.project_cls(local);
}

FeatureVector hybrid_encode(const ImageData& image, const BinaryMask& mask,
                            const LayeredEncoder& encoder, const HybridConfig& config) {
    if (mask.height() != image.height() || mask.width() != image.width()) {
        throw Error("mask shape does not match image");
    }
    const auto& spec = encoder.spec();
    const HybridConfig resolved = config.resolved_for(spec);
    const int side = spec.input_side;
    const ImageData img = resize_bilinear(image, side, side);
    const BinaryMask m = resize_nearest(mask, side, side);
    return hybrid_forward(preprocess_local(img, m), preprocess_global(img, m, resolved),
                          token_mask_of(mask, spec), encoder, resolved);
}

FeatureVector encode_plain(const ImageData& input, const LayeredEncoder& encoder) {
    TokenSequence seq = encoder.embed(input);
    for (int l = 1; l <= encoder.spec().num_layers; ++l) {
        seq = encoder.run_layer(l, seq, nullptr);
        check_finite(seq, l, "plain");
    }
    return encoder.project_cls(seq);
}

TemplatedTextEncoder::TemplatedTextEncoder(const TextEncoder& inner, std::string text_template)
    : inner_(inner), template_(std::move(text_template)) {
    if (template_.find("{}") == std::string::npos) {
        throw Error("text template must contain {}: '" + template_ + "'");
    }
}

std::string TemplatedTextEncoder::format(std::string_view text) const {
    std::string out;
    size_t pos = 0;
    for (size_t hit; (hit = template_.find("{}", pos)) != std::string::npos; pos = hit + 2) {
        out.append(template_, pos, hit - pos);
        out.append(text);
    }
    out.append(template_, pos);
    return out;
}

FeatureVector TemplatedTextEncoder::encode_text(std::string_view text) const {
    return inner_.encode_text(format(text));
}

FeatureVector encode_text(std::string_view text, const TextEncoder& encoder) {
    const bool blank = std::all_of(text.begin(), text.end(),
                                   [](unsigned char c) { return std::isspace(c) != 0; });
    if (blank) throw Error("empty text");
    return encoder.encode_text(text);
}

double cosine(const FeatureVector& a, const FeatureVector& b) {
    if (a.values.size() != b.values.size()) throw Error("feature dimension mismatch");
    const double na = a.values.norm();
    const double nb = b.values.norm();
    if (na == 0.0 || nb == 0.0) throw Error("zero-norm feature");
    return std::clamp(a.values.dot(b.values) / (na * nb), -1.0, 1.0);
}

std::vector<double> semantic_scores(const std::vector<FeatureVector>& features,
                                    const FeatureVector& text_feature) {
    std::vector<double> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(cosine(f, text_feature));
    return out;
}

}  // namespace hybridgl
