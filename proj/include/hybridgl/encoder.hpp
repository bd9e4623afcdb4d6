// encoder.hpp
//
// Layered encoder adapter contract and the dual-branch hybrid forward pass.
//
// The local branch sees the image with everything outside the mask zeroed.
// The global branch sees the image with the outside blurred, and from a
// configurable layer onward its CLS row may only attend to in-mask tokens.
// From the fusion start layer on, the token-masked global state (scaled by
// beta) is added into the local state before every local layer. The local
// CLS after the last layer, projected into the joint space, is the mask
// feature.

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridgl/core.hpp"

namespace hybridgl {

using TokenMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LayeredEncoderSpec {
    int num_layers = 12;
    int embed_dim = 768;
    int grid_side = 14;   // image tokens form a grid_side x grid_side grid
    int input_side = 224; // square input, pixels

    int num_tokens() const { return grid_side * grid_side; }
    void validate() const;
};

/// Encoder state at one layer: row 0 is CLS, rows 1..K are image tokens.
struct TokenSequence {
    int layer = 0;
    TokenMatrix tokens;
};

/// One flag per image token (row-major over the grid), true = inside mask.
struct TokenMask {
    std::vector<std::uint8_t> bits;

    size_t count() const;
    static TokenMask all(int k, bool value);
};

/// CLS-row attention restriction for the global branch.
struct AttentionMaskSpec {
    std::vector<std::uint8_t> outside_tokens;  // true = CLS may not attend
    int applies_from_layer = 1;

    static AttentionMaskSpec from_token_mask(const TokenMask& mask, int from_layer);
    bool active_at(int layer) const { return layer >= applies_from_layer; }
};

/// A vector in the joint visual/text embedding space.
struct FeatureVector {
    Eigen::VectorXd values;

    bool operator==(const FeatureVector& o) const {
        return values.size() == o.values.size() && values == o.values;
    }
};

enum class FusionStrategy {
    G2L,        // global -> local (default)
    L2G,        // local -> global
    GPlusL,     // weighted sum of the two final features
    LocalOnly,
    GlobalOnly,
};

std::string to_string(FusionStrategy s);
FusionStrategy fusion_strategy_from_string(std::string_view s);

struct HybridConfig {
    double beta = 2.0;
    int fusion_start_layer = 9;
    /// Defaults to fusion_start_layer when unset.
    std::optional<int> attention_mask_start_layer;
    /// Gaussian sigma in pixels at a 224-pixel input; scaled with input size.
    double blur_sigma = 5.0;
    FusionStrategy strategy = FusionStrategy::G2L;

    /// Layer indices are given for a 12-layer reference backbone. When the
    /// encoder is shallower than the configured start layer, start layers
    /// are mapped proportionally onto its depth.
    HybridConfig resolved_for(const LayeredEncoderSpec& spec) const;
    int attention_start() const { return attention_mask_start_layer.value_or(fusion_start_layer); }
    void validate(const LayeredEncoderSpec& spec) const;
};

inline constexpr int kReferenceLayers = 12;

/// Adapter contract for a layered visual encoder. Layers are 1-based.
class LayeredEncoder {
public:
    virtual ~LayeredEncoder() = default;

    virtual const LayeredEncoderSpec& spec() const = 0;
    /// `image` must be input_side x input_side.
    virtual TokenSequence embed(const ImageData& image) const = 0;
    /// `mask` (optional) restricts CLS attention when active at `layer`.
    virtual TokenSequence run_layer(int layer, const TokenSequence& tokens,
                                    const AttentionMaskSpec* mask) const = 0;
    virtual FeatureVector project_cls(const TokenSequence& tokens) const = 0;
    /// True when concurrent calls from several threads are safe.
    virtual bool reentrant() const { return false; }
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual FeatureVector encode_text(std::string_view text) const = 0;
    virtual bool reentrant() const { return false; }
};

/// Formats every phrase into a prompt template before encoding; each "{}"
/// in the template is replaced by the phrase.
class TemplatedTextEncoder final : public TextEncoder {
public:
    /// Throws Error when the template has no "{}".
    TemplatedTextEncoder(const TextEncoder& inner, std::string text_template);

    FeatureVector encode_text(std::string_view text) const override;
    bool reentrant() const override { return inner_.reentrant(); }

    std::string format(std::string_view text) const;

private:
    const TextEncoder& inner_;
    std::string template_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// I * m: outside pixels set to 0, nothing cropped.
ImageData preprocess_local(const ImageData& image, const BinaryMask& mask);

/// Separable Gaussian, kernel radius ceil(2 sigma), reflect-101 borders.
ImageData gaussian_blur(const ImageData& image, double sigma);

/// I * m + blur(I) * (1 - m). Sigma is config.blur_sigma scaled by
/// max(H, W) / 224.
ImageData preprocess_global(const ImageData& image, const BinaryMask& mask,
                            const HybridConfig& config);

/// Token is set iff mean coverage of its grid cell >= 0.5; falls back to
/// any coverage, then to the cell holding the bbox center.
TokenMask token_mask_of(const BinaryMask& mask, const LayeredEncoderSpec& spec);

/// Two-branch forward on already preprocessed, input-sized images.
/// `config` must already be resolved for the encoder.
FeatureVector hybrid_forward(const ImageData& local_input, const ImageData& global_input,
                             const TokenMask& token_mask, const LayeredEncoder& encoder,
                             const HybridConfig& config);

/// Full per-mask feature: resize to the encoder input, preprocess both
/// branches, build the token mask, run hybrid_forward.
FeatureVector hybrid_encode(const ImageData& image, const BinaryMask& mask,
                            const LayeredEncoder& encoder, const HybridConfig& config);

/// Plain encoder pass over an input-sized image.
FeatureVector encode_plain(const ImageData& input, const LayeredEncoder& encoder);

/// Rejects empty/whitespace-only text.
FeatureVector encode_text(std::string_view text, const TextEncoder& encoder);

/// Throws on zero norm or dimension mismatch.
double cosine(const FeatureVector& a, const FeatureVector& b);

std::vector<double> semantic_scores(const std::vector<FeatureVector>& features,
                                    const FeatureVector& text_feature);

}  // namespace hybridgl
