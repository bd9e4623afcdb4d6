// toy_encoder.hpp
//
// A small, deterministic vision/text encoder pair for tests and the
// synthetic benchmark. It is a real pre-norm transformer (single-head
// attention + GELU MLP blocks, residual stream, CLS token, linear patch
// embedding, projection head); only its weights are constructed instead of
// trained.
//
// The weights are a fixed structured part plus seeded Gaussian noise. The
// structured part makes the toy world legible:
//   * patch embedding writes the mean R, G, B of a patch onto three model
//     directions and a constant "background" direction onto every patch;
//   * attention keys of coloured tokens and the CLS query share a salience
//     direction, so the CLS row looks at coloured content;
//   * the projection head maps the R/G/B directions onto the text vectors of
//     the concepts "circle", "square", "triangle".
// Text vectors for the concepts are orthonormal; later concept words in an
// expression are down-weighted so the first-mentioned object dominates.

#pragma once

#include <json.hpp>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hybridgl/encoder.hpp"
#include "hybridgl/guidance.hpp"

namespace hybridgl {

struct ToyEncoderConfig {
    int layers = 4;
    int dim = 16;
    int grid = 4;
    int patch = 4;  // input_side = grid * patch
    std::uint64_t seed = 0;

    LayeredEncoderSpec spec() const { return {layers, dim, grid, grid * patch}; }
    void validate() const;

    nlohmann::json to_json() const;
    /// {"layers", "dim", "grid", "seed"} plus optional "patch"; unknown keys rejected.
    static ToyEncoderConfig from_json(const nlohmann::json& j);
};

/// A concept the toy world knows: its words and the colour channel it lives on.
struct ToyConcept {
    std::string name;
    std::vector<std::string> words;
    int channel;  // 0 = red, 1 = green, 2 = blue
    std::array<std::uint8_t, 3> color;
};

const std::vector<ToyConcept>& toy_concepts();

/// Portable seeded normal generator (mt19937_64 + Box-Muller), so weights do
/// not depend on the standard library's distribution implementation.
class SeededNormal {
public:
    explicit SeededNormal(std::uint64_t seed) : engine_(seed) {}
    double operator()();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct ToyLayerWeights {
    Eigen::MatrixXd wq, wk, wv, wo;  // d x d, applied as W * h
    Eigen::MatrixXd w1;              // hidden x d
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;              // d x hidden
    Eigen::VectorXd b2;
};

struct ToyWeights {
    Eigen::MatrixXd patch;       // d x (3 * patch * patch), pixel order (py, px, c)
    Eigen::VectorXd patch_bias;  // d
    Eigen::VectorXd cls;         // d
    Eigen::MatrixXd pos;         // (1 + K) x d
    std::vector<ToyLayerWeights> layers;
    Eigen::MatrixXd proj;        // d x d
    double ln_eps = 1e-5;
};

class ToyEncoder final : public LayeredEncoder {
public:
    explicit ToyEncoder(ToyEncoderConfig config = {});

    const LayeredEncoderSpec& spec() const override { return spec_; }
    TokenSequence embed(const ImageData& image) const override;
    TokenSequence run_layer(int layer, const TokenSequence& tokens,
                            const AttentionMaskSpec* mask) const override;
    FeatureVector project_cls(const TokenSequence& tokens) const override;
    bool reentrant() const override { return true; }

    /// Post-softmax attention of `layer` for the given input state.
    TokenMatrix attention_weights(int layer, const TokenSequence& tokens,
                                  const AttentionMaskSpec* mask) const;
    /// Projection of an arbitrary row (0 = CLS) into the joint space.
    FeatureVector project_row(const TokenSequence& tokens, int row) const;

    const ToyWeights& weights() const { return weights_; }
    const ToyEncoderConfig& config() const { return config_; }

private:
    ToyEncoderConfig config_;
    LayeredEncoderSpec spec_;
    ToyWeights weights_;
};

class ToyTextEncoder final : public TextEncoder {
public:
    explicit ToyTextEncoder(ToyEncoderConfig config = {});

    FeatureVector encode_text(std::string_view text) const override;
    bool reentrant() const override { return true; }

    /// Unit text vector of concept `i` in toy_concepts() order.
    const Eigen::VectorXd& concept_vector(size_t i) const { return concept_vectors_[i]; }

    static constexpr double kFollowingWordWeight = 0.35;

private:
    ToyEncoderConfig config_;
    std::vector<Eigen::VectorXd> concept_vectors_;
};

/// Coherence provider: cosine between the text vector and every projected
/// image token of a plain encoder pass (grid x grid map).
class ToyLocalizer final : public LocalizationProvider {
public:
    ToyLocalizer(const ToyEncoder& encoder, const ToyTextEncoder& text)
        : encoder_(encoder), text_(text) {}

    RealMap locate(const ImageData& image, std::string_view text) const override;
    bool reentrant() const override { return true; }

private:
    const ToyEncoder& encoder_;
    const ToyTextEncoder& text_;
};

/// Shared orthonormal bases used by the toy pair (exposed for tests).
struct ToyBasis {
    // Model space (zero-mean, orthonormal): red, green, blue, background, cls, salience.
    std::array<Eigen::VectorXd, 6> model;
    // Joint space (orthonormal): one per concept, then background.
    std::vector<Eigen::VectorXd> joint;
};

ToyBasis make_toy_basis(const ToyEncoderConfig& config);

}  // namespace hybridgl
