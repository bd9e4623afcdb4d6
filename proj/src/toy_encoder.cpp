#include "hybridgl/toy_encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

namespace hybridgl {

namespace {

constexpr double kColorGain = 4.0;
constexpr double kBackgroundGain = 1.0;
constexpr double kPixelMean = 0.1;  // subtracted per channel, like input normalization
constexpr double kQueryKeyIdentity = 2.0;
constexpr double kSalience = 1.2;
constexpr double kOutputGain = 0.5;
constexpr double kNoise = 0.05;
constexpr double kSmallNoise = 0.02;

constexpr std::uint64_t kBasisSalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kTextSalt = 0xc2b2ae3d27d4eb4fULL;

std::set<std::string> allowed_keys() { return {"layers", "dim", "grid", "seed", "patch"}; }

Eigen::VectorXd layer_norm(const Eigen::VectorXd& v, double eps) {
    const double mean = v.mean();
    const Eigen::VectorXd c = v.array() - mean;
    const double var = c.squaredNorm() / static_cast<double>(v.size());
    return c / std::sqrt(var + eps);
}

TokenMatrix layer_norm_rows(const TokenMatrix& x, double eps) {
    TokenMatrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        out.row(r) = layer_norm(x.row(r).transpose(), eps).transpose();
    }
    return out;
}

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0))); }

Eigen::MatrixXd noise(SeededNormal& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng();
    }
    return m;
}

Eigen::VectorXd noise_vec(SeededNormal& rng, Eigen::Index n, double scale) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng();
    return v;
}

std::vector<Eigen::VectorXd> orthonormal(SeededNormal& rng, int dim, int count, bool zero_mean) {
    std::vector<Eigen::VectorXd> basis;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(dim) / std::sqrt(static_cast<double>(dim));
    while (static_cast<int>(basis.size()) < count) {
        Eigen::VectorXd v = noise_vec(rng, dim, 1.0);
        if (zero_mean) v -= ones * ones.dot(v);
        for (const auto& b : basis) v -= b * b.dot(v);
        const double n = v.norm();
        if (n < 1e-6) continue;
        basis.push_back(v / n);
    }
    return basis;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

// ---------------------------------------------------------------------------

double SeededNormal::operator()() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    constexpr double kScale = 1.0 / 18446744073709551616.0;  // 2^-64
    double u1;
    do {
        u1 = static_cast<double>(engine_()) * kScale;
    } while (u1 <= 0.0);
    const double u2 = static_cast<double>(engine_()) * kScale;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

void ToyEncoderConfig::validate() const {
    if (layers < 2) throw Error("toy encoder needs at least 2 layers");
    if (dim < 8) throw Error("toy encoder dim must be >= 8");
    if (grid < 1) throw Error("toy encoder grid must be >= 1");
    if (patch < 1) throw Error("toy encoder patch must be >= 1");
}

nlohmann::json ToyEncoderConfig::to_json() const {
    return {{"layers", layers}, {"dim", dim}, {"grid", grid}, {"patch", patch}, {"seed", seed}};
}

ToyEncoderConfig ToyEncoderConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("toy encoder config must be a JSON object");
    const auto allowed = allowed_keys();
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) throw Error("unknown toy encoder key: " + it.key());
    }
    ToyEncoderConfig c;
    try {
        if (j.contains("layers")) c.layers = j.at("layers").get<int>();
        if (j.contains("dim")) c.dim = j.at("dim").get<int>();
        if (j.contains("grid")) c.grid = j.at("grid").get<int>();
        if (j.contains("patch")) c.patch = j.at("patch").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad toy encoder config: ") + e.what());
    }
    c.validate();
    return c;
}

const std::vector<ToyConcept>& toy_concepts() {
    static const std::vector<ToyConcept> concepts{
        {"circle", {"circle", "circles", "disc", "disk", "ball", "round"}, 0, {220, 40, 40}},
        {"square", {"square", "squares", "box", "block"}, 1, {40, 200, 40}},
        {"triangle", {"triangle", "triangles", "wedge"}, 2, {40, 40, 220}},
    };
    return concepts;
}

ToyBasis make_toy_basis(const ToyEncoderConfig& config) {
    SeededNormal rng(config.seed ^ kBasisSalt);
    ToyBasis basis;
    const auto model = orthonormal(rng, config.dim, 6, true);
    for (size_t i = 0; i < 6; ++i) basis.model[i] = model[i];
    basis.joint = orthonormal(rng, config.dim, static_cast<int>(toy_concepts().size()) + 1, false);
    return basis;
}

// ---------------------------------------------------------------------------
// ToyEncoder
// ---------------------------------------------------------------------------

ToyEncoder::ToyEncoder(ToyEncoderConfig config) : config_(config), spec_(config.spec()) {
    config_.validate();
    const int d = config_.dim;
    const int k = config_.grid * config_.grid;
    const int p2 = config_.patch * config_.patch;
    const ToyBasis basis = make_toy_basis(config_);
    const auto& e = basis.model;  // r, g, b, background, cls, salience
    const Eigen::VectorXd& e_bg = e[3];
    const Eigen::VectorXd& e_cls = e[4];
    const Eigen::VectorXd& s = e[5];

    SeededNormal rng(config_.seed);

    weights_.patch = noise(rng, d, 3 * p2, kSmallNoise);
    for (int px = 0; px < p2; ++px) {
        for (int c = 0; c < 3; ++c) weights_.patch.col(px * 3 + c) += (kColorGain / p2) * e[c];
    }
    weights_.patch_bias = kBackgroundGain * e_bg - kColorGain * kPixelMean * (e[0] + e[1] + e[2]) +
                          noise_vec(rng, d, kSmallNoise);
    weights_.cls = e_cls;
    weights_.pos = noise(rng, 1 + k, d, kSmallNoise);

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd colors = e[0] + e[1] + e[2];
    for (int l = 0; l < config_.layers; ++l) {
        ToyLayerWeights lw;
        // The CLS query drops its own direction and asks for salience instead.
        lw.wq = kQueryKeyIdentity * (eye - e_cls * e_cls.transpose()) +
                kSalience * s * e_cls.transpose() + noise(rng, d, d, kNoise);
        lw.wk = kQueryKeyIdentity * eye + kSalience * s * colors.transpose() + noise(rng, d, d, kNoise);
        lw.wv = eye + noise(rng, d, d, kNoise);
        lw.wo = kOutputGain * eye + noise(rng, d, d, kNoise);
        lw.w1 = noise(rng, 2 * d, d, kNoise);
        lw.b1 = noise_vec(rng, 2 * d, kSmallNoise);
        lw.w2 = noise(rng, d, 2 * d, kNoise);
        lw.b2 = noise_vec(rng, d, kSmallNoise);
        weights_.layers.push_back(std::move(lw));
    }

    weights_.proj = noise(rng, d, d, kNoise);
    const auto& concepts = toy_concepts();
    for (size_t c = 0; c < concepts.size(); ++c) {
        weights_.proj += basis.joint[c] * e[concepts[c].channel].transpose();
    }
    weights_.proj += basis.joint.back() * (e_bg + e_cls).transpose();
}

TokenSequence ToyEncoder::embed(const ImageData& image) const {
    const int side = spec_.input_side;
    if (image.height() != side || image.width() != side) {
        throw Error("toy encoder expects a " + std::to_string(side) + "x" + std::to_string(side) +
                    " input");
    }
    const int grid = config_.grid, patch = config_.patch;
    TokenSequence seq;
    seq.layer = 0;
    seq.tokens.resize(1 + grid * grid, config_.dim);
    seq.tokens.row(0) = (weights_.cls + weights_.pos.row(0).transpose()).transpose();
    Eigen::VectorXd px(3 * patch * patch);
    for (int r = 0; r < grid; ++r) {
        for (int c = 0; c < grid; ++c) {
            for (int py = 0; py < patch; ++py) {
                for (int pxx = 0; pxx < patch; ++pxx) {
                    for (int ch = 0; ch < 3; ++ch) {
                        px((py * patch + pxx) * 3 + ch) =
                            image.at(r * patch + py, c * patch + pxx, ch) / 255.0;
                    }
                }
            }
            const int row = 1 + r * grid + c;
            seq.tokens.row(row) =
                (weights_.patch * px + weights_.patch_bias + weights_.pos.row(row).transpose())
                    .transpose();
        }
    }
    return seq;
}

TokenMatrix ToyEncoder::attention_weights(int layer, const TokenSequence& tokens,
                                          const AttentionMaskSpec* mask) const {
    if (layer < 1 || layer > config_.layers) throw Error("layer out of range");
    const auto& lw = weights_.layers[static_cast<size_t>(layer - 1)];
    const TokenMatrix h = layer_norm_rows(tokens.tokens, weights_.ln_eps);
    const TokenMatrix q = h * lw.wq.transpose();
    const TokenMatrix k = h * lw.wk.transpose();
    TokenMatrix logits = (q * k.transpose()) / std::sqrt(static_cast<double>(config_.dim));
    if (mask && mask->active_at(layer)) {
        for (size_t t = 0; t < mask->outside_tokens.size(); ++t) {
            if (mask->outside_tokens[t]) {
                logits(0, static_cast<Eigen::Index>(t) + 1) = -std::numeric_limits<double>::infinity();
            }
        }
    }
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            logits(r, c) = std::exp(logits(r, c) - mx);
            sum += logits(r, c);
        }
        logits.row(r) /= sum;
    }
    return logits;
}

TokenSequence ToyEncoder::run_layer(int layer, const TokenSequence& tokens,
                                    const AttentionMaskSpec* mask) const {
    const auto& lw = weights_.layers[static_cast<size_t>(layer - 1)];
    const TokenMatrix attn = attention_weights(layer, tokens, mask);
    const TokenMatrix h = layer_norm_rows(tokens.tokens, weights_.ln_eps);
    const TokenMatrix v = h * lw.wv.transpose();

    TokenSequence out;
    out.layer = layer;
    out.tokens = tokens.tokens + (attn * v) * lw.wo.transpose();

    const TokenMatrix h2 = layer_norm_rows(out.tokens, weights_.ln_eps);
    TokenMatrix hidden = h2 * lw.w1.transpose();
    hidden.rowwise() += lw.b1.transpose();
    hidden = hidden.unaryExpr([](double z) { return gelu(z); });
    TokenMatrix mlp = hidden * lw.w2.transpose();
    mlp.rowwise() += lw.b2.transpose();
    out.tokens += mlp;
    return out;
}

FeatureVector ToyEncoder::project_row(const TokenSequence& tokens, int row) const {
    const Eigen::VectorXd ln = layer_norm(tokens.tokens.row(row).transpose(), weights_.ln_eps);
    return FeatureVector{weights_.proj * ln};
}

FeatureVector ToyEncoder::project_cls(const TokenSequence& tokens) const {
    return project_row(tokens, 0);
}

// ---------------------------------------------------------------------------
// ToyTextEncoder
// ---------------------------------------------------------------------------

ToyTextEncoder::ToyTextEncoder(ToyEncoderConfig config) : config_(config) {
    config_.validate();
    const ToyBasis basis = make_toy_basis(config_);
    concept_vectors_.assign(basis.joint.begin(), basis.joint.end() - 1);
}

FeatureVector ToyTextEncoder::encode_text(std::string_view text) const {
    const auto& concepts = toy_concepts();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(config_.dim);
    bool first = true;
    for (const auto& w : words_of(text)) {
        for (size_t c = 0; c < concepts.size(); ++c) {
            const auto& ws = concepts[c].words;
            if (std::find(ws.begin(), ws.end(), w) == ws.end()) continue;
            v += (first ? 1.0 : kFollowingWordWeight) * concept_vectors_[c];
            first = false;
        }
    }
    if (first) {
        // No known concept: a stable pseudo-random direction per text.
        SeededNormal rng(fnv1a(lower(text)) ^ config_.seed ^ kTextSalt);
        v = noise_vec(rng, config_.dim, 1.0);
    }
    return FeatureVector{v / v.norm()};
}

// ---------------------------------------------------------------------------
// ToyLocalizer
// ---------------------------------------------------------------------------

RealMap ToyLocalizer::locate(const ImageData& image, std::string_view text) const {
    const auto& spec = encoder_.spec();
    const ImageData input = resize_bilinear(image, spec.input_side, spec.input_side);
    TokenSequence seq = encoder_.embed(input);
    for (int l = 1; l <= spec.num_layers; ++l) seq = encoder_.run_layer(l, seq, nullptr);
    const FeatureVector t = hybridgl::encode_text(text, text_);
    RealMap map{spec.grid_side, spec.grid_side, {}};
    map.values.reserve(static_cast<size_t>(spec.num_tokens()));
    for (int i = 0; i < spec.num_tokens(); ++i) {
        map.values.push_back(cosine(encoder_.project_row(seq, 1 + i), t));
    }
    return map;
}

}  // namespace hybridgl
