#include "hybridgl/config.hpp"

#include <charconv>
#include <fstream>

namespace hybridgl {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw Error("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
    }
    return out;
}

template <class Int>
Int to_int(std::string_view key, std::string_view v) {
    Int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw Error("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
    }
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k{
        "alpha",        "beta",          "lambda",        "lambda_big",
        "lambda_small", "top_k",         "within_containment", "temperature",
        "fusion_start_layer", "attention_mask_start_layer", "blur_sigma", "strategy",
        "coherence_upsampling", "pred_iou_thresh", "stability_score_thresh", "points_per_side",
        "encoder",      "seed",          "toy_layers",    "toy_dim",
        "toy_grid",     "toy_patch",     "ablate",        "no_relations",
        "no_position",  "no_coherence", "coherence_fallback", "text_template"};
    return k;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
    const std::string v = trim(raw);
    auto& h = pipeline.hybrid;
    auto& g = pipeline.guidance;
    auto& a = pipeline.ablations;
    try {
        if (key == "alpha") g.alpha = to_double(key, v);
        else if (key == "beta") h.beta = to_double(key, v);
        else if (key == "lambda") g.lambda = to_double(key, v);
        else if (key == "lambda_big") g.lambda_big = to_double(key, v);
        else if (key == "lambda_small") g.lambda_small = to_double(key, v);
        else if (key == "top_k") g.top_k = to_int<int>(key, v);
        else if (key == "within_containment") g.within_containment = to_double(key, v);
        else if (key == "temperature") g.temperature = to_double(key, v);
        else if (key == "fusion_start_layer") h.fusion_start_layer = to_int<int>(key, v);
        else if (key == "attention_mask_start_layer") h.attention_mask_start_layer = to_int<int>(key, v);
        else if (key == "blur_sigma") h.blur_sigma = to_double(key, v);
        else if (key == "strategy") h.strategy = fusion_strategy_from_string(v);
        else if (key == "coherence_upsampling") pipeline.coherence_upsampling = upsampling_from_string(v);
        else if (key == "pred_iou_thresh") proposals.predicted_iou_threshold = to_double(key, v);
        else if (key == "stability_score_thresh") proposals.stability_score_threshold = to_double(key, v);
        else if (key == "points_per_side") proposals.points_per_side = to_int<int>(key, v);
        else if (key == "encoder") encoder = v;
        else if (key == "seed") toy.seed = to_int<std::uint64_t>(key, v);
        else if (key == "toy_layers") toy.layers = to_int<int>(key, v);
        else if (key == "toy_dim") toy.dim = to_int<int>(key, v);
        else if (key == "toy_grid") toy.grid = to_int<int>(key, v);
        else if (key == "toy_patch") toy.patch = to_int<int>(key, v);
        else if (key == "ablate") {
            size_t start = 0;
            while (start <= v.size()) {
                const size_t comma = v.find(',', start);
                const std::string item = trim(std::string_view(v).substr(
                    start, comma == std::string::npos ? std::string::npos : comma - start));
                if (!item.empty()) a.set(item);
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
        }
        else if (key == "no_relations") a.no_relations = to_bool(key, v);
        else if (key == "no_position") a.no_position = to_bool(key, v);
        else if (key == "no_coherence") a.no_coherence = to_bool(key, v);
        else if (key == "coherence_fallback") pipeline.coherence_fallback = to_bool(key, v);
        else if (key == "text_template") pipeline.text_template = v;
        else throw Error("unknown config key: " + std::string(key));
    } catch (const Error& e) {
        const std::string msg = e.what();
        if (msg.find(std::string(key)) != std::string::npos) throw;
        throw Error(std::string(key) + ": " + msg);
    }
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        try {
            set(key, value);
        } catch (const Error& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void RunConfig::validate() const {
    if (encoder != "toy" && encoder != "adapter") throw Error("encoder must be 'toy' or 'adapter'");
    pipeline.guidance.validate();
    proposals.validate();
    toy.validate();
    const auto& h = pipeline.hybrid;
    if (h.fusion_start_layer < 1 || h.attention_start() < 1) {
        throw Error("start layers must be >= 1");
    }
    if (encoder == "toy") h.resolved_for(toy.spec()).validate(toy.spec());
    if (pipeline.text_template.find("{}") == std::string::npos) {
        throw Error("text_template must contain {}");
    }
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j = hybridgl::to_json(pipeline);
    j["proposals"] = {{"pred_iou_thresh", proposals.predicted_iou_threshold},
                      {"stability_score_thresh", proposals.stability_score_threshold},
                      {"points_per_side", proposals.points_per_side}};
    j["encoder"] = encoder;
    j["toy"] = toy.to_json();
    return j;
}

}  // namespace hybridgl
