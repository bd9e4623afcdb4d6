#include "hybridgl/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "hybridgl/image_io.hpp"
#include "hybridgl/json_io.hpp"

namespace hybridgl {

std::vector<std::string> Ablations::names() const {
    std::vector<std::string> out;
    if (no_coherence) out.push_back("no-coherence");
    if (no_position) out.push_back("no-position");
    if (no_relations) out.push_back("no-relations");
    return out;
}

void Ablations::set(std::string_view name) {
    if (name == "no-relations") {
        no_relations = true;
    } else if (name == "no-position") {
        no_position = true;
    } else if (name == "no-coherence") {
        no_coherence = true;
    } else {
        throw Error("unknown ablation: " + std::string(name));
    }
}

std::string to_string(Upsampling mode) {
    return mode == Upsampling::Bilinear ? "bilinear" : "nearest";
}

Upsampling upsampling_from_string(std::string_view s) {
    if (s == "nearest") return Upsampling::Nearest;
    if (s == "bilinear") return Upsampling::Bilinear;
    throw Error("unknown upsampling mode: " + std::string(s));
}

nlohmann::json to_json(const PipelineConfig& c) {
    nlohmann::json attn = nullptr;
    if (c.hybrid.attention_mask_start_layer) attn = *c.hybrid.attention_mask_start_layer;
    return {
        {"hybrid",
         {{"beta", c.hybrid.beta},
          {"fusion_start_layer", c.hybrid.fusion_start_layer},
          {"attention_mask_start_layer", attn},
          {"blur_sigma", c.hybrid.blur_sigma},
          {"strategy", to_string(c.hybrid.strategy)}}},
        {"guidance",
         {{"alpha", c.guidance.alpha},
          {"lambda", c.guidance.lambda},
          {"lambda_big", c.guidance.lambda_big},
          {"lambda_small", c.guidance.lambda_small},
          {"top_k", c.guidance.top_k},
          {"within_containment", c.guidance.within_containment},
          {"temperature", c.guidance.temperature},
          {"coherence_upsampling", to_string(c.coherence_upsampling)},
          {"coherence_fallback", c.coherence_fallback}}},
        {"ablations", c.ablations.names()},
        {"text_template", c.text_template},
    };
}

// ---------------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------------

SegmentResult segment(const ImageData& image, std::string_view expression,
                      const std::vector<MaskProposal>& proposals, const Components& components,
                      const PipelineConfig& config, const std::string& image_id) {
    if (proposals.empty()) throw NoProposalsError(image_id);
    for (const auto& p : proposals) {
        if (p.mask.height() != image.height() || p.mask.width() != image.width()) {
            throw Error("proposal " + std::to_string(p.index) + " does not match the image size");
        }
    }
    config.guidance.validate();

    const TemplatedTextEncoder templated(components.text, config.text_template);
    const TextEncoder& text = config.text_template == "{}" ? components.text : templated;

    SegmentResult out;
    out.parsed = components.parser.parse(expression);

    std::vector<FeatureVector> features;
    features.reserve(proposals.size());
    for (const auto& p : proposals) {
        features.push_back(hybrid_encode(image, p.mask, components.encoder, config.hybrid));
    }

    std::vector<double> semantic;
    if (!out.parsed.relations.empty() && !config.ablations.no_relations) {
        semantic = relational_semantic_scores(proposals, out.parsed, features, text,
                                              config.guidance);
        out.relational = std::any_of(semantic.begin(), semantic.end(),
                                     [](double s) { return s != 0.0; });
    }
    if (!out.relational) {
        const auto t = encode_text(out.parsed.raw_text, text);
        semantic = semantic_scores(features, t);
    }

    GuidanceMap coherence =
        GuidanceMap::filled(image.height(), image.width(), 1.0, GuidanceKind::Coherence);
    if (!config.ablations.no_coherence && components.localizer != nullptr) {
        try {
            coherence = coherence_map(image, out.parsed.head_phrase, *components.localizer,
                                      config.coherence_upsampling);
        } catch (const Error& e) {
            if (!config.coherence_fallback) throw;
            out.warnings.push_back(std::string("coherence map replaced by all ones: ") + e.what());
        }
    }
    const std::set<PositionCue> cues =
        config.ablations.no_position ? std::set<PositionCue>{} : out.parsed.position_cues;
    const GuidanceMap guidance = compose_guidance(coherence, cues);

    out.lambda = config.guidance.lambda_for(out.parsed.size_cue);
    std::vector<double> spatial;
    spatial.reserve(proposals.size());
    for (const auto& p : proposals) spatial.push_back(spatial_score(guidance, p.mask, out.lambda));

    out.table = fuse_scores(semantic, spatial, config.guidance.alpha, config.guidance.temperature);
    for (size_t i = 0; i < proposals.size(); ++i) out.table.rows[i].index = proposals[i].index;
    out.winner = proposals[static_cast<size_t>(out.table.winner_index)].mask;
    out.table.winner_index = proposals[static_cast<size_t>(out.table.winner_index)].index;
    return out;
}

nlohmann::json to_json(const SegmentResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.table.rows) {
        rows.push_back({{"index", row.index},
                        {"semantic_raw", row.semantic_raw},
                        {"semantic_norm", row.semantic_norm},
                        {"spatial_raw", row.spatial_raw},
                        {"spatial_norm", row.spatial_norm},
                        {"final", row.final_score}});
    }
    return {{"parsed", to_json(r.parsed)},
            {"relational", r.relational},
            {"lambda", r.lambda},
            {"winner_index", r.table.winner_index},
            {"winner_rle", mask_to_json(r.winner)},
            {"scores", std::move(rows)},
            {"warnings", r.warnings}};
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

ImageData Sample::load_image() const {
    ImageData img = image ? *image : read_png(image_path);
    if (img.height() != gt_mask.height() || img.width() != gt_mask.width()) {
        throw Error("ground-truth mask of '" + image_id + "' does not match the image size");
    }
    return img;
}

std::vector<Sample> load_dataset(const std::filesystem::path& jsonl) {
    std::ifstream in(jsonl);
    if (!in) throw Error("cannot open dataset " + jsonl.string());
    const auto base = jsonl.parent_path();
    std::vector<Sample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Sample s;
            s.image_id = j.at("image_id").get<std::string>();
            std::filesystem::path p = j.at("image_path").get<std::string>();
            s.image_path = p.is_relative() ? base / p : p;
            s.expression = j.at("expression").get<std::string>();
            s.gt_mask = mask_from_json(j.at("gt_rle"));
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw Error(jsonl.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(jsonl.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_dataset(const std::filesystem::path& jsonl, const std::vector<Sample>& samples) {
    std::ofstream out(jsonl, std::ios::binary);
    if (!out) throw Error("cannot write " + jsonl.string());
    const auto base = jsonl.parent_path();
    for (const auto& s : samples) {
        const auto rel = s.image_path.lexically_relative(base);
        nlohmann::json j{{"image_id", s.image_id},
                         {"image_path", (rel.empty() ? s.image_path : rel).generic_string()},
                         {"expression", s.expression},
                         {"gt_rle", mask_to_json(s.gt_mask)}};
        out << j.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalReport aggregate(std::vector<SampleResult> results) {
    std::sort(results.begin(), results.end(), [](const SampleResult& a, const SampleResult& b) {
        return std::tie(a.image_id, a.expression, a.intersection, a.union_area, a.winner_index,
                        a.error) < std::tie(b.image_id, b.expression, b.intersection,
                                            b.union_area, b.winner_index, b.error);
    });
    EvalReport r;
    double iou_sum = 0.0;
    size_t exact = 0;
    for (const auto& s : results) {
        r.total_intersection += s.intersection;
        r.total_union += s.union_area;
        iou_sum += s.iou;
        if (s.exact) ++exact;
        if (s.error) ++r.failures;
    }
    if (!results.empty()) {
        const double n = static_cast<double>(results.size());
        r.miou = iou_sum / n;
        r.accuracy = static_cast<double>(exact) / n;
    }
    if (r.total_union > 0) {
        r.oiou = static_cast<double>(r.total_intersection) / static_cast<double>(r.total_union);
    }
    r.samples = std::move(results);
    return r;
}

namespace {

bool all_reentrant(const Components& c) {
    return c.encoder.reentrant() && c.text.reentrant() &&
           (c.localizer == nullptr || c.localizer->reentrant());
}

}  // namespace

EvalReport evaluate(const std::vector<Sample>& dataset, const ProposalLookup& lookup,
                    const Components& components, const PipelineConfig& config, int workers) {
    if (dataset.empty()) throw Error("dataset is empty");
    if (workers < 1) throw Error("workers must be >= 1");

    std::vector<SampleResult> results(dataset.size());
    std::mutex provider_mutex, model_mutex;
    const bool serialize_models = !all_reentrant(components);

    auto run_one = [&](size_t i) {
        const Sample& s = dataset[i];
        SampleResult& r = results[i];
        r.image_id = s.image_id;
        r.expression = s.expression;
        try {
            const ImageData image = s.load_image();
            ProposalSource source;
            if (lookup.cache_dir) source.cache_path = proposal_cache_path(*lookup.cache_dir, s.image_id);
            source.provider = lookup.provider;
            ProposalSet set;
            {
                std::lock_guard<std::mutex> lock(provider_mutex);
                set = load_or_generate(image, s.image_id, source, lookup.config);
            }
            SegmentResult seg;
            if (serialize_models) {
                std::lock_guard<std::mutex> lock(model_mutex);
                seg = segment(image, s.expression, set.proposals, components, config, s.image_id);
            } else {
                seg = segment(image, s.expression, set.proposals, components, config, s.image_id);
            }
            r.winner_index = seg.table.winner_index;
            r.intersection = intersection_area(seg.winner, s.gt_mask);
            r.union_area = seg.winner.area() + s.gt_mask.area() - r.intersection;
            r.iou = r.union_area == 0 ? 0.0
                                      : static_cast<double>(r.intersection) /
                                            static_cast<double>(r.union_area);
            r.exact = seg.winner == s.gt_mask;
        } catch (const std::exception& e) {
            // Scored as an empty prediction so the sample still counts against oIoU.
            r = SampleResult{s.image_id, s.expression, 0, s.gt_mask.area(), 0.0, -1, false,
                             std::string(e.what())};
        }
    };

    const size_t n_threads = std::min(static_cast<size_t>(workers), dataset.size());
    if (n_threads <= 1) {
        for (size_t i = 0; i < dataset.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (size_t i = next++; i < dataset.size(); i = next++) run_one(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    EvalReport report = aggregate(std::move(results));
    report.config = to_json(config);
    report.ablations = config.ablations;
    return report;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : r.samples) {
        nlohmann::json j{{"image_id", s.image_id},
                         {"expression", s.expression},
                         {"intersection", s.intersection},
                         {"union", s.union_area},
                         {"iou", s.iou},
                         {"winner_index", s.winner_index},
                         {"exact", s.exact}};
        if (s.error) j["error"] = *s.error;
        samples.push_back(std::move(j));
    }
    return {{"oIoU", r.oiou},
            {"mIoU", r.miou},
            {"accuracy", r.accuracy},
            {"num_samples", r.samples.size()},
            {"failures", r.failures},
            {"total_intersection", r.total_intersection},
            {"total_union", r.total_union},
            {"ablations", r.ablations.names()},
            {"config", r.config},
            {"samples", std::move(samples)}};
}

std::string format_table(const EvalReport& r) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s %8.4f\n%-10s %8.4f\n%-10s %8.4f\n%-10s %8zu\n%-10s %8zu\n",
                  "oIoU", r.oiou, "mIoU", r.miou, "accuracy", r.accuracy, "samples",
                  r.samples.size(), "failures", r.failures);
    os << buf;
    std::string abl;
    for (const auto& a : r.ablations.names()) abl += (abl.empty() ? "" : ",") + a;
    os << "ablations  " << (abl.empty() ? "none" : abl) << "\n\n";

    size_t id_w = 8;
    for (const auto& s : r.samples) id_w = std::max(id_w, s.image_id.size());
    std::snprintf(buf, sizeof buf, "%-*s %6s %8s %8s %7s  %s\n", static_cast<int>(id_w), "image_id",
                  "winner", "inter", "union", "iou", "expression");
    os << buf;
    for (const auto& s : r.samples) {
        std::snprintf(buf, sizeof buf, "%-*s %6d %8zu %8zu %7.4f  ", static_cast<int>(id_w),
                      s.image_id.c_str(), s.winner_index, s.intersection, s.union_area, s.iou);
        os << buf << s.expression;
        if (s.error) os << "  [error: " << *s.error << "]";
        os << '\n';
    }
    return os.str();
}

}  // namespace hybridgl
