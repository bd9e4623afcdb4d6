#include "hybridgl/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "hybridgl/config.hpp"
#include "hybridgl/image_io.hpp"
#include "hybridgl/json_io.hpp"
#include "hybridgl/pipeline.hpp"
#include "hybridgl/scenes.hpp"
#include "hybridgl/toy_encoder.hpp"

namespace hybridgl {

namespace {

namespace fs = std::filesystem;

// Raised for bad flag values found after CLI11 parsing succeeded.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::optional<fs::path> cache_dir_from_env() {
    const char* v = std::getenv("HYBRIDGL_CACHE_DIR");
    if (v == nullptr || *v == '\0') return std::nullopt;
    return fs::path(v);
}

struct ConfigOptions {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::vector<std::string> ablate;
    bool no_relations = false, no_position = false, no_coherence = false;
    bool toy_encoder = false;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "key = value config file; flags win")
            ->check(CLI::ExistingFile);
        auto num = [&](const std::string& flag, const std::string& key, const std::string& help) {
            app->add_option_function<std::string>(
                flag, [this, key](const std::string& v) { overrides.emplace_back(key, v); }, help);
        };
        num("--alpha", "alpha", "semantic/spatial fusion weight");
        num("--beta", "beta", "global-to-local fusion scale");
        num("--lambda", "lambda", "outside-mask penalty");
        num("--lambda-big", "lambda_big", "penalty when the text says big");
        num("--lambda-small", "lambda_small", "penalty when the text says small");
        num("--top-k", "top_k", "relational top-k");
        num("--temperature", "temperature", "softmax temperature");
        num("--fusion-start-layer", "fusion_start_layer", "first fused layer");
        num("--attention-start-layer", "attention_mask_start_layer", "first CLS-masked layer");
        num("--blur-sigma", "blur_sigma", "outside blur sigma at 224 px");
        num("--strategy", "strategy", "g2l | l2g | g+l | local | global");
        num("--coherence-upsampling", "coherence_upsampling", "nearest | bilinear");
        num("--iou-thresh,--pred-iou-thresh", "pred_iou_thresh", "proposal predicted-IoU gate");
        num("--stability-thresh", "stability_score_thresh", "proposal stability gate");
        num("--points-per-side", "points_per_side", "live proposal seed grid");
        num("--encoder", "encoder", "toy | adapter");
        num("--toy-seed", "seed", "toy encoder seed");
        num("--text-template", "text_template", "prompt template, {} marks the phrase");
        app->add_flag("--toy-encoder", toy_encoder, "use the built-in toy encoder");
        app->add_option("--ablate", ablate, "no-relations | no-position | no-coherence (repeatable)")
            ->allow_extra_args(false);
        app->add_flag("--no-relations", no_relations, "score with plain cosine only");
        app->add_flag("--no-position", no_position, "ignore position cues");
        app->add_flag("--no-coherence", no_coherence, "uniform coherence map");
    }

    RunConfig build() const {
        RunConfig cfg;
        try {
            if (!config_file.empty()) cfg.load_file(config_file);
            for (const auto& [k, v] : overrides) cfg.set(k, v);
            for (const auto& a : ablate) cfg.pipeline.ablations.set(a);
            if (toy_encoder) cfg.encoder = "toy";
            if (no_relations) cfg.pipeline.ablations.no_relations = true;
            if (no_position) cfg.pipeline.ablations.no_position = true;
            if (no_coherence) cfg.pipeline.ablations.no_coherence = true;
            cfg.validate();
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        return cfg;
    }
};

// Encoder stack selected by a RunConfig.
struct Models {
    std::unique_ptr<ToyEncoder> encoder;
    std::unique_ptr<ToyTextEncoder> text;
    std::unique_ptr<ToyLocalizer> localizer;
    RuleBasedParser parser;

    explicit Models(const RunConfig& cfg) {
        if (cfg.encoder != "toy") {
            throw Error("encoder '" + cfg.encoder +
                        "' is not available in this build; only the toy encoder is bundled");
        }
        encoder = std::make_unique<ToyEncoder>(cfg.toy);
        text = std::make_unique<ToyTextEncoder>(cfg.toy);
        localizer = std::make_unique<ToyLocalizer>(*encoder, *text);
    }

    Components components() const { return Components{*encoder, *text, localizer.get(), parser}; }
};

void print_json(std::ostream& out, const nlohmann::json& j) { out << j.dump(2) << '\n'; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------

struct SegmentCmd {
    ConfigOptions opts;
    std::string image, text, proposals, image_id, overlay;
    bool live = false, json = false;

    void attach(CLI::App* app) {
        app->add_option("--image", image, "input PNG")->required();
        app->add_option("--text", text, "referring expression")->required();
        app->add_option("--proposals", proposals, "proposal cache file");
        app->add_option("--image-id", image_id, "defaults to the image file stem");
        app->add_option("--overlay", overlay, "write the winner overlay PNG here");
        app->add_flag("--live-proposals", live, "generate proposals when no cache is found");
        app->add_flag("--json", json, "machine-readable output");
        opts.attach(app);
    }

    int run(std::ostream& out, std::ostream& err) {
        const RunConfig cfg = opts.build();
        const Models models(cfg);
        const ImageData img = read_png(image);
        const std::string id = image_id.empty() ? fs::path(image).stem().string() : image_id;

        ProposalSource source;
        if (!proposals.empty()) {
            source.cache_path = proposals;
        } else if (auto dir = cache_dir_from_env()) {
            source.cache_path = proposal_cache_path(*dir, id);
        }
        FloodFillProposer live_provider;
        if (live) source.provider = &live_provider;
        const ProposalSet set = load_or_generate(img, id, source, cfg.proposals);

        const SegmentResult r =
            segment(img, text, set.proposals, models.components(), cfg.pipeline, id);
        for (const auto& w : r.warnings) err << "warning: " << w << '\n';
        if (!overlay.empty()) write_png(overlay, overlay_mask(img, r.winner));

        if (json) {
            nlohmann::json j{{"image_id", id},
                             {"expression", text},
                             {"config", cfg.to_json()},
                             {"result", to_json(r)}};
            j["overlay"] = overlay.empty() ? nlohmann::json(nullptr) : nlohmann::json(overlay);
            print_json(out, j);
            return kExitOk;
        }
        out << "image     " << id << "\nhead      " << r.parsed.head_phrase << '\n';
        for (const auto& rel : r.parsed.relations) {
            out << "relation  " << to_string(rel.type) << " -> " << rel.anchor_phrase << '\n';
        }
        for (auto c : r.parsed.position_cues) out << "position  " << to_string(c) << '\n';
        out << "scoring   " << (r.relational ? "relational" : "cosine") << ", lambda "
            << fmt("%g", r.lambda) << "\n\n";
        out << "index  semantic  sem_norm   spatial  spa_norm     final\n";
        for (const auto& row : r.table.rows) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "%5d %9.4f %9.4f %9.4f %9.4f %9.4f%s\n", row.index,
                          row.semantic_raw, row.semantic_norm, row.spatial_raw, row.spatial_norm,
                          row.final_score, row.index == r.table.winner_index ? "  *" : "");
            out << buf;
        }
        out << "\nwinner    " << r.table.winner_index << " (area " << r.winner.area() << ")\n";
        if (!overlay.empty()) out << "overlay   " << overlay << '\n';
        return kExitOk;
    }
};

struct EvaluateCmd {
    ConfigOptions opts;
    std::string dataset, proposals_dir, report;
    int workers = 1;
    bool live = false, json = false;

    void attach(CLI::App* app) {
        app->add_option("--dataset", dataset, "JSONL dataset")->required();
        app->add_option("--proposals-dir", proposals_dir,
                        "proposal caches; default $HYBRIDGL_CACHE_DIR, then <dataset dir>/proposals");
        app->add_option("--workers", workers, "parallel workers")->check(CLI::PositiveNumber);
        app->add_option("--report", report, "also write the JSON report here");
        app->add_flag("--live-proposals", live, "generate proposals when no cache is found");
        app->add_flag("--json", json, "machine-readable output");
        opts.attach(app);
    }

    int run(std::ostream& out) {
        const RunConfig cfg = opts.build();
        const Models models(cfg);
        const auto samples = load_dataset(dataset);

        ProposalLookup lookup;
        lookup.config = cfg.proposals;
        if (!proposals_dir.empty()) {
            lookup.cache_dir = fs::path(proposals_dir);
        } else if (auto dir = cache_dir_from_env()) {
            lookup.cache_dir = dir;
        } else if (fs::is_directory(fs::path(dataset).parent_path() / "proposals")) {
            lookup.cache_dir = fs::path(dataset).parent_path() / "proposals";
        }
        FloodFillProposer live_provider;
        if (live) lookup.provider = &live_provider;

        EvalReport r = evaluate(samples, lookup, models.components(), cfg.pipeline, workers);
        r.config = cfg.to_json();
        const nlohmann::json j = to_json(r);
        if (!report.empty()) {
            std::ofstream f(report, std::ios::binary);
            if (!f) throw Error("cannot write " + report);
            f << j.dump(2) << '\n';
        }
        if (json) {
            print_json(out, j);
        } else {
            out << format_table(r);
        }
        return kExitOk;
    }
};

struct ParseCmd {
    std::string text;
    bool json = false;

    void attach(CLI::App* app) {
        app->add_option("text,--text", text, "expression to parse")->required();
        app->add_flag("--json", json, "machine-readable output");
    }

    int run(std::ostream& out) {
        const ParsedExpression p = parse_expression(text);
        if (json) {
            print_json(out, to_json(p));
            return kExitOk;
        }
        out << "head      " << p.head_phrase << '\n';
        for (const auto& r : p.relations) {
            out << "relation  " << to_string(r.type) << " -> " << r.anchor_phrase << '\n';
        }
        for (auto c : p.position_cues) out << "position  " << to_string(c) << '\n';
        out << "size      " << to_string(p.size_cue) << '\n';
        return kExitOk;
    }
};

struct CacheProposalsCmd {
    ConfigOptions opts;
    std::string images, out_dir;
    bool json = false;

    void attach(CLI::App* app) {
        app->add_option("--images", images, "a PNG file or a directory of PNGs")->required();
        app->add_option("--out", out_dir, "cache directory; defaults to $HYBRIDGL_CACHE_DIR");
        app->add_flag("--json", json, "machine-readable output");
        opts.attach(app);
    }

    int run(std::ostream& out) {
        const RunConfig cfg = opts.build();
        fs::path dir;
        if (!out_dir.empty()) {
            dir = out_dir;
        } else if (auto env = cache_dir_from_env()) {
            dir = *env;
        } else {
            throw UsageError("--out is required when HYBRIDGL_CACHE_DIR is unset");
        }

        std::vector<fs::path> files;
        if (fs::is_directory(images)) {
            for (const auto& e : fs::directory_iterator(images)) {
                if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
        } else {
            files.emplace_back(images);
        }
        if (files.empty()) throw Error("no PNG images under " + images);

        fs::create_directories(dir);
        FloodFillProposer provider;
        nlohmann::json written = nlohmann::json::array();
        for (const auto& f : files) {
            const ImageData img = read_png(f);
            const std::string id = f.stem().string();
            ProposalSet set{id, img.height(), img.width(), provider.generate(img, cfg.proposals)};
            const fs::path path = proposal_cache_path(dir, id);
            write_proposal_cache(path, set);
            const size_t kept = filter(set.proposals, cfg.proposals).size();
            written.push_back({{"image_id", id},
                               {"path", path.string()},
                               {"generated", set.proposals.size()},
                               {"passing_filters", kept}});
            if (!json) {
                out << id << ": " << set.proposals.size() << " proposals (" << kept
                    << " pass the filters) -> " << path.string() << '\n';
            }
        }
        if (json) print_json(out, {{"images", std::move(written)}});
        return kExitOk;
    }
};

struct SynthCmd {
    int count = 200;
    std::uint64_t seed = 7;
    std::string out_dir;
    bool json = false;

    void attach(CLI::App* app) {
        app->add_option("--count", count, "number of scenes")->check(CLI::PositiveNumber);
        app->add_option("--seed", seed, "scene seed");
        app->add_option("--out", out_dir, "output directory")->required();
        app->add_flag("--json", json, "machine-readable output");
    }

    int run(std::ostream& out) {
        auto bundles = generate_scenes(count, seed);
        write_scenes(out_dir, bundles);
        size_t position = 0;
        for (const auto& b : bundles) position += b.scene.kind == SceneKind::Position ? 1 : 0;
        const fs::path dataset = fs::path(out_dir) / "dataset.jsonl";
        if (json) {
            print_json(out, {{"count", count},
                             {"seed", seed},
                             {"dataset", dataset.string()},
                             {"position_scenes", position},
                             {"relation_scenes", bundles.size() - position}});
        } else {
            out << "wrote " << bundles.size() << " scenes (" << position << " position, "
                << bundles.size() - position << " relation) to " << dataset.string() << '\n';
        }
        return kExitOk;
    }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Zero-shot referring segmentation over mask proposals"};
    app.name("hybridgl");
    app.require_subcommand(1);

    SegmentCmd segment_cmd;
    EvaluateCmd evaluate_cmd;
    ParseCmd parse_cmd;
    CacheProposalsCmd cache_cmd;
    SynthCmd synth_cmd;
    auto* seg = app.add_subcommand("segment", "pick the proposal an expression refers to");
    auto* eval = app.add_subcommand("evaluate", "oIoU / mIoU over a JSONL dataset");
    auto* par = app.add_subcommand("parse", "show how an expression is parsed");
    auto* cache = app.add_subcommand("cache-proposals", "generate and cache proposals for an image");
    auto* syn = app.add_subcommand("synth", "write seeded synthetic scenes");
    segment_cmd.attach(seg);
    evaluate_cmd.attach(eval);
    parse_cmd.attach(par);
    cache_cmd.attach(cache);
    synth_cmd.attach(syn);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (seg->parsed()) return segment_cmd.run(out, err);
        if (eval->parsed()) return evaluate_cmd.run(out);
        if (par->parsed()) return parse_cmd.run(out);
        if (cache->parsed()) return cache_cmd.run(out);
        if (syn->parsed()) return synth_cmd.run(out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"hybridgl"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace hybridgl
