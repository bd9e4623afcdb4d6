#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "hybridgl/pipeline.hpp"
#include "hybridgl/scenes.hpp"
#include "test_util.hpp"

using namespace hybridgl;

namespace {

std::vector<Sample> samples_of(const std::vector<SceneBundle>& bundles) {
    std::vector<Sample> out;
    for (const auto& b : bundles) out.push_back(b.sample);
    return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("metric examples") {
    std::vector<SampleResult> two(2);
    two[0] = {"a", "x", 2, 4, 0.5, 0, false, std::nullopt};
    two[1] = {"b", "x", 0, 4, 0.0, 1, false, std::nullopt};
    const auto r = aggregate(two);
    CHECK(r.oiou == 0.25);
    CHECK(r.miou == 0.25);
    CHECK(r.total_intersection == 2);
    CHECK(r.total_union == 8);

    std::vector<SampleResult> perfect(3);
    for (int i = 0; i < 3; ++i) perfect[static_cast<size_t>(i)] = {std::to_string(i), "x", 5, 5, 1.0, 0, true, std::nullopt};
    const auto p = aggregate(perfect);
    CHECK(p.oiou == 1.0);
    CHECK(p.miou == 1.0);
    CHECK(p.accuracy == 1.0);
}

TEST_CASE("single proposal always wins") {
    testutil::ToyStack stack;
    std::mt19937_64 rng(2);
    const ImageData img = testutil::random_image(rng, 32, 32);
    MaskProposal only{testutil::random_mask(rng, 32, 32), 0.9, 0.9, 0};
    for (const char* text : {"square", "the circle left of the triangle", "the bottom circle"}) {
        const auto r = segment(img, text, {only}, stack.components(), {});
        CHECK(r.winner == only.mask);
        CHECK(r.table.winner_index == 0);
    }
}

TEST_CASE("no proposals") {
    testutil::ToyStack stack;
    CHECK_THROWS_AS(segment(ImageData(16, 16), "dog", {}, stack.components(), {}, "img7"), NoProposalsError);
}

TEST_CASE("without spatial guidance the raw semantic argmax wins") {
    testutil::ToyStack stack;
    PipelineConfig cfg;
    cfg.guidance.alpha = 0.0;
    cfg.ablations.no_relations = true;
    const auto bundles = generate_scenes(20, 3);
    for (const auto& b : bundles) {
        const auto& props = b.proposals.proposals;
        const auto r = segment(b.scene.image, b.sample.expression, props, stack.components(), cfg);
        const auto resolved = cfg.hybrid.resolved_for(stack.encoder.spec());
        const FeatureVector t = encode_text(b.sample.expression, stack.text);
        std::vector<double> raw;
        for (const auto& p : props) raw.push_back(cosine(hybrid_encode(b.scene.image, p.mask, stack.encoder, resolved), t));
        CHECK(r.winner == props[static_cast<size_t>(argmax(raw))].mask);
    }
}

TEST_CASE("prompt template reaches the text encoder") {
    struct Recording final : TextEncoder {
        mutable std::vector<std::string> seen;
        ToyTextEncoder inner;
        FeatureVector encode_text(std::string_view t) const override {
            seen.emplace_back(t);
            return inner.encode_text(t);
        }
    } text;
    testutil::ToyStack stack;
    const Components c{stack.encoder, text, &stack.localizer, stack.parser};
    const auto b = generate_scenes(1, 1).front();
    PipelineConfig cfg;
    cfg.text_template = "a photo of {}";
    segment(b.scene.image, "the circle left of the square", b.proposals.proposals, c, cfg);
    REQUIRE(!text.seen.empty());
    for (const auto& s : text.seen) CHECK(s.rfind("a photo of ", 0) == 0);
}

TEST_CASE("coherence failures") {
    struct Broken final : LocalizationProvider {
        RealMap locate(const ImageData&, std::string_view) const override { throw Error("offline"); }
    } broken;
    testutil::ToyStack stack;
    const Components c{stack.encoder, stack.text, &broken, stack.parser};
    const auto b = generate_scenes(1, 1).front();
    CHECK_THROWS_AS(segment(b.scene.image, b.sample.expression, b.proposals.proposals, c, {}), Error);
    PipelineConfig cfg;
    cfg.coherence_fallback = true;
    const auto r = segment(b.scene.image, b.sample.expression, b.proposals.proposals, c, cfg);
    CHECK(r.warnings.size() == 1);
}

TEST_CASE("square on the left") {
    testutil::ToyStack stack;
    const auto bundles = generate_scenes(200, 7);
    int seen = 0;
    for (const auto& b : bundles) {
        if (b.sample.expression != "the square on the left") continue;
        ++seen;
        const auto r = segment(b.scene.image, b.sample.expression, b.proposals.proposals, stack.components(), {});
        const SceneShape* best = nullptr;
        for (const auto& s : b.scene.shapes) {
            if (s.kind == ShapeKind::Square && (!best || s.box.x_min + s.box.x_max < best->box.x_min + best->box.x_max)) best = &s;
        }
        REQUIRE(best);
        CHECK(r.winner == best->mask);
    }
    CHECK(seen > 0);
}

TEST_CASE("scenes are deterministic and unambiguous") {
    const auto a = generate_scenes(60, 11);
    const auto b = generate_scenes(60, 11);
    REQUIRE(a.size() == 60);
    std::set<std::string> ids;
    RuleBasedParser parser;
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].sample.expression == b[i].sample.expression);
        CHECK(std::equal(a[i].scene.image.pixels().begin(), a[i].scene.image.pixels().end(), b[i].scene.image.pixels().begin()));
        ids.insert(a[i].sample.image_id);

        const auto sat = satisfying_shapes(a[i].scene, parser.parse(a[i].sample.expression));
        REQUIRE(sat.size() == 1);
        CHECK(sat[0] == a[i].scene.target);
        CHECK(a[i].sample.gt_mask == a[i].scene.shapes[static_cast<size_t>(a[i].scene.target)].mask);

        const auto kept = filter(a[i].proposals.proposals, {});
        int exact = 0;
        for (const auto& p : kept) exact += p.mask == a[i].sample.gt_mask;
        CHECK(exact == 1);
        CHECK(kept.size() > 1);
    }
    CHECK(ids.size() == 60);
}

TEST_CASE("evaluation invariances") {
    testutil::ToyStack stack;
    auto bundles = generate_scenes(24, 5);
    testutil::TempDir dir("eval");
    write_scenes(dir.path(), bundles);
    const auto dataset = load_dataset(dir / "dataset.jsonl");
    REQUIRE(dataset.size() == 24);
    const ProposalLookup lookup{dir / "proposals", nullptr, {}};

    const auto base = to_json(evaluate(dataset, lookup, stack.components(), {}, 1)).dump();
    CHECK(to_json(evaluate(dataset, lookup, stack.components(), {}, 4)).dump() == base);
    auto shuffled = dataset;
    std::mt19937_64 rng(9);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(to_json(evaluate(shuffled, lookup, stack.components(), {}, 3)).dump() == base);

    const auto in_memory = evaluate(samples_of(bundles), lookup, stack.components(), {}, 2);
    CHECK(to_json(in_memory).dump() == base);
}

TEST_CASE("failed samples score zero") {
    testutil::ToyStack stack;
    auto bundles = generate_scenes(4, 2);
    testutil::TempDir dir("eval_fail");
    write_scenes(dir.path(), bundles);
    std::filesystem::remove(dir / "proposals" / (bundles[1].sample.image_id + ".proposals.json"));
    const auto dataset = load_dataset(dir / "dataset.jsonl");
    const auto r = evaluate(dataset, {dir / "proposals", nullptr, {}}, stack.components(), {}, 2);
    CHECK(r.failures == 1);
    CHECK(r.samples.size() == 4);
    for (const auto& s : r.samples) {
        if (s.image_id == bundles[1].sample.image_id) {
            CHECK(s.error.has_value());
            CHECK(s.iou == 0.0);
            CHECK(s.union_area == s.intersection + bundles[1].sample.gt_mask.area());
        }
    }
}

TEST_CASE("dataset errors carry the line") {
    testutil::TempDir dir("dataset_bad");
    std::ofstream(dir / "d.jsonl") << "{\"image_id\": \"a\"}\n";
    try {
        load_dataset(dir / "d.jsonl");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find(":1") != std::string::npos);
    }
}

TEST_CASE("ablation names") {
    Ablations a;
    a.set("no-relations");
    a.set("no-position");
    CHECK(a.names() == std::vector<std::string>{"no-position", "no-relations"});
    CHECK_THROWS_AS(a.set("no-everything"), Error);
}

}
