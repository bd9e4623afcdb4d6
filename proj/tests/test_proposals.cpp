#include <doctest.h>

#include <fstream>
#include <random>

#include "hybridgl/proposals.hpp"
#include "test_util.hpp"

using namespace hybridgl;

namespace {

MaskProposal prop(const BinaryMask& m, double iou, double stab) { return {m, iou, stab, -1}; }

BinaryMask box(int h, int w, int y0, int x0, int y1, int x1) {
    BinaryMask m(h, w);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) m.set(y, x, true);
    }
    return m;
}

}  // namespace

TEST_SUITE("proposals") {

TEST_CASE("quality gates") {
    const ProposalGenConfig cfg;
    const BinaryMask m = box(8, 8, 0, 0, 3, 3);
    CHECK(filter({prop(m, 0.65, 0.9)}, cfg).empty());
    CHECK(filter({prop(m, 0.9, 0.5)}, cfg).empty());
    CHECK(filter({prop(m, 0.7, 0.7)}, cfg).size() == 1);
    CHECK(filter({prop(BinaryMask(8, 8), 0.9, 0.9)}, cfg).empty());
}

TEST_CASE("duplicates keep the higher predicted iou") {
    const BinaryMask m = box(8, 8, 1, 1, 4, 4);
    const auto out = filter({prop(m, 0.8, 0.9), prop(m, 0.95, 0.75)}, {});
    REQUIRE(out.size() == 1);
    CHECK(out[0].predicted_iou == 0.95);
    CHECK(out[0].index == 0);
}

TEST_CASE("filter is idempotent") {
    std::mt19937_64 rng(21);
    std::vector<MaskProposal> in;
    std::uniform_real_distribution<double> score(0.5, 1.0);
    for (int i = 0; i < 40; ++i) in.push_back(prop(testutil::random_mask(rng, 10, 10), score(rng), score(rng)));
    const auto once = filter(in, {});
    const auto twice = filter(once, {});
    REQUIRE(once.size() == twice.size());
    for (size_t i = 0; i < once.size(); ++i) {
        CHECK(once[i].mask == twice[i].mask);
        CHECK(once[i].predicted_iou == twice[i].predicted_iou);
        CHECK(once[i].index == twice[i].index);
    }
}

TEST_CASE("cache round trip and double ingestion") {
    testutil::TempDir dir("proposals");
    std::mt19937_64 rng(8);
    ProposalSet set{"img", 10, 12, {}};
    for (int i = 0; i < 6; ++i) set.proposals.push_back(prop(testutil::random_mask(rng, 10, 12), 0.8 + 0.01 * i, 0.9));
    const auto path = proposal_cache_path(dir.path(), "img");
    CHECK(path.filename() == "img.proposals.json");
    write_proposal_cache(path, set);

    const auto back = read_proposal_cache(path);
    CHECK(back.image_id == "img");
    REQUIRE(back.proposals.size() == set.proposals.size());
    for (size_t i = 0; i < set.proposals.size(); ++i) {
        CHECK(back.proposals[i].mask == set.proposals[i].mask);
        CHECK(back.proposals[i].predicted_iou == set.proposals[i].predicted_iou);
    }

    const ImageData image(10, 12);
    const auto a = load_or_generate(image, "img", {path, nullptr}, {});
    const auto b = load_or_generate(image, "img", {path, nullptr}, {});
    REQUIRE(a.proposals.size() == b.proposals.size());
    for (size_t i = 0; i < a.proposals.size(); ++i) {
        CHECK(a.proposals[i].mask == b.proposals[i].mask);
        CHECK(a.proposals[i].index == b.proposals[i].index);
    }
}

TEST_CASE("empty cache file gives an empty set") {
    testutil::TempDir dir("proposals_empty");
    const auto path = dir / "blank.proposals.json";
    std::ofstream(path).close();
    const auto set = read_proposal_cache(path);
    CHECK(set.proposals.empty());
    CHECK(set.image_id == "blank");
    CHECK(load_or_generate(ImageData(4, 4), "blank", {path, nullptr}, {}).proposals.empty());
}

TEST_CASE("missing cache without provider is an error") {
    testutil::TempDir dir("proposals_missing");
    CHECK_THROWS_AS(load_or_generate(ImageData(4, 4), "x", {dir / "x.proposals.json", nullptr}, {}), Error);
}

TEST_CASE("shape mismatch names the proposal") {
    testutil::TempDir dir("proposals_shape");
    const auto path = dir / "s.proposals.json";
    write_proposal_cache(path, {"s", 8, 8, {prop(box(8, 8, 0, 0, 2, 2), 0.9, 0.9), prop(box(6, 8, 0, 0, 2, 2), 0.9, 0.9)}});
    try {
        load_or_generate(ImageData(8, 8), "s", {path, nullptr}, {});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("proposal 1") != std::string::npos);
    }
}

TEST_CASE("malformed cache is an error") {
    testutil::TempDir dir("proposals_bad");
    const auto path = dir / "b.proposals.json";
    std::ofstream(path) << "{\"image_id\": 3}";
    CHECK_THROWS_AS(read_proposal_cache(path), Error);
}

TEST_CASE("flood fill finds flat regions") {
    ImageData img(16, 16);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            const bool inside = y >= 4 && y < 12 && x >= 4 && x < 12;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = inside ? 200 : 10;
        }
    }
    FloodFillProposer proposer;
    const auto out = filter(proposer.generate(img, {}), {});
    const BinaryMask square = box(16, 16, 4, 4, 11, 11);
    bool found = false;
    for (const auto& p : out) found |= p.mask == square;
    CHECK(found);
}

TEST_CASE("config validation") {
    ProposalGenConfig cfg;
    cfg.predicted_iou_threshold = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.points_per_side = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

}
