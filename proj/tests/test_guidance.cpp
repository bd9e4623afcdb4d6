#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "hybridgl/guidance.hpp"
#include "hybridgl/pipeline.hpp"
#include "hybridgl/toy_encoder.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hybridgl;

namespace {

BinaryMask rect(int h, int w, int y0, int x0, int y1, int x1) {
    return oracle::box_mask(h, w, {x0, y0, x1, y1});
}

/// Filled shape of a toy concept centred in a 16 px cell of a 64 px canvas.
BinaryMask draw(ImageData& img, size_t concept_index, int row, int col) {
    BinaryMask m(64, 64);
    const int cy = row * 16 + 8, cx = col * 16 + 8;
    for (int y = row * 16 + 2; y < row * 16 + 14; ++y) {
        for (int x = col * 16 + 2; x < col * 16 + 14; ++x) {
            const int dy = y - cy, dx = x - cx;
            bool on = false;
            switch (concept_index) {
                case 0: on = dy * dy + dx * dx <= 36; break;
                case 1: on = true; break;
                default: on = std::abs(dx) <= (y - (row * 16 + 2)) / 2; break;
            }
            if (!on) continue;
            m.set(y, x, true);
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = toy_concepts()[concept_index].color[static_cast<size_t>(c)];
        }
    }
    return m;
}

}  // namespace

TEST_SUITE("guidance") {

TEST_CASE("relation examples") {
    const BinaryMask s = rect(20, 60, 5, 8, 9, 12);    // center x 10
    const BinaryMask a = rect(20, 60, 5, 48, 9, 52);   // center x 50
    CHECK(relation_holds(RelationType::Left, s, a) == 1);
    CHECK(relation_holds(RelationType::Right, s, a) == 0);
    const BinaryMask inner = rect(20, 60, 2, 2, 4, 4);
    const BinaryMask outer = rect(20, 60, 0, 0, 10, 10);
    CHECK(relation_holds(RelationType::Within, inner, outer) == 1);
    CHECK(relation_holds(RelationType::Within, outer, inner) == 0);
    CHECK(relation_holds(RelationType::Smaller, inner, outer) == 1);
    CHECK(relation_holds(RelationType::Bigger, outer, inner) == 1);
}

TEST_CASE("relations match box geometry and are antisymmetric") {
    std::mt19937_64 rng(31);
    const int h = 40, w = 40;
    std::uniform_int_distribution<int> coord(0, 39);
    for (int i = 0; i < 1000; ++i) {
        auto random_box = [&] {
            int x0 = coord(rng), x1 = coord(rng), y0 = coord(rng), y1 = coord(rng);
            return oracle::Box{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
        };
        const oracle::Box bs = random_box(), ba = random_box();
        const BinaryMask ms = oracle::box_mask(h, w, bs), ma = oracle::box_mask(h, w, ba);
        for (auto r : {RelationType::Left, RelationType::Right, RelationType::Top, RelationType::Bottom,
                       RelationType::Within, RelationType::Smaller, RelationType::Bigger}) {
            REQUIRE(relation_holds(r, ms, ma) == oracle::relation(r, bs, ba));
        }
        if (bs.cx() != ba.cx()) {
            CHECK(relation_holds(RelationType::Left, ms, ma) == relation_holds(RelationType::Right, ma, ms));
            CHECK(relation_holds(RelationType::Left, ms, ma) != relation_holds(RelationType::Left, ma, ms));
        }
        if (bs.area() != ba.area()) {
            CHECK(relation_holds(RelationType::Smaller, ms, ma) == relation_holds(RelationType::Bigger, ma, ms));
        }
    }
}

TEST_CASE("softmax") {
    const auto p = softmax({1.0, 2.0, 3.0});
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[2] > p[1]);
    const auto big = softmax({1000.0, 1000.0});
    CHECK(big[0] == 0.5);
    const auto k = topk_softmax({0.1, 0.9, 0.5, 0.9}, 2);
    CHECK(k[0] == 0.0);
    CHECK(k[2] == 0.0);
    CHECK(k[1] == doctest::Approx(0.5));
}

TEST_CASE("relational combination") {
    RelationTerm term{{{0, 1}, {0, 0}}, {0.3, 0.7}};
    const auto s = combine_relational({0.6, 0.4}, {term});
    CHECK(s[0] == doctest::Approx(0.42).epsilon(1e-12));
    CHECK(s[1] == 0.0);
    RelationTerm none{{{0, 0}, {0, 0}}, {0.3, 0.7}};
    const auto z = combine_relational({0.6, 0.4}, {none});
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
}

TEST_CASE("coherence normalization") {
    const RealMap flat{4, 4, std::vector<double>(16, 3.2)};
    const auto half = normalize_coherence(flat, 8, 8);
    for (double v : half.values) CHECK(v == 0.5);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RealMap raw{4, 4, {}};
    for (int i = 0; i < 16; ++i) raw.values.push_back(u(rng));
    const double lo = *std::min_element(raw.values.begin(), raw.values.end());
    const double hi = *std::max_element(raw.values.begin(), raw.values.end());
    const auto g = normalize_coherence(raw, 64, 64, Upsampling::Nearest);
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            REQUIRE(g.at(y, x) == doctest::Approx((raw.at(y / 16, x / 16) - lo) / (hi - lo)).epsilon(1e-12));
        }
    }
    const auto b = normalize_coherence(raw, 64, 64, Upsampling::Bilinear);
    CHECK(*std::min_element(b.values.begin(), b.values.end()) == 0.0);
    CHECK(*std::max_element(b.values.begin(), b.values.end()) == 1.0);
}

TEST_CASE("toy coherence upsamples token similarities") {
    testutil::ToyStack stack;
    ImageData img(64, 64);
    draw(img, 0, 1, 2);
    const RealMap raw = stack.localizer.locate(img, "circle");
    CHECK(raw.height == 4);
    const auto g = coherence_map(img, "circle", stack.localizer);
    const double lo = *std::min_element(raw.values.begin(), raw.values.end());
    const double hi = *std::max_element(raw.values.begin(), raw.values.end());
    for (int y = 0; y < 64; y += 3) {
        for (int x = 0; x < 64; x += 3) {
            CHECK(g.at(y, x) == doctest::Approx((raw.at(y / 16, x / 16) - lo) / (hi - lo)).epsilon(1e-12));
        }
    }
    CHECK(g.at(24, 40) == 1.0);
}

TEST_CASE("ground truth heatmap") {
    struct Oracle final : LocalizationProvider {
        RealMap locate(const ImageData&, std::string_view) const override {
            RealMap m{8, 8, std::vector<double>(64, 0.0)};
            m.values[3 * 8 + 4] = 5.0;
            return m;
        }
    } provider;
    const auto g = coherence_map(ImageData(8, 8), "x", provider);
    CHECK(g.at(3, 4) == 1.0);
    CHECK(*std::max_element(g.values.begin(), g.values.end()) == 1.0);
}

TEST_CASE("position maps") {
    const auto none = position_map(std::nullopt, 5, 7);
    for (double v : none.values) CHECK(v == 1.0);
    const auto left = position_map(PositionCue::Left, 5, 7);
    CHECK(left.at(2, 0) == 1.0);
    CHECK(left.at(2, 6) == 0.0);
    const auto bottom = position_map(PositionCue::Bottom, 5, 7);
    CHECK(bottom.at(4, 3) == 1.0);
    CHECK(bottom.at(0, 3) == 0.0);
    const auto mid = position_map(PositionCue::Middle, 7, 9);
    int maxima = 0;
    for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 9; ++x) maxima += mid.at(y, x) == 1.0;
    }
    CHECK(maxima == 1);
    CHECK(mid.at(3, 4) == 1.0);
}

TEST_CASE("composition") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GuidanceMap co{6, 9, {}, GuidanceKind::Coherence};
    for (int i = 0; i < 54; ++i) co.values.push_back(u(rng));
    CHECK(compose_guidance(co, {}).values == co.values);

    const auto ones = GuidanceMap::filled(6, 9, 1.0, GuidanceKind::Coherence);
    CHECK(compose_guidance(ones, {PositionCue::Left}).values == position_map(PositionCue::Left, 6, 9).values);

    const auto both = compose_guidance(co, {PositionCue::Left, PositionCue::Top});
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 9; ++x) {
            CHECK(both.at(y, x) == doctest::Approx(co.at(y, x) * (1.0 - x / 8.0) * (1.0 - y / 5.0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("spatial score") {
    const auto ones = GuidanceMap::filled(10, 10, 1.0, GuidanceKind::Combined);
    const BinaryMask sub = rect(10, 10, 2, 2, 5, 5);
    CHECK(spatial_score(ones, sub, 9.0) == -8.0);
    CHECK(spatial_score(ones, BinaryMask(10, 10, true), 9.0) == 1.0);

    GuidanceMap indicator{10, 10, {}, GuidanceKind::Combined};
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) indicator.values.push_back(sub.at(y, x) ? 1.0 : 0.0);
    }
    CHECK(spatial_score(indicator, sub, 37.0) == 1.0);

    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        GuidanceMap g{12, 15, {}, GuidanceKind::Combined};
        for (int k = 0; k < 180; ++k) g.values.push_back(u(rng));
        const BinaryMask m = testutil::random_mask(rng, 12, 15);
        const double lambda = 20.0 * u(rng);
        CHECK(std::abs(spatial_score(g, m, lambda) - oracle::spatial_score(g.values, m, lambda)) < 1e-9);
    }
    CHECK_THROWS_AS(spatial_score(ones, BinaryMask(10, 10), 9.0), Error);
}

TEST_CASE("fusion") {
    const auto t = fuse_scores({std::log(0.7), std::log(0.3)}, {std::log(0.2), std::log(0.8)}, 0.6);
    CHECK(t.rows[0].semantic_norm == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(t.rows[1].spatial_norm == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(t.rows[0].final_score == doctest::Approx(0.40).epsilon(1e-12));
    CHECK(t.rows[1].final_score == doctest::Approx(0.60).epsilon(1e-12));
    CHECK(t.winner_index == 1);

    CHECK(fuse_scores({0.3, 0.9, 0.1}, {5.0, 1.0, 0.0}, 0.0).winner_index == 1);
    CHECK(fuse_scores({0.3, 0.9, 0.1}, {5.0, 1.0, 0.0}, 1.0).winner_index == 0);
    CHECK(argmax({1.0, 3.0, 3.0}) == 1);
    CHECK_THROWS_AS(fuse_scores({1.0}, {1.0, 2.0}, 0.5), Error);
}

TEST_CASE("circle right of square") {
    testutil::ToyStack stack;
    ImageData img(64, 64);
    for (auto& p : img.pixels()) p = 16;
    std::vector<MaskProposal> props;
    // (concept, row, col): two circles either side of one square, a triangle.
    const int layout[4][3] = {{0, 0, 0}, {1, 1, 1}, {0, 2, 3}, {2, 3, 2}};
    for (const auto& s : layout) {
        props.push_back({draw(img, static_cast<size_t>(s[0]), s[1], s[2]), 0.95, 0.95, -1});
    }
    // Exhaustive answer: circles whose center lies right of some square.
    std::vector<int> expected;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            if (layout[i][0] == 0 && layout[j][0] == 1 && layout[i][2] > layout[j][2]) expected.push_back(i);
        }
    }
    REQUIRE(expected.size() == 1);
    const BinaryMask want = props[static_cast<size_t>(expected[0])].mask;

    canonical_order(props);
    const auto r = segment(img, "circle right of square", props, stack.components(), {});
    CHECK(r.relational);
    CHECK(r.winner == want);
}

}
