#include "hybridgl/scenes.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include "hybridgl/guidance.hpp"
#include "hybridgl/image_io.hpp"

namespace hybridgl {

std::string to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::Circle: return "circle";
        case ShapeKind::Square: return "square";
        case ShapeKind::Triangle: return "triangle";
    }
    throw Error("unknown shape kind");
}

namespace {

constexpr int kGrid = kSceneSide / kSceneCell;
constexpr int kInset = 2;
constexpr std::array<std::uint8_t, 3> kBackground{16, 16, 16};

std::array<std::uint8_t, 3> color_of(ShapeKind k) {
    switch (k) {
        case ShapeKind::Circle: return {220, 40, 40};
        case ShapeKind::Square: return {40, 200, 40};
        case ShapeKind::Triangle: return {40, 40, 220};
    }
    return kBackground;
}

// Plain modulo draws keep the stream identical across standard libraries.
struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    int below(int n) { return static_cast<int>(engine() % static_cast<std::uint64_t>(n)); }
    double unit() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
    bool coin() { return below(2) == 1; }
    template <class T>
    const T& pick(const std::vector<T>& v) { return v[static_cast<size_t>(below(static_cast<int>(v.size())))]; }
};

bool inside_shape(ShapeKind kind, const BoundingBox& b, int y, int x) {
    const int x0 = b.x_min + kInset, x1 = b.x_max - kInset;
    const int y0 = b.y_min + kInset, y1 = b.y_max - kInset;
    if (x < x0 || x > x1 || y < y0 || y > y1) return false;
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    switch (kind) {
        case ShapeKind::Square: return true;
        case ShapeKind::Circle: {
            const double r = 0.5 * (x1 - x0) + 0.5;
            return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
        }
        case ShapeKind::Triangle: {
            const double t = (y - y0 + 1.0) / (y1 - y0 + 1.0);
            return std::abs(x - cx) <= t * (0.5 * (x1 - x0) + 0.5);
        }
    }
    return false;
}

SceneShape make_shape(ShapeKind kind, int row, int col) {
    SceneShape s{kind,
                 {col * kSceneCell, row * kSceneCell, (col + 1) * kSceneCell - 1,
                  (row + 1) * kSceneCell - 1},
                 BinaryMask(kSceneSide, kSceneSide)};
    for (int y = s.box.y_min; y <= s.box.y_max; ++y) {
        for (int x = s.box.x_min; x <= s.box.x_max; ++x) {
            if (inside_shape(kind, s.box, y, x)) s.mask.set(y, x, true);
        }
    }
    return s;
}

ImageData render(const std::vector<SceneShape>& shapes) {
    ImageData img(kSceneSide, kSceneSide);
    for (int y = 0; y < kSceneSide; ++y) {
        for (int x = 0; x < kSceneSide; ++x) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = kBackground[c];
        }
    }
    for (const auto& s : shapes) {
        const auto col = color_of(s.kind);
        for (int y = s.box.y_min; y <= s.box.y_max; ++y) {
            for (int x = s.box.x_min; x <= s.box.x_max; ++x) {
                if (!s.mask.at(y, x)) continue;
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
            }
        }
    }
    return img;
}

struct Cells {
    std::array<bool, kGrid * kGrid> used{};
    bool free(int r, int c) const { return !used[r * kGrid + c]; }
    void take(int r, int c) { used[r * kGrid + c] = true; }
};

std::vector<ShapeKind> other_kinds(ShapeKind a, std::optional<ShapeKind> b = std::nullopt) {
    std::vector<ShapeKind> out;
    for (auto k : {ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle}) {
        if (k != a && (!b || k != *b)) out.push_back(k);
    }
    return out;
}

void add_fillers(Rng& rng, Cells& cells, std::vector<SceneShape>& shapes,
                 const std::vector<ShapeKind>& kinds, int count) {
    std::vector<std::pair<int, int>> free;
    for (int r = 0; r < kGrid; ++r) {
        for (int c = 0; c < kGrid; ++c) {
            if (cells.free(r, c)) free.emplace_back(r, c);
        }
    }
    for (int i = 0; i < count && !free.empty(); ++i) {
        const size_t at = static_cast<size_t>(rng.below(static_cast<int>(free.size())));
        const auto [r, c] = free[at];
        free.erase(free.begin() + static_cast<std::ptrdiff_t>(at));
        cells.take(r, c);
        shapes.push_back(make_shape(rng.pick(kinds), r, c));
    }
}

// Target and one same-kind sibling separated by >= 2 cells along the cue's
// axis, the target on the cued side.
SyntheticScene position_scene(Rng& rng) {
    SyntheticScene s;
    s.kind = SceneKind::Position;
    const ShapeKind kind = static_cast<ShapeKind>(rng.below(3));
    const PositionCue cue = rng.pick(std::vector<PositionCue>{
        PositionCue::Left, PositionCue::Right, PositionCue::Top, PositionCue::Bottom});
    const bool horizontal = cue == PositionCue::Left || cue == PositionCue::Right;
    const bool low_side = cue == PositionCue::Left || cue == PositionCue::Top;

    int near = rng.below(kGrid - 2);
    int far = near + 2 + rng.below(kGrid - near - 2);
    if (!low_side) std::swap(near, far);
    const int cross_t = rng.below(kGrid), cross_s = rng.below(kGrid);

    Cells cells;
    auto place = [&](int along, int cross) {
        const int r = horizontal ? cross : along, c = horizontal ? along : cross;
        cells.take(r, c);
        s.shapes.push_back(make_shape(kind, r, c));
    };
    place(near, cross_t);
    place(far, cross_s);
    s.target = 0;
    add_fillers(rng, cells, s.shapes, other_kinds(kind), rng.below(3));

    const std::string k = to_string(kind);
    const std::string d = to_string(cue);
    std::vector<std::string> templates;
    if (horizontal) {
        templates = {"the " + k + " on the " + d, d + " " + k, "the " + d + "most " + k,
                     "the " + k + " on the " + d + " side"};
    } else {
        const std::string adj = cue == PositionCue::Top ? "upper" : "lower";
        templates = {"the " + k + " at the " + d, d + " " + k, "the " + adj + " " + k,
                     "the " + k + " at the " + d + " of the image"};
    }
    s.expression = rng.pick(templates);
    return s;
}

// Two subjects on opposite sides of a single anchor; only the target stands
// in the relation to it.
SyntheticScene relation_scene(Rng& rng) {
    SyntheticScene s;
    s.kind = SceneKind::Relation;
    const ShapeKind subject = static_cast<ShapeKind>(rng.below(3));
    const ShapeKind anchor = rng.pick(other_kinds(subject));
    const RelationType rel = rng.pick(std::vector<RelationType>{
        RelationType::Left, RelationType::Right, RelationType::Top, RelationType::Bottom});
    const bool horizontal = rel == RelationType::Left || rel == RelationType::Right;
    const bool low_side = rel == RelationType::Left || rel == RelationType::Top;

    const int a = 1 + rng.below(kGrid - 2);
    int t = rng.below(a);
    int o = a + 1 + rng.below(kGrid - a - 1);
    if (!low_side) std::swap(t, o);

    Cells cells;
    auto place = [&](ShapeKind kind, int along, int cross) {
        const int r = horizontal ? cross : along, c = horizontal ? along : cross;
        cells.take(r, c);
        s.shapes.push_back(make_shape(kind, r, c));
    };
    place(subject, t, rng.below(kGrid));
    place(anchor, a, rng.below(kGrid));
    place(subject, o, rng.below(kGrid));
    s.target = 0;
    add_fillers(rng, cells, s.shapes, other_kinds(subject, anchor), rng.below(2));

    const std::string sk = to_string(subject), ak = to_string(anchor);
    std::vector<std::string> templates;
    switch (rel) {
        case RelationType::Left:
        case RelationType::Right: {
            const std::string d = to_string(rel);
            templates = {"the " + sk + " " + d + " of the " + ak,
                         "the " + sk + " to the " + d + " of the " + ak};
            break;
        }
        case RelationType::Top:
            templates = {"the " + sk + " above the " + ak, "the " + sk + " over the " + ak};
            break;
        default:
            templates = {"the " + sk + " below the " + ak, "the " + sk + " under the " + ak};
            break;
    }
    s.expression = rng.pick(templates);
    return s;
}

BinaryMask union_of(const BinaryMask& a, const BinaryMask& b) {
    BinaryMask out(a.height(), a.width());
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) out.set(y, x, a.at(y, x) || b.at(y, x));
    }
    return out;
}

// Half of a shape: 0 left, 1 right, 2 top, 3 bottom.
BinaryMask crop_of(const SceneShape& s, int side) {
    BinaryMask out(s.mask.height(), s.mask.width());
    const double mx = 0.5 * (s.box.x_min + s.box.x_max), my = 0.5 * (s.box.y_min + s.box.y_max);
    for (int y = s.box.y_min; y <= s.box.y_max; ++y) {
        for (int x = s.box.x_min; x <= s.box.x_max; ++x) {
            if (!s.mask.at(y, x)) continue;
            const bool keep = side == 0 ? x < mx : side == 1 ? x > mx : side == 2 ? y < my : y > my;
            if (keep) out.set(y, x, true);
        }
    }
    return out;
}

std::vector<MaskProposal> make_proposals(Rng& rng, const SyntheticScene& s) {
    std::vector<MaskProposal> out;
    auto score = [&](double lo) { return lo + (0.99 - lo) * rng.unit(); };
    for (const auto& shape : s.shapes) out.push_back({shape.mask, score(0.9), score(0.9), -1});

    auto is_gt = [&](const BinaryMask& m) {
        return std::any_of(s.shapes.begin(), s.shapes.end(),
                           [&](const SceneShape& sh) { return sh.mask == m; });
    };
    auto add_distractor = [&](BinaryMask m) {
        if (m.empty_mask() || is_gt(m)) return;
        out.push_back({std::move(m), score(0.75), score(0.75), -1});
    };

    // In relation scenes the union of the two subjects sits between them and
    // would satisfy or fail the relation by accident, so it is left out.
    const int n = static_cast<int>(s.shapes.size());
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const bool subjects = s.kind == SceneKind::Relation &&
                                  s.shapes[i].kind == s.shapes[s.target].kind &&
                                  s.shapes[j].kind == s.shapes[s.target].kind;
            if (!subjects) pairs.emplace_back(i, j);
        }
    }
    const int n_unions = std::min<int>(3, static_cast<int>(pairs.size()));
    for (int u = 0; u < n_unions; ++u) {
        const size_t at = static_cast<size_t>(rng.below(static_cast<int>(pairs.size())));
        const auto [i, j] = pairs[at];
        pairs.erase(pairs.begin() + static_cast<std::ptrdiff_t>(at));
        add_distractor(union_of(s.shapes[i].mask, s.shapes[j].mask));
    }
    for (const auto& shape : s.shapes) {
        if (rng.coin()) add_distractor(crop_of(shape, rng.below(4)));
    }

    // A low-quality blob that the proposal gates are expected to drop.
    BinaryMask blob(kSceneSide, kSceneSide);
    const int y0 = rng.below(kSceneSide - 8), x0 = rng.below(kSceneSide - 8);
    for (int y = y0; y < y0 + 8; ++y) {
        for (int x = x0; x < x0 + 8; ++x) blob.set(y, x, true);
    }
    if (!is_gt(blob)) out.push_back({blob, 0.3 + 0.3 * rng.unit(), score(0.75), -1});

    for (size_t i = 0; i < out.size(); ++i) out[i].index = static_cast<int>(i);
    return out;
}

std::optional<ShapeKind> kind_in(const std::string& phrase) {
    std::optional<ShapeKind> found;
    size_t best = std::string::npos;
    for (auto k : {ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle}) {
        const size_t at = phrase.find(to_string(k));
        if (at != std::string::npos && at < best) {
            best = at;
            found = k;
        }
    }
    return found;
}

}  // namespace

std::vector<int> satisfying_shapes(const SyntheticScene& scene, const ParsedExpression& parsed) {
    const auto head = kind_in(parsed.head_phrase);
    if (!head) return {};
    std::vector<int> same;
    for (size_t i = 0; i < scene.shapes.size(); ++i) {
        if (scene.shapes[i].kind == *head) same.push_back(static_cast<int>(i));
    }
    auto center = [&](int i) { return bbox_and_center(scene.shapes[static_cast<size_t>(i)].mask).center; };

    std::vector<int> out;
    for (int i : same) {
        bool ok = true;
        for (auto cue : parsed.position_cues) {
            for (int j : same) {
                if (j == i) continue;
                const Point2 a = center(i), b = center(j);
                switch (cue) {
                    case PositionCue::Left: ok = ok && a.x < b.x; break;
                    case PositionCue::Right: ok = ok && a.x > b.x; break;
                    case PositionCue::Top: ok = ok && a.y < b.y; break;
                    case PositionCue::Bottom: ok = ok && a.y > b.y; break;
                    case PositionCue::Middle: ok = false; break;
                }
            }
        }
        for (const auto& rel : parsed.relations) {
            const auto anchor_kind = kind_in(rel.anchor_phrase);
            bool any = false;
            for (size_t j = 0; anchor_kind && j < scene.shapes.size(); ++j) {
                if (static_cast<int>(j) == i || scene.shapes[j].kind != *anchor_kind) continue;
                any = any || relation_holds(rel.type, scene.shapes[static_cast<size_t>(i)].mask,
                                            scene.shapes[j].mask) == 1;
            }
            ok = ok && any;
        }
        if (ok) out.push_back(i);
    }
    return out;
}

std::vector<SceneBundle> generate_scenes(int count, std::uint64_t seed) {
    if (count < 1) throw Error("scene count must be >= 1");
    Rng rng(seed);
    std::vector<SceneBundle> out;
    out.reserve(static_cast<size_t>(count));
    for (int n = 0; n < count; ++n) {
        SyntheticScene scene = rng.coin() ? relation_scene(rng) : position_scene(rng);
        char id[32];
        std::snprintf(id, sizeof id, "scene_%04d", n);
        scene.image_id = id;
        scene.image = render(scene.shapes);

        SceneBundle b;
        b.proposals.image_id = scene.image_id;
        b.proposals.height = kSceneSide;
        b.proposals.width = kSceneSide;
        b.proposals.proposals = make_proposals(rng, scene);
        b.sample.image_id = scene.image_id;
        b.sample.image = scene.image;
        b.sample.expression = scene.expression;
        b.sample.gt_mask = scene.shapes[static_cast<size_t>(scene.target)].mask;
        b.scene = std::move(scene);
        out.push_back(std::move(b));
    }
    return out;
}

void write_scenes(const std::filesystem::path& dir, std::vector<SceneBundle>& bundles) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "proposals");
    std::vector<Sample> samples;
    for (auto& b : bundles) {
        const fs::path img = dir / "images" / (b.scene.image_id + ".png");
        write_png(img, b.scene.image);
        write_proposal_cache(proposal_cache_path(dir / "proposals", b.scene.image_id), b.proposals);
        b.sample.image_path = img;
        Sample s = b.sample;
        s.image.reset();
        samples.push_back(std::move(s));
    }
    write_dataset(dir / "dataset.jsonl", samples);
}

}  // namespace hybridgl
