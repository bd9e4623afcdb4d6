#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "hybridgl/cli.hpp"
#include "hybridgl/core.hpp"
#include "hybridgl/parser.hpp"
#include "hybridgl/pipeline.hpp"
#include "hybridgl/toy_encoder.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("hybridgl_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline hybridgl::ImageData random_image(std::mt19937_64& rng, int h, int w) {
    hybridgl::ImageData img(h, w);
    std::uniform_int_distribution<int> px(0, 255);
    for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(px(rng));
    return img;
}

/// Union of one to three random rectangles; never empty.
inline hybridgl::BinaryMask random_mask(std::mt19937_64& rng, int h, int w) {
    hybridgl::BinaryMask m(h, w);
    const int n = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int i = 0; i < n; ++i) {
        const int y0 = std::uniform_int_distribution<int>(0, h - 1)(rng);
        const int x0 = std::uniform_int_distribution<int>(0, w - 1)(rng);
        const int y1 = std::uniform_int_distribution<int>(y0, std::min(h - 1, y0 + h / 2))(rng);
        const int x1 = std::uniform_int_distribution<int>(x0, std::min(w - 1, x0 + w / 2))(rng);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) m.set(y, x, true);
        }
    }
    return m;
}

/// Toy encoder, text encoder, localizer and parser wired together.
struct ToyStack {
    explicit ToyStack(hybridgl::ToyEncoderConfig cfg = {}) : encoder(cfg), text(cfg), localizer(encoder, text) {}

    hybridgl::ToyEncoder encoder;
    hybridgl::ToyTextEncoder text;
    hybridgl::ToyLocalizer localizer;
    hybridgl::RuleBasedParser parser;

    hybridgl::Components components() const { return {encoder, text, &localizer, parser}; }
};

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliRun cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = hybridgl::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace testutil
