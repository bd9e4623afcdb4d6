#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hybridgl/cli.hpp"
#include "test_util.hpp"

using testutil::cli;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
    CHECK(cli({}).code == hybridgl::kExitUsage);
    const auto bad = cli({"parse", "dog", "--bogus"});
    CHECK(bad.code == hybridgl::kExitUsage);
    CHECK(bad.err.find("--bogus") != std::string::npos);
    CHECK(cli({"parse", "--help"}).code == hybridgl::kExitOk);
    CHECK(cli({"synth", "--count", "0", "--out", "x"}).code == hybridgl::kExitUsage);
}

TEST_CASE("parse") {
    const auto a = cli({"parse", "the pizza on the right of the man", "--json"});
    REQUIRE(a.code == 0);
    const auto j = nlohmann::json::parse(a.out);
    CHECK(j.at("head_phrase") == "the pizza");
    CHECK(cli({"parse", "the pizza on the right of the man", "--json"}).out == a.out);
    CHECK(cli({"parse", "--text", "small cup on the left"}).code == 0);
}

TEST_CASE("config file") {
    testutil::TempDir dir("cli_config");
    std::ofstream(dir / "good.cfg") << "# tuned\nalpha = 0.5\nstrategy = \"g2l\"\n";
    std::ofstream(dir / "bad.cfg") << "alpha = 0.5\ngamma = 3\n";
    CHECK(cli({"synth", "--count", "2", "--out", (dir / "s").string()}).code == 0);
    const std::string ds = (dir / "s" / "dataset.jsonl").string();

    const auto good = cli({"evaluate", "--dataset", ds, "--config", (dir / "good.cfg").string(), "--json"});
    REQUIRE(good.code == 0);
    CHECK(nlohmann::json::parse(good.out).at("config").at("guidance").at("alpha") == 0.5);

    const auto flag_wins = cli({"evaluate", "--dataset", ds, "--config", (dir / "good.cfg").string(),
                                "--alpha", "0.25", "--json"});
    CHECK(nlohmann::json::parse(flag_wins.out).at("config").at("guidance").at("alpha") == 0.25);

    const auto bad = cli({"evaluate", "--dataset", ds, "--config", (dir / "bad.cfg").string()});
    CHECK(bad.code == hybridgl::kExitUsage);
    CHECK(bad.err.find("gamma") != std::string::npos);
    CHECK(bad.err.find(":2") != std::string::npos);

    CHECK(cli({"evaluate", "--dataset", ds, "--alpha", "1.5"}).code == hybridgl::kExitUsage);
    const auto templated = cli({"evaluate", "--dataset", ds, "--text-template", "a photo of {}", "--json"});
    REQUIRE(templated.code == 0);
    CHECK(nlohmann::json::parse(templated.out).at("config").at("text_template") == "a photo of {}");
    CHECK(cli({"evaluate", "--dataset", ds, "--text-template", "no slot"}).code == hybridgl::kExitUsage);
    CHECK(cli({"evaluate", "--dataset", ds, "--ablate", "no-fun"}).code == hybridgl::kExitUsage);
}

TEST_CASE("adapter encoder is not bundled") {
    testutil::TempDir dir("cli_adapter");
    REQUIRE(cli({"synth", "--count", "1", "--out", dir.path().string()}).code == 0);
    const auto r = cli({"evaluate", "--dataset", (dir / "dataset.jsonl").string(), "--encoder", "adapter"});
    CHECK(r.code == hybridgl::kExitData);
    CHECK(r.err.find("adapter") != std::string::npos);
}

TEST_CASE("segment happy path and determinism") {
    testutil::TempDir dir("cli_segment");
    REQUIRE(cli({"synth", "--count", "3", "--seed", "4", "--out", dir.path().string()}).code == 0);
    const std::string img = (dir / "images" / "scene_0000.png").string();
    const std::string props = (dir / "proposals" / "scene_0000.proposals.json").string();
    const std::string overlay = (dir / "overlay.png").string();
    const std::vector<std::string> args{"segment", "--image", img, "--text", "the left circle",
                                        "--proposals", props, "--overlay", overlay, "--toy-encoder", "--json"};
    const auto a = cli(args);
    REQUIRE(a.code == 0);
    CHECK(std::filesystem::exists(overlay));
    const auto b = cli(args);
    CHECK(a.out == b.out);
    const auto j = nlohmann::json::parse(a.out);
    CHECK(j.at("result").contains("winner_index"));
    CHECK(cli({"segment", "--image", img, "--text", "dog", "--proposals", (dir / "nope.json").string()}).code ==
          hybridgl::kExitData);
}

TEST_CASE("missing files are data errors") {
    CHECK(cli({"evaluate", "--dataset", "/nonexistent/d.jsonl"}).code == hybridgl::kExitData);
    CHECK(cli({"segment", "--image", "/nonexistent.png", "--text", "dog"}).code == hybridgl::kExitData);
}

TEST_CASE("cache proposals") {
    testutil::TempDir dir("cli_cache");
    REQUIRE(cli({"synth", "--count", "2", "--out", (dir / "s").string()}).code == 0);
    const auto a = cli({"cache-proposals", "--images", (dir / "s" / "images").string(), "--out", (dir / "c").string(), "--json"});
    REQUIRE(a.code == 0);
    CHECK(nlohmann::json::parse(a.out).at("images").size() == 2);
    const std::string first = slurp(dir / "c" / "scene_0000.proposals.json");
    CHECK(!first.empty());
    const auto b = cli({"cache-proposals", "--images", (dir / "s" / "images" / "scene_0000.png").string(),
                        "--out", (dir / "c").string(), "--json"});
    REQUIRE(b.code == 0);
    CHECK(slurp(dir / "c" / "scene_0000.proposals.json") == first);
}

TEST_CASE("synth then evaluate reproduces the regression values") {
    std::ifstream in(std::filesystem::path(HYBRIDGL_TEST_DATA) / "synth_regression.json");
    REQUIRE(in);
    const auto reg = nlohmann::json::parse(in);
    testutil::TempDir dir("cli_regression");
    const std::string out = dir.path().string();
    REQUIRE(cli({"synth", "--count", std::to_string(reg.at("count").get<int>()), "--seed",
                 std::to_string(reg.at("seed").get<int>()), "--out", out}).code == 0);
    const std::string ds = (dir / "dataset.jsonl").string();
    const auto full = nlohmann::json::parse(cli({"evaluate", "--dataset", ds, "--workers", "4", "--json"}).out);
    CHECK(full.at("accuracy") == reg.at("full").at("accuracy"));
    CHECK(full.at("oIoU") == reg.at("full").at("oIoU"));
    CHECK(full.at("mIoU") == reg.at("full").at("mIoU"));
    const auto ablated = nlohmann::json::parse(
        cli({"evaluate", "--dataset", ds, "--workers", "4", "--ablate", "no-position", "--no-relations", "--json"}).out);
    CHECK(ablated.at("accuracy") == reg.at("ablated").at("accuracy"));
    CHECK(ablated.at("oIoU") == reg.at("ablated").at("oIoU"));
    CHECK(ablated.at("ablations") == nlohmann::json{"no-position", "no-relations"});
}

}
