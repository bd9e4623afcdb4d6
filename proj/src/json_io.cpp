#include "hybridgl/json_io.hpp"

namespace hybridgl {

nlohmann::json rle_to_json(const RleCounts& rle) {
    return {{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

RleCounts rle_from_json(const nlohmann::json& j) {
    try {
        RleCounts rle;
        const auto& size = j.at("size");
        if (!size.is_array() || size.size() != 2) throw Error("RLE size must be [H, W]");
        rle.height = size[0].get<int>();
        rle.width = size[1].get<int>();
        if (!j.at("counts").is_array()) {
            throw Error("compressed RLE strings are not supported");
        }
        rle.counts = j.at("counts").get<std::vector<std::uint32_t>>();
        if (rle.height < 1 || rle.width < 1) throw Error("RLE size must be positive");
        return rle;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed RLE: ") + e.what());
    }
}

}  // namespace hybridgl
