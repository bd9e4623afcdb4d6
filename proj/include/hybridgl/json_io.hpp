// json_io.hpp
//
// JSON wire formats shared across modules.

#pragma once

#include <json.hpp>

#include "hybridgl/core.hpp"

namespace hybridgl {

/// {"size": [H, W], "counts": [...]}
nlohmann::json rle_to_json(const RleCounts& rle);
RleCounts rle_from_json(const nlohmann::json& j);

inline nlohmann::json mask_to_json(const BinaryMask& m) { return rle_to_json(rle_encode(m)); }
inline BinaryMask mask_from_json(const nlohmann::json& j) { return rle_decode(rle_from_json(j)); }

}  // namespace hybridgl
