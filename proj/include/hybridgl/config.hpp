// config.hpp
//
// RunConfig: every tunable of a run in one place, loadable from a
// key = value file and overridable key by key.

#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hybridgl/pipeline.hpp"
#include "hybridgl/proposals.hpp"
#include "hybridgl/toy_encoder.hpp"

namespace hybridgl {

struct RunConfig {
    PipelineConfig pipeline;
    ProposalGenConfig proposals;
    std::string encoder = "toy";  // "toy" or "adapter"
    ToyEncoderConfig toy;

    /// Sets one key from its textual value. Unknown keys and malformed
    /// values throw Error naming the key.
    void set(std::string_view key, std::string_view value);

    /// Reads `key = value` lines; `#` starts a comment, values may be quoted.
    void load_file(const std::filesystem::path& path);

    void validate() const;
    nlohmann::json to_json() const;

    static const std::vector<std::string>& keys();
};

}  // namespace hybridgl
