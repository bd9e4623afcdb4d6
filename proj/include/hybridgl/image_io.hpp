// image_io.hpp
//
// PNG reading/writing (libpng) and mask overlays.

#pragma once

#include <array>
#include <filesystem>

#include "hybridgl/core.hpp"

namespace hybridgl {

/// Loads any PNG as 8-bit RGB (palette/gray/alpha are converted, alpha dropped).
ImageData read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const ImageData& image);

/// Alpha-blends `color` over the pixels where `mask` is set.
ImageData overlay_mask(const ImageData& image, const BinaryMask& mask,
                       std::array<std::uint8_t, 3> color = {255, 32, 32}, double alpha = 0.5);

}  // namespace hybridgl
