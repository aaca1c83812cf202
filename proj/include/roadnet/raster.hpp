#pragma once

// 8-bit RGB raster, row-major, top-left origin. Aerial tiles in this toolkit
// are always 1280x1280; decoded network payloads may carry other dimensions,
// which the tile client rejects.

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace roadnet {

struct RasterTile {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // 3 * width * height, RGB

    static RasterTile filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        RasterTile t;
        t.width = w;
        t.height = h;
        t.pixels.resize(static_cast<std::size_t>(w) * h * 3);
        for (std::size_t i = 0; i < t.pixels.size(); i += 3) {
            t.pixels[i] = r;
            t.pixels[i + 1] = g;
            t.pixels[i + 2] = b;
        }
        return t;
    }

    std::size_t offset(int x, int y) const {
        return (static_cast<std::size_t>(y) * width + x) * 3;
    }

    void set_px(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const std::size_t o = offset(x, y);
        pixels[o] = r;
        pixels[o + 1] = g;
        pixels[o + 2] = b;
    }

    // Rec.601 luma.
    double luminance(int x, int y) const {
        const std::size_t o = offset(x, y);
        return 0.299 * pixels[o] + 0.587 * pixels[o + 1] + 0.114 * pixels[o + 2];
    }

    bool operator==(const RasterTile&) const = default;
};

}  // namespace roadnet
