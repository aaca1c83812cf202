#pragma once

// PNG encode/decode on top of libpng. Encoding is pinned (RGB8, compression
// level 6, default filtering) so identical rasters produce identical bytes.
// Decoding normalizes palette/gray/16-bit/alpha inputs down to RGB8.

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadnet/raster.hpp"

namespace roadnet {

struct PngError : std::runtime_error {
    explicit PngError(const std::string& msg) : std::runtime_error("png: " + msg) {}
};

namespace detail {

inline void png_error_fn(png_structp png, png_const_charp msg) {
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err && err->empty()) *err = msg;
    longjmp(png_jmpbuf(png), 1);
}

inline void png_warn_fn(png_structp, png_const_charp) {}

struct PngByteReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;
};

inline void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<PngByteReader*>(png_get_io_ptr(png));
    if (r->pos + n > r->size) png_error(png, "unexpected end of data");
    std::memcpy(out, r->data + r->pos, n);
    r->pos += n;
}

inline void png_write_cb(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

inline void png_flush_cb(png_structp) {}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const RasterTile& tile) {
    if (tile.width <= 0 || tile.height <= 0 ||
        tile.pixels.size() != static_cast<std::size_t>(tile.width) * tile.height * 3)
        throw PngError("raster dimensions inconsistent with pixel buffer");

    std::string err;
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err,
                                              detail::png_error_fn, detail::png_warn_fn);
    if (!png) throw PngError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw PngError("png_create_info_struct failed");
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(tile.height));
    for (int y = 0; y < tile.height; ++y)
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(tile.pixels.data() + tile.offset(0, y));

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw PngError(err.empty() ? "encode failed" : err);
    }
    png_set_write_fn(png, &out, detail::png_write_cb, detail::png_flush_cb);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(tile.width),
                 static_cast<png_uint_32>(tile.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline RasterTile decode_png(const std::uint8_t* data, std::size_t size) {
    if (size < 8 || png_sig_cmp(data, 0, 8) != 0) throw PngError("not a PNG byte stream");

    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err,
                                             detail::png_error_fn, detail::png_warn_fn);
    if (!png) throw PngError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw PngError("png_create_info_struct failed");
    }

    detail::PngByteReader reader{data, size};
    RasterTile tile;
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw PngError(err.empty() ? "decode failed" : err);
    }
    png_set_read_fn(png, &reader, detail::png_read_cb);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);

    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw PngError("unsupported pixel layout");
    }

    tile.width = static_cast<int>(w);
    tile.height = static_cast<int>(h);
    tile.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = tile.pixels.data() + tile.offset(0, static_cast<int>(y));
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return tile;
}

inline RasterTile decode_png(const std::vector<std::uint8_t>& bytes) {
    return decode_png(bytes.data(), bytes.size());
}

inline void write_png_file(const std::filesystem::path& path, const RasterTile& tile) {
    const auto bytes = encode_png(tile);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw PngError("cannot open " + path.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw PngError("short write to " + path.string());
}

inline RasterTile read_png_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw PngError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

}  // namespace roadnet
