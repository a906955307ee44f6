// SPDX-License-Identifier: Apache-2.0

#include "ccub/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <string>
#include <memory>

#include "ccub/error.hpp"
#include "ccub/io.hpp"

namespace ccub {

namespace {

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

void png_record_error(png_structp png, png_const_charp msg) {
    auto* sink = static_cast<std::string*>(png_get_error_ptr(png));
    if (sink) *sink = msg;
    png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
    if (image.width < 1 || image.height < 1 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
        throw ValidationError("encode_png: pixel buffer does not match dimensions");
    }
    std::string error;
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_record_error, png_warn);
    if (!png) throw RuntimeFailure("png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("png encode failed: " + error);
    }
    {
        png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
        png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                     PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < image.height; ++y) {
            png_write_row(png, const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * image.width));
        }
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const GrayImage& image, const std::filesystem::path& path) {
    const auto bytes = encode_png(image);
    write_text_file(path, std::string(bytes.begin(), bytes.end()));
}

GrayImage read_png(const std::filesystem::path& path) {
    std::unique_ptr<FILE, decltype(&std::fclose)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!fp) throw RuntimeFailure("cannot open image " + path.string());
    std::string error;
    GrayImage image;
    std::vector<png_bytep> rows;
    bool bad_layout = false;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_record_error, png_warn);
    if (!png) throw RuntimeFailure("png: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("cannot decode " + path.string() + ": " + error);
    }
    {
        png_init_io(png, fp.get());
        png_read_info(png, info);
        const auto color = png_get_color_type(png, info);
        if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
        }
        png_read_update_info(png, info);
        image.width = static_cast<int>(png_get_image_width(png, info));
        image.height = static_cast<int>(png_get_image_height(png, info));
        if (png_get_rowbytes(png, info) != static_cast<png_size_t>(image.width)) {
            bad_layout = true;
        } else {
            image.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
            rows.resize(static_cast<std::size_t>(image.height));
            for (int y = 0; y < image.height; ++y) {
                rows[y] = image.pixels.data() + static_cast<std::size_t>(y) * image.width;
            }
            png_read_image(png, rows.data());
            png_read_end(png, nullptr);
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (bad_layout) throw RuntimeFailure("png: unexpected row layout in " + path.string());
    return image;
}

std::vector<double> pool_to_grid(const GrayImage& image, int height, int width) {
    if (height < 1 || width < 1 || image.width < width || image.height < height) {
        throw ValidationError("pool_to_grid: image smaller than target grid");
    }
    std::vector<double> out(static_cast<std::size_t>(height) * width);
    for (int gy = 0; gy < height; ++gy) {
        const int y0 = gy * image.height / height, y1 = (gy + 1) * image.height / height;
        for (int gx = 0; gx < width; ++gx) {
            const int x0 = gx * image.width / width, x1 = (gx + 1) * image.width / width;
            double sum = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) sum += image.pixels[static_cast<std::size_t>(y) * image.width + x];
            }
            const double mean = sum / static_cast<double>((y1 - y0) * (x1 - x0));
            out[static_cast<std::size_t>(gy) * width + gx] = mean / 127.5 - 1.0;
        }
    }
    return out;
}

}  // namespace ccub
