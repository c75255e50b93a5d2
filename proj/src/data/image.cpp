#include "xopgan/data/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "xopgan/numerics/errors.hpp"

namespace xopgan {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err) *err = msg;
    png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

double to_byte(double v) { return std::clamp(std::round(v), 0.0, 255.0); }

}  // namespace

Tensor load_image(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open image " + path.string());

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw IoError("malformed PNG: " + path.string());

    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }

    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("malformed PNG: " + path.string() + (err.empty() ? "" : " (" + err + ")"));
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (color_type != PNG_COLOR_TYPE_RGB || bit_depth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(std::string(color_type != PNG_COLOR_TYPE_RGB ? "non-RGB" : "unsupported bit depth") +
                      " PNG (" + std::to_string(bit_depth) + "-bit, color type " + std::to_string(color_type) +
                      "): " + path.string());
    }

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> pixels(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * row_bytes;
    // Re-arm so locals above are destroyed by an ordinary throw.
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("malformed PNG: " + path.string() + (err.empty() ? "" : " (" + err + ")"));
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor img({3, height, width});
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = pixels[(y * width + x) * 3 + c];
    return img;
}

void save_image(const Tensor& image, const std::filesystem::path& path) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw DimensionError("save_image: expected [3,H,W], got " + shape_string(image.shape()));
    const auto height = image.dim(1), width = image.dim(2);
    std::vector<unsigned char> pixels(height * width * 3);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                pixels[(y * width + x) * 3 + c] = static_cast<unsigned char>(to_byte(image.at(c, y, x)));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write image " + path.string());

    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<png_bytep> rows(height);
    for (std::size_t y = 0; y < height; ++y) rows[y] = pixels.data() + y * width * 3;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed for " + path.string() + ": " + err);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor normalize(const Tensor& image) {
    Tensor out = Tensor::zeros_like(image);
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] / 127.5 - 1.0;
    return out;
}

Tensor denormalize(const Tensor& normalized) {
    Tensor out = Tensor::zeros_like(normalized);
    for (std::size_t i = 0; i < normalized.size(); ++i) out[i] = to_byte((normalized[i] + 1.0) * 127.5);
    return out;
}

}  // namespace xopgan
