#include "nscam/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <png.h>

#include "json.hpp"

namespace nscam {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_png_signature(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open image " + path);
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    return in.gcount() == 8 && !png_sig_cmp(sig, 0, 8);
}

Tensor read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail("cannot open image " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail("libpng: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("libpng: out of memory");
    }
    std::vector<std::vector<png_byte>> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("failed to decode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize every variant to 8-bit gray or RGB without alpha.
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const int channels = color == PNG_COLOR_TYPE_GRAY ? 1 : 3;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != static_cast<std::size_t>(w) * channels) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("unsupported PNG layout in " + path);
    }

    rows.assign(h, std::vector<png_byte>(rowbytes));
    std::vector<png_bytep> row_ptrs(h);
    for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = rows[y].data();
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor out({channels, static_cast<int>(h), static_cast<int>(w)});
    for (png_uint_32 y = 0; y < h; ++y) {
        for (png_uint_32 x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                out.at3(c, static_cast<int>(y), static_cast<int>(x)) =
                    rows[y][x * channels + c] / 255.0f;
            }
        }
    }
    return out;
}

int next_pnm_int(std::istream& in, const std::string& path) {
    // Skip whitespace and '#' comments between header tokens.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) fail("truncated PNM header in " + path);
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

Tensor read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open image " + path);
    char p = 0, kind = 0;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6')) {
        fail(path + " is neither a PNG nor a P2/P3/P5/P6 PNM image");
    }
    const int w = next_pnm_int(in, path);
    const int h = next_pnm_int(in, path);
    const int maxval = next_pnm_int(in, path);
    if (w <= 0 || h <= 0) fail("bad PNM dimensions in " + path);
    if (maxval <= 0 || maxval > 255) {
        fail("unsupported PNM maxval " + std::to_string(maxval) + " in " + path +
             " (only 8-bit supported)");
    }
    const int channels = (kind == '3' || kind == '6') ? 3 : 1;
    const std::size_t count = static_cast<std::size_t>(w) * h * channels;

    std::vector<int> raw(count);
    if (kind == '5' || kind == '6') {
        std::vector<unsigned char> bytes(count);
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
        if (static_cast<std::size_t>(in.gcount()) != count) {
            fail("truncated PNM payload in " + path);
        }
        for (std::size_t i = 0; i < count; ++i) raw[i] = bytes[i];
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            if (!(in >> raw[i])) fail("truncated PNM payload in " + path);
        }
    }

    Tensor out({channels, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                const int v = raw[(static_cast<std::size_t>(y) * w + x) * channels + c];
                if (v < 0 || v > maxval) fail("PNM sample out of range in " + path);
                out.at3(c, y, x) = static_cast<float>(v) / static_cast<float>(maxval);
            }
        }
    }
    return out;
}

Tensor resize_channels(const Tensor& img, int out_h, int out_w) {
    const int c = img.dim(0);
    if (img.dim(1) == out_h && img.dim(2) == out_w) return img;
    Tensor out({c, out_h, out_w});
    const std::size_t in_plane = static_cast<std::size_t>(img.dim(1)) * img.dim(2);
    const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
    for (int ch = 0; ch < c; ++ch) {
        Tensor plane({img.dim(1), img.dim(2)});
        std::copy_n(img.data().begin() + static_cast<std::size_t>(ch) * in_plane, in_plane,
                    plane.data().begin());
        const Tensor resized = upsample_bilinear(plane, out_h, out_w);
        std::copy_n(resized.data().begin(), out_plane,
                    out.data().begin() + static_cast<std::size_t>(ch) * out_plane);
    }
    return out;
}

} // namespace

Tensor read_image(const std::string& path) {
    return has_png_signature(path) ? read_png(path) : read_pnm(path);
}

Tensor preprocess_image(const std::string& path, const Model& model) {
    Tensor img = read_image(path);
    img = resize_channels(img, model.input_dims[1], model.input_dims[2]);

    const int want_c = model.input_dims[0];
    const int have_c = img.dim(0);
    if (have_c == want_c) return img;
    if (have_c == 1) {
        Tensor out({want_c, img.dim(1), img.dim(2)});
        const std::size_t plane = static_cast<std::size_t>(img.dim(1)) * img.dim(2);
        for (int c = 0; c < want_c; ++c) {
            std::copy_n(img.data().begin(), plane,
                        out.data().begin() + static_cast<std::size_t>(c) * plane);
        }
        return out;
    }
    fail(path + " has " + std::to_string(have_c) + " channels, model expects " +
         std::to_string(want_c) + " (only grayscale replication is supported)");
}

Tensor load_saliency_map(const std::string& path, int h, int w) {
    Tensor grid;
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        std::ifstream in(path);
        if (!in) fail("cannot open map " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            fail("map " + path + ": " + e.what());
        }
        const nlohmann::json& rows = j.is_object() && j.contains("grid") ? j["grid"] : j;
        if (!rows.is_array() || rows.empty() || !rows[0].is_array()) {
            fail("map " + path + ": expected a 2-D array (optionally under \"grid\")");
        }
        const int gh = static_cast<int>(rows.size());
        const int gw = static_cast<int>(rows[0].size());
        grid = Tensor({gh, gw});
        for (int y = 0; y < gh; ++y) {
            if (static_cast<int>(rows[y].size()) != gw) {
                fail("map " + path + ": ragged rows");
            }
            for (int x = 0; x < gw; ++x) {
                grid.data()[static_cast<std::size_t>(y) * gw + x] = rows[y][x].get<float>();
            }
        }
    } else {
        Tensor img = read_image(path);
        grid = Tensor({img.dim(1), img.dim(2)});
        const std::size_t plane = grid.numel();
        const int c = img.dim(0);
        for (std::size_t i = 0; i < plane; ++i) {
            float acc = 0.0f;
            for (int ch = 0; ch < c; ++ch) {
                acc += img.data()[static_cast<std::size_t>(ch) * plane + i];
            }
            grid.data()[i] = acc / static_cast<float>(c);
        }
    }
    if (!grid.all_finite()) fail("map " + path + ": non-finite values");
    if (grid.dim(0) != h || grid.dim(1) != w) {
        grid = upsample_bilinear(grid, h, w);
    }
    return grid;
}

void write_png_gray8(const std::string& path, const Tensor& map) {
    if (map.rank() != 2) {
        throw std::invalid_argument("write_png_gray8: map must be [H,W], got " + map.shape_str());
    }
    const int h = map.dim(0);
    const int w = map.dim(1);
    std::vector<unsigned char> row(static_cast<std::size_t>(w));

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail("libpng: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("libpng: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("failed to encode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float v = std::clamp(map.data()[static_cast<std::size_t>(y) * w + x], 0.0f, 1.0f);
            row[static_cast<std::size_t>(x)] =
                static_cast<unsigned char>(std::lround(255.0f * v));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_png_rgb8(const std::string& path, int w, int h, const std::vector<unsigned char>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(w) * h * 3) {
        throw std::invalid_argument("write_png_rgb8: buffer size does not match dimensions");
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail("libpng: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("libpng: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("failed to encode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) {
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * w * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace nscam
