#include "nscam/render.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "nscam/image_io.hpp"

namespace nscam {

namespace {

namespace fs = std::filesystem;

unsigned char quantize(float v) {
    return static_cast<unsigned char>(std::lround(255.0f * std::clamp(v, 0.0f, 1.0f)));
}

// Black -> red -> yellow -> white ramp for the overlay heat.
void heat_color(float v, float rgb[3]) {
    rgb[0] = std::clamp(3.0f * v, 0.0f, 1.0f);
    rgb[1] = std::clamp(3.0f * v - 1.0f, 0.0f, 1.0f);
    rgb[2] = std::clamp(3.0f * v - 2.0f, 0.0f, 1.0f);
}

std::vector<unsigned char> blend_overlay(const Tensor& image, const Tensor& map) {
    const int h = map.dim(0);
    const int w = map.dim(1);
    const int c = image.dim(0);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<unsigned char> rgb(plane * 3);
    for (std::size_t i = 0; i < plane; ++i) {
        float base[3];
        if (c >= 3) {
            base[0] = image.data()[i];
            base[1] = image.data()[plane + i];
            base[2] = image.data()[2 * plane + i];
        } else {
            base[0] = base[1] = base[2] = image.data()[i];
        }
        const float v = std::clamp(map.data()[i], 0.0f, 1.0f);
        const float alpha = 0.5f * v; // stronger evidence, stronger tint
        float heat[3];
        heat_color(v, heat);
        for (int ch = 0; ch < 3; ++ch) {
            rgb[i * 3 + static_cast<std::size_t>(ch)] =
                quantize((1.0f - alpha) * base[ch] + alpha * heat[ch]);
        }
    }
    return rgb;
}

nlohmann::json grid_json(const Tensor& map) {
    const int h = map.dim(0);
    const int w = map.dim(1);
    nlohmann::json rows = nlohmann::json::array();
    for (int y = 0; y < h; ++y) {
        nlohmann::json row = nlohmann::json::array();
        for (int x = 0; x < w; ++x) {
            row.push_back(static_cast<double>(map.data()[static_cast<std::size_t>(y) * w + x]));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json values_json(const ShapleyReport& report, const CauseUniverse& universe) {
    nlohmann::json arr = nlohmann::json::array();
    for (int id : universe.cause_ids) {
        arr.push_back(report.value_or_zero(id));
    }
    return arr;
}

} // namespace

std::vector<std::string> render(const ExplainRequest& request, const ExplanationResult& result,
                                const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    std::vector<std::string> written;

    auto emit_gray = [&](const char* name, const Tensor& map) {
        const std::string path = (dir / name).string();
        write_png_gray8(path, map);
        written.push_back(path);
    };
    emit_gray("n_map.png", result.n_map);
    emit_gray("s_map.png", result.s_map);

    auto emit_overlay = [&](const char* name, const Tensor& map) {
        const std::string path = (dir / name).string();
        write_png_rgb8(path, map.dim(1), map.dim(0), blend_overlay(request.image, map));
        written.push_back(path);
    };
    emit_overlay("overlay_n.png", result.n_map);
    emit_overlay("overlay_s.png", result.s_map);

    {
        const int h = result.n_map.dim(0);
        const int w = result.n_map.dim(1);
        std::vector<unsigned char> rgb(static_cast<std::size_t>(h) * w * 3, 0);
        for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
            rgb[i * 3 + 0] = quantize(result.n_map.data()[i]);
            rgb[i * 3 + 2] = quantize(result.s_map.data()[i]);
        }
        const std::string path = (dir / "bivariate.png").string();
        write_png_rgb8(path, w, h, rgb);
        written.push_back(path);
    }

    nlohmann::json j;
    j["p_orig"] = result.p_orig;
    j["class_index"] = request.class_index;
    j["layer_id"] = request.layer_id;
    j["cause_kind"] = cause_kind_name(request.cause_kind);
    j["seed"] = request.config.seed;
    j["n_values"] = values_json(result.n_report, result.universe);
    j["s_values"] = values_json(result.s_report, result.universe);
    j["n_grid"] = grid_json(result.n_map);
    j["s_grid"] = grid_json(result.s_map);
    j["warnings"] = result.warnings;

    const std::string json_path = (dir / "result.json").string();
    std::ofstream out(json_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + json_path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("short write to " + json_path);
    written.push_back(json_path);
    return written;
}

} // namespace nscam
