// Writes a self-contained demo fixture:
//
//   <out>/model.json, weights.bin     planted single-detector model
//   <out>/image.png                   one image carrying the bright patch
//   <out>/dataset/img_00..09.png      ten patch variants
//   <out>/dataset/bboxes.jsonl        patch bounding boxes, one JSON per line
//   <out>/oracle.json                 3-cause value table for `nscam oracle`
//
// The model fires class 1 on a bright 8x8 patch in the upper-left quadrant,
// so explanations have a known ground-truth region to land in.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "nscam/fixtures.hpp"
#include "nscam/image_io.hpp"
#include "nscam/model_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nscam;

namespace {

Tensor to_gray2d(const Tensor& chw) {
    Tensor out({chw.dim(1), chw.dim(2)});
    std::copy(chw.data().begin(), chw.data().end(), out.data().begin());
    return out;
}

json oracle_table() {
    // Additive 3-cause game with one pairwise interaction; exact values are
    // easy to verify by hand against any attribution run.
    json values;
    const double base[3] = {0.6, 0.25, 0.1};
    for (unsigned m = 0; m < 8; ++m) {
        std::string key;
        double v = 0.0;
        for (int i = 0; i < 3; ++i) {
            if (m & (1u << i)) {
                if (!key.empty()) key += ",";
                key += std::to_string(i);
                v += base[i];
            }
        }
        if ((m & 3u) == 3u) v += 0.05; // causes 0 and 1 reinforce each other
        values[key] = v;
    }
    json j;
    j["causes"] = {0, 1, 2};
    j["values"] = values;
    j["budgets"] = {16, 64, 256};
    return j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"generate the planted-detector demo fixture"};
    std::string out_dir = "fixture";
    app.add_option("out", out_dir, "output directory (default: fixture)");
    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path root(out_dir);
        fs::create_directories(root / "dataset");

        save_model(fixtures::planted_model(), (root / "model.json").string());
        write_png_gray8((root / "image.png").string(), to_gray2d(fixtures::planted_image(0)));

        std::ofstream boxes(root / "dataset" / "bboxes.jsonl", std::ios::trunc);
        const BBox bb = fixtures::planted_bbox();
        for (int v = 0; v < 10; ++v) {
            char name[32];
            std::snprintf(name, sizeof name, "img_%02d.png", v);
            write_png_gray8((root / "dataset" / name).string(),
                            to_gray2d(fixtures::planted_image(v)));
            json line;
            line["image"] = name;
            line["x0"] = bb.x0;
            line["y0"] = bb.y0;
            line["x1"] = bb.x1;
            line["y1"] = bb.y1;
            boxes << line.dump() << '\n';
        }

        std::ofstream oracle(root / "oracle.json", std::ios::trunc);
        oracle << oracle_table().dump(2) << '\n';

        std::cout << "fixture written to " << root.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
