#include "nscam/model_io.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace nscam {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kFormatVersion = "ns-model/1";

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void append_le(std::string& out, const Tensor& t) {
    for (float v : t.data()) {
        const auto u = std::bit_cast<std::uint32_t>(v);
        out.push_back(static_cast<char>(u & 0xffu));
        out.push_back(static_cast<char>((u >> 8) & 0xffu));
        out.push_back(static_cast<char>((u >> 16) & 0xffu));
        out.push_back(static_cast<char>((u >> 24) & 0xffu));
    }
}

std::vector<float> read_le(const std::string& blob, std::size_t byte_offset, std::size_t count) {
    std::vector<float> out(count);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data()) + byte_offset;
    for (std::size_t i = 0; i < count; ++i, p += 4) {
        const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                                (static_cast<std::uint32_t>(p[1]) << 8) |
                                (static_cast<std::uint32_t>(p[2]) << 16) |
                                (static_cast<std::uint32_t>(p[3]) << 24);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

json params_to_json(const LayerSpec& layer) {
    json j = json::object();
    switch (layer.kind) {
        case LayerKind::conv2d: {
            const auto& p = std::get<ConvParams>(layer.params);
            j["out_channels"] = p.out_channels;
            j["in_channels"] = p.in_channels;
            j["kernel_h"] = p.kernel_h;
            j["kernel_w"] = p.kernel_w;
            j["stride"] = p.stride;
            j["pad"] = p.pad;
            break;
        }
        case LayerKind::maxpool2d: {
            const auto& p = std::get<PoolParams>(layer.params);
            j["window"] = p.window;
            j["stride"] = p.stride;
            break;
        }
        case LayerKind::dense: {
            const auto& p = std::get<DenseParams>(layer.params);
            j["out_features"] = p.out_features;
            j["in_features"] = p.in_features;
            break;
        }
        default:
            break;
    }
    return j;
}

LayerParams params_from_json(LayerKind kind, const json& j, const std::string& id) {
    try {
        switch (kind) {
            case LayerKind::conv2d: {
                ConvParams p;
                p.out_channels = j.at("out_channels").get<int>();
                p.in_channels = j.at("in_channels").get<int>();
                p.kernel_h = j.at("kernel_h").get<int>();
                p.kernel_w = j.at("kernel_w").get<int>();
                p.stride = j.at("stride").get<int>();
                p.pad = j.at("pad").get<int>();
                return p;
            }
            case LayerKind::maxpool2d: {
                PoolParams p;
                p.window = j.at("window").get<int>();
                p.stride = j.at("stride").get<int>();
                return p;
            }
            case LayerKind::dense: {
                DenseParams p;
                p.out_features = j.at("out_features").get<int>();
                p.in_features = j.at("in_features").get<int>();
                return p;
            }
            default:
                return NoParams{};
        }
    } catch (const json::exception& e) {
        fail("model manifest: layer \"" + id + "\": bad params: " + e.what());
    }
}

std::vector<int> conv_weight_dims(const ConvParams& p) {
    return {p.out_channels, p.in_channels, p.kernel_h, p.kernel_w};
}

} // namespace

Model load_model(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) {
        fail("cannot open model manifest " + manifest_path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail("model manifest " + manifest_path + ": " + e.what());
    }

    if (!j.contains("version") || j["version"] != kFormatVersion) {
        fail("model manifest " + manifest_path + ": missing or unsupported version, expected \"" +
             std::string(kFormatVersion) + "\"");
    }

    Model model;
    try {
        model.input_dims = j.at("input_dims").get<std::vector<int>>();
        model.class_count = j.at("class_count").get<int>();
    } catch (const json::exception& e) {
        fail("model manifest " + manifest_path + ": " + e.what());
    }

    const std::string weights_file = j.value("weights_file", std::string("weights.bin"));
    const fs::path blob_path = fs::path(manifest_path).parent_path() / weights_file;
    std::ifstream wb(blob_path, std::ios::binary);
    if (!wb) {
        fail("cannot open weight blob " + blob_path.string());
    }
    std::string blob((std::istreambuf_iterator<char>(wb)), std::istreambuf_iterator<char>());

    if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty()) {
        fail("model manifest " + manifest_path + ": missing layer array");
    }

    auto read_blob = [&](const json& ref, const std::string& id,
                         const std::string& name) -> std::vector<float> {
        const auto offset = ref.at("offset").get<std::size_t>();
        const auto count = ref.at("count").get<std::size_t>();
        const std::size_t need = offset + count * 4;
        if (need > blob.size()) {
            fail("weight blob " + blob_path.string() + ": layer \"" + id + "\" " + name +
                 " needs " + std::to_string(need) + " bytes, blob has " +
                 std::to_string(blob.size()));
        }
        return read_le(blob, offset, count);
    };

    for (const auto& lj : j["layers"]) {
        LayerSpec layer;
        try {
            layer.id = lj.at("id").get<std::string>();
        } catch (const json::exception& e) {
            fail("model manifest " + manifest_path + ": layer without id: " + e.what());
        }
        const std::string kind_name = lj.value("kind", std::string());
        try {
            layer.kind = layer_kind_from_name(kind_name);
        } catch (const std::invalid_argument&) {
            fail("model manifest " + manifest_path + ": layer \"" + layer.id +
                 "\": unsupported layer kind \"" + kind_name + "\"");
        }
        layer.params = params_from_json(layer.kind, lj.value("params", json::object()), layer.id);

        if (layer.has_weights()) {
            if (!lj.contains("weights")) {
                fail("model manifest " + manifest_path + ": layer \"" + layer.id +
                     "\" has no weight references");
            }
            LayerWeights w;
            std::vector<int> wdims;
            std::vector<int> bdims;
            if (layer.kind == LayerKind::conv2d) {
                const auto& p = std::get<ConvParams>(layer.params);
                wdims = conv_weight_dims(p);
                bdims = {p.out_channels};
            } else {
                const auto& p = std::get<DenseParams>(layer.params);
                wdims = {p.out_features, p.in_features};
                bdims = {p.out_features};
            }
            try {
                w.weight = Tensor(wdims, read_blob(lj["weights"].at("weight"), layer.id, "weight"));
                w.bias = Tensor(bdims, read_blob(lj["weights"].at("bias"), layer.id, "bias"));
            } catch (const json::exception& e) {
                fail("model manifest " + manifest_path + ": layer \"" + layer.id +
                     "\": bad weight reference: " + e.what());
            }
            model.weights.emplace(layer.id, std::move(w));
        }
        model.layers.push_back(std::move(layer));
    }

    validate_model(model);
    return model;
}

void save_model(const Model& model, const std::string& manifest_path,
                const std::string& weights_file) {
    validate_model(model);

    std::string blob;
    json layers = json::array();
    for (const auto& layer : model.layers) {
        json lj;
        lj["id"] = layer.id;
        lj["kind"] = layer_kind_name(layer.kind);
        lj["params"] = params_to_json(layer);
        if (layer.has_weights()) {
            const auto& w = model.weights_of(layer.id);
            json refs;
            refs["weight"] = {{"offset", blob.size()}, {"count", w.weight.numel()}};
            append_le(blob, w.weight);
            refs["bias"] = {{"offset", blob.size()}, {"count", w.bias.numel()}};
            append_le(blob, w.bias);
            lj["weights"] = refs;
        }
        layers.push_back(lj);
    }

    json j;
    j["version"] = kFormatVersion;
    j["input_dims"] = model.input_dims;
    j["class_count"] = model.class_count;
    j["weights_file"] = weights_file;
    j["layers"] = layers;

    const fs::path blob_path = fs::path(manifest_path).parent_path() / weights_file;
    std::ofstream wb(blob_path, std::ios::binary | std::ios::trunc);
    if (!wb) {
        fail("cannot write weight blob " + blob_path.string());
    }
    wb.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!wb) {
        fail("short write to " + blob_path.string());
    }

    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) {
        fail("cannot write model manifest " + manifest_path);
    }
    out << j.dump(2) << '\n';
    if (!out) {
        fail("short write to " + manifest_path);
    }
}

} // namespace nscam
