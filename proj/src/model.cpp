#include "nscam/model.hpp"

#include <stdexcept>

namespace nscam {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::size_t numel_of(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return n;
}

} // namespace

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::global_avg_pool: return "global_avg_pool";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "conv2d") return LayerKind::conv2d;
    if (name == "relu") return LayerKind::relu;
    if (name == "maxpool2d") return LayerKind::maxpool2d;
    if (name == "global_avg_pool") return LayerKind::global_avg_pool;
    if (name == "flatten") return LayerKind::flatten;
    if (name == "dense") return LayerKind::dense;
    if (name == "softmax") return LayerKind::softmax;
    throw std::invalid_argument("unsupported layer kind \"" + name + "\"");
}

const LayerSpec* Model::find_layer(const std::string& id) const {
    for (const auto& l : layers) {
        if (l.id == id) return &l;
    }
    return nullptr;
}

const LayerWeights& Model::weights_of(const std::string& id) const {
    auto it = weights.find(id);
    if (it == weights.end()) {
        fail("model: no weights stored for layer \"" + id + "\"");
    }
    return it->second;
}

std::vector<int> infer_output_dims(const LayerSpec& layer, const Model& model,
                                   const std::vector<int>& in_dims) {
    switch (layer.kind) {
        case LayerKind::conv2d: {
            const auto& p = std::get<ConvParams>(layer.params);
            if (in_dims.size() != 3) {
                fail("layer \"" + layer.id + "\": conv2d needs a [C,H,W] input");
            }
            if (in_dims[0] != p.in_channels) {
                fail("layer \"" + layer.id + "\": input has " + std::to_string(in_dims[0]) +
                     " channels, conv2d expects " + std::to_string(p.in_channels));
            }
            if (p.kernel_h <= 0 || p.kernel_w <= 0 || p.stride <= 0 || p.pad < 0 ||
                p.out_channels <= 0) {
                fail("layer \"" + layer.id + "\": invalid conv2d parameters");
            }
            const int oh = (in_dims[1] + 2 * p.pad - p.kernel_h) / p.stride + 1;
            const int ow = (in_dims[2] + 2 * p.pad - p.kernel_w) / p.stride + 1;
            if (in_dims[1] + 2 * p.pad < p.kernel_h || in_dims[2] + 2 * p.pad < p.kernel_w) {
                fail("layer \"" + layer.id + "\": kernel exceeds padded input " +
                     std::to_string(in_dims[1] + 2 * p.pad) + "x" +
                     std::to_string(in_dims[2] + 2 * p.pad));
            }
            return {p.out_channels, oh, ow};
        }
        case LayerKind::relu:
        case LayerKind::softmax:
            return in_dims;
        case LayerKind::maxpool2d: {
            const auto& p = std::get<PoolParams>(layer.params);
            if (in_dims.size() != 3) {
                fail("layer \"" + layer.id + "\": maxpool2d needs a [C,H,W] input");
            }
            if (p.window <= 0 || p.stride <= 0) {
                fail("layer \"" + layer.id + "\": invalid pool parameters");
            }
            if (in_dims[1] < p.window || in_dims[2] < p.window) {
                fail("layer \"" + layer.id + "\": pool window " + std::to_string(p.window) +
                     " exceeds input " + std::to_string(in_dims[1]) + "x" +
                     std::to_string(in_dims[2]));
            }
            return {in_dims[0], (in_dims[1] - p.window) / p.stride + 1,
                    (in_dims[2] - p.window) / p.stride + 1};
        }
        case LayerKind::global_avg_pool:
            if (in_dims.size() != 3) {
                fail("layer \"" + layer.id + "\": global_avg_pool needs a [C,H,W] input");
            }
            return {in_dims[0]};
        case LayerKind::flatten:
            return {static_cast<int>(numel_of(in_dims))};
        case LayerKind::dense: {
            const auto& p = std::get<DenseParams>(layer.params);
            if (in_dims.size() != 1) {
                fail("layer \"" + layer.id + "\": dense needs a flat input, got rank " +
                     std::to_string(in_dims.size()));
            }
            if (in_dims[0] != p.in_features) {
                fail("layer \"" + layer.id + "\": input has " + std::to_string(in_dims[0]) +
                     " features, dense expects " + std::to_string(p.in_features));
            }
            if (p.out_features <= 0) {
                fail("layer \"" + layer.id + "\": invalid dense parameters");
            }
            return {p.out_features};
        }
    }
    fail("layer \"" + layer.id + "\": unknown kind");
}

void validate_model(const Model& model) {
    if (model.input_dims.size() != 3) {
        fail("model: input_dims must be [C,H,W]");
    }
    for (int d : model.input_dims) {
        if (d <= 0) fail("model: non-positive input dimension");
    }
    if (model.class_count <= 0) {
        fail("model: class_count must be positive");
    }
    if (model.layers.empty()) {
        fail("model: no layers");
    }

    std::set<std::string> ids;
    std::vector<int> dims = model.input_dims;
    for (const auto& layer : model.layers) {
        if (layer.id.empty()) fail("model: layer with empty id");
        if (!ids.insert(layer.id).second) {
            fail("model: duplicate layer id \"" + layer.id + "\"");
        }
        dims = infer_output_dims(layer, model, dims);

        if (layer.has_weights()) {
            const auto& w = model.weights_of(layer.id);
            if (!w.weight.all_finite() || !w.bias.all_finite()) {
                fail("layer \"" + layer.id + "\": non-finite weights");
            }
            if (layer.kind == LayerKind::conv2d) {
                const auto& p = std::get<ConvParams>(layer.params);
                const std::vector<int> want{p.out_channels, p.in_channels, p.kernel_h, p.kernel_w};
                if (w.weight.dims() != want) {
                    fail("layer \"" + layer.id + "\": conv weight shape " + w.weight.shape_str() +
                         " does not match declared parameters");
                }
                if (w.bias.dims() != std::vector<int>{p.out_channels}) {
                    fail("layer \"" + layer.id + "\": conv bias shape " + w.bias.shape_str());
                }
            } else {
                const auto& p = std::get<DenseParams>(layer.params);
                if (w.weight.dims() != std::vector<int>{p.out_features, p.in_features}) {
                    fail("layer \"" + layer.id + "\": dense weight shape " + w.weight.shape_str() +
                         " does not match declared parameters");
                }
                if (w.bias.dims() != std::vector<int>{p.out_features}) {
                    fail("layer \"" + layer.id + "\": dense bias shape " + w.bias.shape_str());
                }
            }
        }
    }

    if (dims != std::vector<int>{model.class_count}) {
        std::string got = "[";
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) got += ",";
            got += std::to_string(dims[i]);
        }
        got += "]";
        fail("model: final layer produces " + got + ", expected [" +
             std::to_string(model.class_count) + "]");
    }
}

} // namespace nscam
