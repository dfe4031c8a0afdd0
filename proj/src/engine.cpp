#include "nscam/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nscam {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void apply_overlay(Tensor& t, const FilterOverlay& ov) {
    const int channels = t.dim(0);
    const std::size_t plane = static_cast<std::size_t>(t.dim(1)) * t.dim(2);
    for (int c : ov.zeroed_channels) {
        if (c < 0 || c >= channels) {
            fail("overlay: channel " + std::to_string(c) + " out of range [0," +
                 std::to_string(channels) + ") at layer \"" + ov.layer_id + "\"");
        }
        std::fill_n(t.data().begin() + static_cast<std::size_t>(c) * plane, plane, 0.0f);
    }
}

/// Single pass over the chain; optionally captures one layer's output and
/// applies a channel overlay. Shared by forward / activations_at.
Tensor run_chain(const Model& model, const Tensor& input, const FilterOverlay* overlay,
                 const std::string* capture_id, Tensor* captured) {
    if (input.dims() != model.input_dims) {
        fail("forward: input shape " + input.shape_str() + " does not match model input " +
             Tensor(model.input_dims).shape_str());
    }
    if (overlay) {
        const LayerSpec* target = model.find_layer(overlay->layer_id);
        if (!target) {
            fail("overlay: no layer named \"" + overlay->layer_id + "\"");
        }
        if (target->kind != LayerKind::conv2d) {
            fail("overlay: layer \"" + overlay->layer_id + "\" is " +
                 layer_kind_name(target->kind) + ", expected conv2d");
        }
    }

    Tensor x = input;
    bool hit_capture = false;
    for (const auto& layer : model.layers) {
        x = layer_forward(model, layer, x);
        if (overlay && layer.id == overlay->layer_id) {
            apply_overlay(x, *overlay);
        }
        if (capture_id && layer.id == *capture_id) {
            *captured = x;
            hit_capture = true;
        }
    }
    if (capture_id && !hit_capture) {
        fail("activations_at: no layer named \"" + *capture_id + "\"");
    }
    return x;
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad) {
    if (input.rank() != 3) {
        fail("conv2d: input must be [C,H,W], got " + input.shape_str());
    }
    if (weight.rank() != 4) {
        fail("conv2d: weight must be [O,C,kh,kw], got " + weight.shape_str());
    }
    const int in_c = input.dim(0), in_h = input.dim(1), in_w = input.dim(2);
    const int out_c = weight.dim(0), kc = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
    if (kc != in_c) {
        fail("conv2d: input has " + std::to_string(in_c) + " channels, weight expects " +
             std::to_string(kc));
    }
    if (bias.dims() != std::vector<int>{out_c}) {
        fail("conv2d: bias shape " + bias.shape_str() + " does not match " +
             std::to_string(out_c) + " output channels");
    }
    if (stride <= 0 || pad < 0) {
        fail("conv2d: invalid stride/pad");
    }
    if (in_h + 2 * pad < kh || in_w + 2 * pad < kw) {
        fail("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
             " exceeds padded input " + std::to_string(in_h + 2 * pad) + "x" +
             std::to_string(in_w + 2 * pad));
    }

    const int out_h = (in_h + 2 * pad - kh) / stride + 1;
    const int out_w = (in_w + 2 * pad - kw) / stride + 1;
    Tensor out({out_c, out_h, out_w});

    for (int o = 0; o < out_c; ++o) {
        for (int oy = 0; oy < out_h; ++oy) {
            const int base_y = oy * stride - pad;
            for (int ox = 0; ox < out_w; ++ox) {
                const int base_x = ox * stride - pad;
                float acc = 0.0f;
                for (int c = 0; c < in_c; ++c) {
                    for (int ky = 0; ky < kh; ++ky) {
                        const int y = base_y + ky;
                        if (y < 0 || y >= in_h) continue; // zero padding
                        for (int kx = 0; kx < kw; ++kx) {
                            const int x = base_x + kx;
                            if (x < 0 || x >= in_w) continue;
                            acc += input.at3(c, y, x) * weight.at4(o, c, ky, kx);
                        }
                    }
                }
                out.at3(o, oy, ox) = acc + bias.at1(o);
            }
        }
    }
    return out;
}

Tensor maxpool2d(const Tensor& input, int window, int stride) {
    if (input.rank() != 3) {
        fail("maxpool2d: input must be [C,H,W], got " + input.shape_str());
    }
    if (window <= 0 || stride <= 0) {
        fail("maxpool2d: invalid window/stride");
    }
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h < window || w < window) {
        fail("maxpool2d: window " + std::to_string(window) + " exceeds input " +
             std::to_string(h) + "x" + std::to_string(w));
    }
    const int oh = (h - window) / stride + 1;
    const int ow = (w - window) / stride + 1;
    Tensor out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float m = -std::numeric_limits<float>::infinity();
                for (int ky = 0; ky < window; ++ky) {
                    for (int kx = 0; kx < window; ++kx) {
                        m = std::max(m, input.at3(ch, oy * stride + ky, ox * stride + kx));
                    }
                }
                out.at3(ch, oy, ox) = m;
            }
        }
    }
    return out;
}

Tensor global_avg_pool(const Tensor& input) {
    if (input.rank() != 3) {
        fail("global_avg_pool: input must be [C,H,W], got " + input.shape_str());
    }
    const int c = input.dim(0);
    const std::size_t plane = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const float* p = input.data().data() + static_cast<std::size_t>(ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        out.at1(ch) = static_cast<float>(acc / static_cast<double>(plane));
    }
    return out;
}

Tensor flatten(const Tensor& input) {
    return Tensor({static_cast<int>(input.numel())}, input.data());
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.rank() != 1) {
        fail("dense: input must be flat, got " + input.shape_str());
    }
    if (weight.rank() != 2) {
        fail("dense: weight must be [O,I], got " + weight.shape_str());
    }
    const int in_f = input.dim(0);
    const int out_f = weight.dim(0);
    if (weight.dim(1) != in_f) {
        fail("dense: input has " + std::to_string(in_f) + " features, weight expects " +
             std::to_string(weight.dim(1)));
    }
    if (bias.dims() != std::vector<int>{out_f}) {
        fail("dense: bias shape " + bias.shape_str());
    }
    Tensor out({out_f});
    for (int o = 0; o < out_f; ++o) {
        float acc = 0.0f;
        const float* w = weight.data().data() + static_cast<std::size_t>(o) * in_f;
        for (int i = 0; i < in_f; ++i) {
            acc += w[i] * input[static_cast<std::size_t>(i)];
        }
        out.at1(o) = acc + bias.at1(o);
    }
    return out;
}

Tensor softmax(const Tensor& input) {
    if (input.numel() == 0) fail("softmax: empty input");
    const float m = *std::max_element(input.data().begin(), input.data().end());
    Tensor out = input;
    double sum = 0.0;
    for (auto& v : out.data()) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : out.data()) {
        v = static_cast<float>(v / sum);
    }
    return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) fail("softmax: empty input");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

Tensor layer_forward(const Model& model, const LayerSpec& layer, const Tensor& input) {
    switch (layer.kind) {
        case LayerKind::conv2d: {
            const auto& p = std::get<ConvParams>(layer.params);
            const auto& w = model.weights_of(layer.id);
            return conv2d(input, w.weight, w.bias, p.stride, p.pad);
        }
        case LayerKind::relu:
            return relu(input);
        case LayerKind::maxpool2d: {
            const auto& p = std::get<PoolParams>(layer.params);
            return maxpool2d(input, p.window, p.stride);
        }
        case LayerKind::global_avg_pool:
            return global_avg_pool(input);
        case LayerKind::flatten:
            return flatten(input);
        case LayerKind::dense: {
            const auto& w = model.weights_of(layer.id);
            return dense(input, w.weight, w.bias);
        }
        case LayerKind::softmax:
            return softmax(input);
    }
    fail("layer \"" + layer.id + "\": unknown kind");
}

Tensor forward(const Model& model, const Tensor& input,
               const std::optional<FilterOverlay>& overlay) {
    return run_chain(model, input, overlay ? &*overlay : nullptr, nullptr, nullptr);
}

Tensor activations_at(const Model& model, const Tensor& input, const std::string& layer_id) {
    Tensor captured;
    run_chain(model, input, nullptr, &layer_id, &captured);
    return captured;
}

std::vector<double> predict_all(const Model& model, const Tensor& input,
                                const std::optional<FilterOverlay>& overlay) {
    const Tensor logits = forward(model, input, overlay);
    std::vector<double> raw(logits.data().begin(), logits.data().end());
    return softmax(raw);
}

double predict_prob(const Model& model, const Tensor& input, int class_index,
                    const std::optional<FilterOverlay>& overlay) {
    if (class_index < 0 || class_index >= model.class_count) {
        fail("predict_prob: class " + std::to_string(class_index) + " out of range [0," +
             std::to_string(model.class_count) + ")");
    }
    return predict_all(model, input, overlay)[static_cast<std::size_t>(class_index)];
}

} // namespace nscam
