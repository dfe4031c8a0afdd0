#include "nscam/fixtures.hpp"

#include <cmath>

#include "nscam/rng.hpp"

namespace nscam::fixtures {

namespace {

constexpr int kPatch0 = 4;
constexpr int kPatch1 = 12; // exclusive
constexpr float kDetectorThreshold = 0.75f;

LayerSpec conv_layer(std::string id, ConvParams p) {
    return {std::move(id), LayerKind::conv2d, p};
}

LayerSpec dense_layer(std::string id, DenseParams p) {
    return {std::move(id), LayerKind::dense, p};
}

} // namespace

Model planted_model() {
    Model m;
    m.input_dims = {1, 32, 32};
    m.class_count = 2;
    m.layers.push_back(conv_layer("conv1", {4, 1, 3, 3, 1, 1}));
    m.layers.push_back({"relu1", LayerKind::relu, NoParams{}});
    m.layers.push_back({"pool1", LayerKind::maxpool2d, PoolParams{2, 2}});
    m.layers.push_back({"flat", LayerKind::flatten, NoParams{}});
    m.layers.push_back(dense_layer("fc", {2, 4 * 16 * 16}));

    LayerWeights conv;
    conv.weight = Tensor({4, 1, 3, 3});
    conv.bias = Tensor({4});
    // Channel 0: brightness detector. Positive only where the input clears
    // the threshold, i.e. inside the bright patch.
    conv.weight.at4(0, 0, 1, 1) = 1.0f;
    conv.bias.at1(0) = -kDetectorThreshold;
    // Channels 1/2: scaled horizontal/vertical gradient kernels.
    const float sob[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 3; ++x) {
            conv.weight.at4(1, 0, y, x) = 0.25f * sob[y][x];
            conv.weight.at4(2, 0, y, x) = 0.25f * sob[x][y];
        }
    }
    // Channel 3: no weights at all, just a bias. Constant activation map.
    conv.bias.at1(3) = 0.35f;
    m.weights.emplace("conv1", std::move(conv));

    LayerWeights fc;
    fc.weight = Tensor({2, 4 * 16 * 16});
    fc.bias = Tensor({2});
    fc.bias.at1(0) = 2.0f; // class 0 is a plain offset
    // Class 1 reads channel 0 at the pooled footprint of the patch. The
    // flattened pooled tensor is [4,16,16], so (ch=0, y, x) sits at y*16+x.
    const std::size_t class1_row = 1 * (4 * 16 * 16);
    for (int y = kPatch0 / 2; y < kPatch1 / 2; ++y) {
        for (int x = kPatch0 / 2; x < kPatch1 / 2; ++x) {
            fc.weight.data()[class1_row + static_cast<std::size_t>(y) * 16 +
                             static_cast<std::size_t>(x)] = 3.2f;
        }
    }
    m.weights.emplace("fc", std::move(fc));

    validate_model(m);
    return m;
}

Tensor planted_image(int variant) {
    Tensor img({1, 32, 32});
    const float bg_scale = 1.0f - 0.05f * static_cast<float>(variant % 5);
    const float patch_drop = 0.002f * static_cast<float>(variant);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            float v = bg_scale * (0.05f + 0.10f * x / 31.0f + 0.08f * y / 31.0f);
            if (y >= kPatch0 && y < kPatch1 && x >= kPatch0 && x < kPatch1) {
                const float d2 = static_cast<float>((y - 6) * (y - 6) + (x - 6) * (x - 6));
                v = 1.0f - 0.003f * d2 - patch_drop;
            }
            img.at3(0, y, x) = v;
        }
    }
    return img;
}

BBox planted_bbox() { return {kPatch0, kPatch0, kPatch1, kPatch1}; }

Model tiny_model() {
    Model m;
    m.input_dims = {1, 4, 4};
    m.class_count = 3;
    m.layers.push_back(conv_layer("conv1", {2, 1, 3, 3, 1, 1}));
    m.layers.push_back({"relu1", LayerKind::relu, NoParams{}});
    m.layers.push_back({"flat", LayerKind::flatten, NoParams{}});
    m.layers.push_back(dense_layer("fc", {3, 32}));

    LayerWeights conv;
    conv.weight = Tensor({2, 1, 3, 3});
    conv.bias = Tensor({2});
    conv.weight.at4(0, 0, 1, 1) = 1.0f;
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 3; ++x) {
            conv.weight.at4(1, 0, y, x) = 1.0f / 9.0f;
        }
    }
    conv.bias.at1(1) = 0.1f;
    m.weights.emplace("conv1", std::move(conv));

    LayerWeights fc;
    fc.weight = Tensor({3, 32});
    fc.bias = Tensor({3}, {0.1f, 0.0f, -0.1f});
    for (int o = 0; o < 3; ++o) {
        for (int i = 0; i < 32; ++i) {
            fc.weight.data()[static_cast<std::size_t>(o) * 32 + i] =
                0.03f * static_cast<float>((i * (o + 2)) % 11 - 5);
        }
    }
    m.weights.emplace("fc", std::move(fc));

    validate_model(m);
    return m;
}

Tensor tiny_image() {
    Tensor img({1, 4, 4});
    for (int i = 0; i < 16; ++i) {
        img.data()[static_cast<std::size_t>(i)] = 0.1f + 0.8f * static_cast<float>(i) / 15.0f;
    }
    return img;
}

Model gap_model() {
    Model m;
    m.input_dims = {2, 6, 6};
    m.class_count = 2;
    m.layers.push_back(conv_layer("conv1", {3, 2, 3, 3, 1, 0}));
    m.layers.push_back({"relu1", LayerKind::relu, NoParams{}});
    m.layers.push_back({"gap", LayerKind::global_avg_pool, NoParams{}});
    m.layers.push_back(dense_layer("fc", {2, 3}));

    LayerWeights conv;
    conv.weight = Tensor({3, 2, 3, 3});
    conv.bias = Tensor({3}, {0.05f, -0.05f, 0.1f});
    for (int o = 0; o < 3; ++o) {
        for (int i = 0; i < 2; ++i) {
            for (int y = 0; y < 3; ++y) {
                for (int x = 0; x < 3; ++x) {
                    conv.weight.at4(o, i, y, x) =
                        0.15f * static_cast<float>((o + 2 * i + y + x) % 5 - 2);
                }
            }
        }
    }
    m.weights.emplace("conv1", std::move(conv));

    LayerWeights fc;
    fc.weight = Tensor({2, 3}, {0.9f, -0.4f, 0.3f, -0.6f, 0.8f, 0.2f});
    fc.bias = Tensor({2}, {0.1f, -0.1f});
    m.weights.emplace("fc", std::move(fc));

    validate_model(m);
    return m;
}

Tensor gap_image() {
    Tensor img({2, 6, 6});
    for (std::size_t i = 0; i < img.numel(); ++i) {
        img.data()[i] = 0.05f + 0.9f * static_cast<float>((7 * i + 3) % 23) / 22.0f;
    }
    return img;
}

Model skewed_model() {
    Model m;
    m.input_dims = {1, 8, 8};
    m.class_count = 2;
    m.layers.push_back(conv_layer("conv1", {2, 1, 3, 3, 1, 1}));
    m.layers.push_back({"relu1", LayerKind::relu, NoParams{}});
    m.layers.push_back({"flat", LayerKind::flatten, NoParams{}});
    m.layers.push_back(dense_layer("fc", {2, 128}));

    LayerWeights conv;
    conv.weight = Tensor({2, 1, 3, 3});
    conv.bias = Tensor({2});
    conv.weight.at4(0, 0, 1, 1) = 1.0f;
    conv.weight.at4(1, 0, 1, 1) = 0.5f;
    conv.bias.at1(1) = 0.1f;
    m.weights.emplace("conv1", std::move(conv));

    LayerWeights fc;
    fc.weight = Tensor({2, 128});
    fc.bias = Tensor({2}, {0.0f, 25.0f}); // p(class 0) ~ e^-25
    m.weights.emplace("fc", std::move(fc));

    validate_model(m);
    return m;
}

Tensor skewed_image() {
    Tensor img({1, 8, 8});
    for (std::size_t i = 0; i < img.numel(); ++i) {
        img.data()[i] = 0.1f + 0.8f * static_cast<float>((5 * i + 1) % 17) / 16.0f;
    }
    return img;
}

Model random_chain_model(int variant, std::uint64_t seed) {
    Model m;
    m.class_count = 2;
    switch (variant % 3) {
        case 0:
            m.input_dims = {1, 12, 12};
            m.layers.push_back(conv_layer("conv1", {3, 1, 3, 3, 1, 1}));
            m.layers.push_back({"relu1", LayerKind::relu, NoParams{}});
            m.layers.push_back({"pool1", LayerKind::maxpool2d, PoolParams{2, 2}});
            m.layers.push_back(conv_layer("conv2", {4, 3, 1, 1, 1, 0}));
            m.layers.push_back({"relu2", LayerKind::relu, NoParams{}});
            m.layers.push_back({"flat", LayerKind::flatten, NoParams{}});
            m.layers.push_back(dense_layer("fc", {2, 4 * 6 * 6}));
            break;
        case 1:
            m.input_dims = {3, 16, 16};
            m.layers.push_back(conv_layer("conv1", {2, 3, 5, 5, 2, 2}));
            m.layers.push_back({"relu1", LayerKind::relu, NoParams{}});
            m.layers.push_back(conv_layer("conv2", {3, 2, 3, 3, 1, 1}));
            m.layers.push_back({"relu2", LayerKind::relu, NoParams{}});
            m.layers.push_back({"gap", LayerKind::global_avg_pool, NoParams{}});
            m.layers.push_back(dense_layer("fc", {2, 3}));
            break;
        default:
            m.input_dims = {1, 9, 9};
            m.layers.push_back(conv_layer("conv1", {4, 1, 4, 4, 2, 1}));
            m.layers.push_back({"relu1", LayerKind::relu, NoParams{}});
            m.layers.push_back({"flat", LayerKind::flatten, NoParams{}});
            m.layers.push_back(dense_layer("fc", {2, 4 * 4 * 4}));
            break;
    }

    NormalSampler noise(seed);
    for (const auto& layer : m.layers) {
        if (!layer.has_weights()) continue;
        LayerWeights w;
        if (layer.kind == LayerKind::conv2d) {
            const auto& p = std::get<ConvParams>(layer.params);
            w.weight = Tensor({p.out_channels, p.in_channels, p.kernel_h, p.kernel_w});
            w.bias = Tensor({p.out_channels});
        } else {
            const auto& p = std::get<DenseParams>(layer.params);
            w.weight = Tensor({p.out_features, p.in_features});
            w.bias = Tensor({p.out_features});
        }
        for (auto& v : w.weight.data()) v = static_cast<float>(noise.next(0.4));
        for (auto& v : w.bias.data()) v = static_cast<float>(noise.next(0.4));
        m.weights.emplace(layer.id, std::move(w));
    }

    validate_model(m);
    return m;
}

Tensor random_image(const Model& model, std::uint64_t seed) {
    Tensor img(model.input_dims);
    std::mt19937_64 gen(seed);
    for (auto& v : img.data()) {
        v = static_cast<float>(uniform01(gen));
    }
    return img;
}

std::vector<Fixture> all_fixtures() {
    std::vector<Fixture> out;
    out.push_back({"planted", planted_model(), planted_image(0), "conv1", 1});
    out.push_back({"tiny", tiny_model(), tiny_image(), "conv1", 0});
    out.push_back({"gap", gap_model(), gap_image(), "conv1", 1});
    for (int variant = 0; variant < 3; ++variant) {
        Model m = random_chain_model(variant, 1000 + static_cast<std::uint64_t>(variant));
        Tensor img = random_image(m, 2000 + static_cast<std::uint64_t>(variant));
        out.push_back({"random" + std::to_string(variant), std::move(m), std::move(img), "conv1",
                       variant % 2});
    }
    return out;
}

} // namespace nscam::fixtures
