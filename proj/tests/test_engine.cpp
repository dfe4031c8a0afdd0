#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "nscam/engine.hpp"
#include "nscam/fixtures.hpp"
#include "reference_engine.hpp"

using namespace nscam;
using namespace nscam::testsupport;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.dims() == b.dims());
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

bool bit_identical(const Tensor& a, const Tensor& b) {
    return a.dims() == b.dims() &&
           std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

} // namespace

TEST_CASE("conv2d hand case: diagonal 2x2 kernel over 3x3 ramp") {
    const Tensor input({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Tensor weight({1, 1, 2, 2}, {1, 0, 0, 1});
    const Tensor bias({1}, {0.5f});
    const Tensor out = conv2d(input, weight, bias, 1, 0);
    // window sums: 1+5, 2+6, 4+8, 5+9, each plus the 0.5 bias
    CHECK(out.dims() == std::vector<int>{1, 2, 2});
    CHECK(out.data() == std::vector<float>{6.5f, 8.5f, 12.5f, 14.5f});
}

TEST_CASE("conv2d zero padding contributes nothing at the border") {
    const Tensor input({1, 2, 2}, {1, 2, 3, 4});
    const Tensor weight({1, 1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0}); // center tap
    const Tensor bias({1}, {0.0f});
    const Tensor out = conv2d(input, weight, bias, 1, 1);
    CHECK(out.dims() == std::vector<int>{1, 2, 2});
    CHECK(out.data() == std::vector<float>{1, 2, 3, 4});
}

TEST_CASE("conv2d rejects mismatched shapes") {
    const Tensor input({2, 4, 4});
    CHECK_THROWS_AS(conv2d(input, Tensor({1, 3, 3, 3}), Tensor({1}), 1, 0),
                    std::invalid_argument); // 3 input channels expected, 2 given
    CHECK_THROWS_AS(conv2d(input, Tensor({1, 2, 3, 3}), Tensor({2}), 1, 0),
                    std::invalid_argument); // bias length
    CHECK_THROWS_AS(conv2d(input, Tensor({1, 2, 3, 3}), Tensor({1}), 0, 0),
                    std::invalid_argument); // stride
    CHECK_THROWS_AS(conv2d(input, Tensor({1, 2, 5, 5}), Tensor({1}), 1, 0),
                    std::invalid_argument); // kernel exceeds input
}

TEST_CASE("maxpool2d picks window maxima") {
    const Tensor input({1, 2, 4}, {1, 5, 2, 0, 3, 4, 8, 6});
    const Tensor out = maxpool2d(input, 2, 2);
    CHECK(out.dims() == std::vector<int>{1, 1, 2});
    CHECK(out.data() == std::vector<float>{5, 8});
}

TEST_CASE("global_avg_pool averages each channel plane") {
    const Tensor input({2, 2, 2}, {1, 2, 3, 4, 4, 4, 4, 4});
    const Tensor out = global_avg_pool(input);
    CHECK(out.dims() == std::vector<int>{2});
    CHECK(out[0] == doctest::Approx(2.5).epsilon(1e-7));
    CHECK(out[1] == 4.0f);
}

TEST_CASE("flatten preserves row-major order") {
    const Tensor input({2, 1, 2}, {9, 8, 7, 6});
    const Tensor out = flatten(input);
    CHECK(out.dims() == std::vector<int>{4});
    CHECK(out.data() == std::vector<float>{9, 8, 7, 6});
}

TEST_CASE("dense hand case") {
    const Tensor weight({2, 3}, {1, 0, 0, 0, 1, 0});
    const Tensor bias({2}, {1.0f, -1.0f});
    const Tensor out = dense(Tensor({3}, {5, 7, 9}), weight, bias);
    CHECK(out.data() == std::vector<float>{6.0f, 6.0f});
}

TEST_CASE("softmax is stable under large logits and sums to one") {
    for (float shift : {0.0f, 1e4f, -1e4f}) {
        const Tensor p = softmax(Tensor({3}, {shift, shift + 1.0f, shift - 2.0f}));
        double sum = 0.0;
        for (float v : p.data()) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0f);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(p[1] > p[0]);
        CHECK(p[0] > p[2]);
    }
    const Tensor even = softmax(Tensor({2}, {3.0f, 3.0f}));
    CHECK(even[0] == 0.5f);
    CHECK(even[1] == 0.5f);
}

TEST_CASE("forward rejects wrong input shapes and bad overlays") {
    const Model model = fixtures::planted_model();
    CHECK_THROWS_AS(forward(model, Tensor({1, 16, 16})), std::invalid_argument);

    const Tensor image = fixtures::planted_image();
    CHECK_THROWS_WITH_AS(forward(model, image, FilterOverlay{"nope", {0}}),
                         doctest::Contains("no layer named"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(forward(model, image, FilterOverlay{"relu1", {0}}),
                         doctest::Contains("expected conv2d"), std::invalid_argument);
    CHECK_THROWS_AS(forward(model, image, FilterOverlay{"conv1", {99}}), std::invalid_argument);
}

TEST_CASE("activations_at names missing layers") {
    const Model model = fixtures::tiny_model();
    CHECK_THROWS_WITH_AS(activations_at(model, fixtures::tiny_image(), "ghost"),
                         doctest::Contains("ghost"), std::invalid_argument);
}

TEST_CASE("every fixture matches the naive reference within 1e-5") {
    for (const auto& fx : fixtures::all_fixtures()) {
        CAPTURE(fx.name);
        const Tensor got = forward(fx.model, fx.image);
        const Tensor want = reference_forward(fx.model, fx.image);
        CHECK(max_abs_diff(got, want) <= 1e-5);

        const Tensor acts = activations_at(fx.model, fx.image, fx.explain_layer);
        const Tensor ref_acts = reference_activations(fx.model, fx.image, fx.explain_layer);
        CHECK(max_abs_diff(acts, ref_acts) <= 1e-5);

        const double p = predict_prob(fx.model, fx.image, fx.class_index);
        const double pr = reference_predict_prob(fx.model, fx.image, fx.class_index);
        CHECK(std::abs(p - pr) <= 1e-5);
    }
}

TEST_CASE("overlay equals literal filter zeroing bit for bit") {
    for (const auto& fx : fixtures::all_fixtures()) {
        CAPTURE(fx.name);
        const auto* layer = fx.model.find_layer(fx.explain_layer);
        REQUIRE(layer != nullptr);
        const int out_c = std::get<ConvParams>(layer->params).out_channels;

        std::vector<std::set<int>> channel_sets = {{0}};
        if (out_c > 1) channel_sets.push_back({0, out_c - 1});
        std::set<int> all;
        for (int c = 0; c < out_c; ++c) all.insert(c);
        channel_sets.push_back(all);

        for (const auto& channels : channel_sets) {
            const Tensor with_overlay =
                forward(fx.model, fx.image, FilterOverlay{fx.explain_layer, channels});
            const Model zeroed = zero_filters_copy(fx.model, fx.explain_layer, channels);
            const Tensor with_zeroed = forward(zeroed, fx.image);
            CHECK(bit_identical(with_overlay, with_zeroed));
        }
    }
}

TEST_CASE("forward is deterministic") {
    const Model model = fixtures::gap_model();
    const Tensor image = fixtures::gap_image();
    CHECK(bit_identical(forward(model, image), forward(model, image)));
}

TEST_CASE("predict_all is a probability vector consistent with predict_prob") {
    const Model model = fixtures::tiny_model();
    const Tensor image = fixtures::tiny_image();
    const auto probs = predict_all(model, image);
    REQUIRE(static_cast<int>(probs.size()) == model.class_count);
    double sum = 0.0;
    for (int c = 0; c < model.class_count; ++c) {
        CHECK(probs[c] == predict_prob(model, image, c));
        sum += probs[c];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}
