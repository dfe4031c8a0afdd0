#include "nscam/explain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nscam {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string format_prob(double p) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << p;
    return os.str();
}

} // namespace

CauseMask build_cause_mask(const Tensor& channel_activation, int out_h, int out_w) {
    return minmax_norm(upsample_bilinear(channel_activation, out_h, out_w));
}

CauseMask coalition_mask(const std::vector<CauseMask>& masks, const Coalition& coalition) {
    if (masks.empty()) fail("coalition_mask: no masks");
    CauseMask out(masks.front().dims());
    for (int id : coalition.members()) {
        if (id < 0 || static_cast<std::size_t>(id) >= masks.size()) {
            fail("coalition_mask: cause id " + std::to_string(id) + " outside [0," +
                 std::to_string(masks.size()) + ")");
        }
        const CauseMask& m = masks[static_cast<std::size_t>(id)];
        if (!m.same_shape(out)) {
            fail("coalition_mask: mask shapes differ, " + m.shape_str() + " vs " +
                 out.shape_str());
        }
        for (std::size_t i = 0; i < out.numel(); ++i) {
            out[i] = std::max(out[i], m[i]);
        }
    }
    return out;
}

Executors make_feature_executors(const Model& model, const Tensor& image, int class_index,
                                 const std::vector<CauseMask>& masks) {
    const double p_orig = predict_prob(model, image, class_index);
    const std::size_t universe_size = masks.size();

    Executors ex;
    ex.p_orig = p_orig;
    ex.necessity = std::make_unique<CoalitionValueFn>(
        Direction::necessity, [&model, image, class_index, p_orig, masks](const Coalition& c) {
            const Tensor masked = hadamard(image, one_minus(coalition_mask(masks, c)));
            return necessity_value(p_orig, predict_prob(model, masked, class_index));
        });
    ex.sufficiency = std::make_unique<CoalitionValueFn>(
        Direction::sufficiency,
        [&model, image, class_index, p_orig, masks, universe_size](const Coalition& c) {
            if (c.size() == universe_size) {
                // Keeping every cause removes nothing: identity intervention.
                return sufficiency_value(p_orig, p_orig);
            }
            const Tensor kept = hadamard(image, coalition_mask(masks, c));
            return sufficiency_value(p_orig, predict_prob(model, kept, class_index));
        });
    return ex;
}

Executors make_filter_executors(const Model& model, const Tensor& image, int class_index,
                                const std::string& layer_id, int channel_count) {
    const double p_orig = predict_prob(model, image, class_index);

    Executors ex;
    ex.p_orig = p_orig;
    ex.necessity = std::make_unique<CoalitionValueFn>(
        Direction::necessity,
        [&model, image, class_index, p_orig, layer_id](const Coalition& c) {
            if (c.empty()) {
                return necessity_value(p_orig, predict_prob(model, image, class_index));
            }
            FilterOverlay ov{layer_id, {c.members().begin(), c.members().end()}};
            return necessity_value(p_orig, predict_prob(model, image, class_index, ov));
        });
    ex.sufficiency = std::make_unique<CoalitionValueFn>(
        Direction::sufficiency,
        [&model, image, class_index, p_orig, layer_id, channel_count](const Coalition& c) {
            FilterOverlay ov{layer_id, {}};
            for (int ch = 0; ch < channel_count; ++ch) {
                if (!c.contains(ch)) ov.zeroed_channels.insert(ch);
            }
            if (ov.zeroed_channels.empty()) {
                // Full coalition keeps every channel alive.
                return sufficiency_value(p_orig, p_orig);
            }
            return sufficiency_value(p_orig, predict_prob(model, image, class_index, ov));
        });
    return ex;
}

SaliencyMap compose_saliency(const ShapleyReport& report, const Tensor& activations, int out_h,
                             int out_w) {
    if (activations.rank() != 3) {
        fail("compose_saliency: activations must be [K,h,w], got " + activations.shape_str());
    }
    const int k = activations.dim(0);
    const int h = activations.dim(1);
    const int w = activations.dim(2);
    Tensor weighted({h, w});
    for (int ch = 0; ch < k; ++ch) {
        const double r = report.value_or_zero(ch);
        if (r == 0.0) continue;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                weighted.data()[static_cast<std::size_t>(y) * w + x] +=
                    static_cast<float>(r) * activations.at3(ch, y, x);
            }
        }
    }
    return minmax_norm(upsample_bilinear(relu(weighted), out_h, out_w));
}

ExplanationResult explain(const ExplainRequest& request) {
    if (!request.model) fail("explain: no model");
    const Model& model = *request.model;
    const ExplainConfig& cfg = request.config;

    if (request.class_index < 0 || request.class_index >= model.class_count) {
        fail("explain: class " + std::to_string(request.class_index) + " out of range [0," +
             std::to_string(model.class_count) + ")");
    }
    if (cfg.k_necessity < 1 || cfg.k_sufficiency < 1 || cfg.permutations < 1 ||
        cfg.exact_threshold < 1) {
        fail("explain: k, permutation and threshold settings must be >= 1");
    }
    const LayerSpec* layer = model.find_layer(request.layer_id);
    if (!layer) fail("explain: no layer named \"" + request.layer_id + "\"");
    if (layer->kind != LayerKind::conv2d) {
        fail("explain: layer \"" + request.layer_id + "\" is " + layer_kind_name(layer->kind) +
             "; causes are drawn from conv2d layers");
    }
    for (float v : request.image.data()) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            fail("explain: image values must lie in [0,1]");
        }
    }

    ExplanationResult result;

    const Tensor acts = activations_at(model, request.image, request.layer_id);
    const int k = acts.dim(0);
    const int out_h = model.input_dims[1];
    const int out_w = model.input_dims[2];

    result.universe.kind = request.cause_kind;
    result.universe.cause_ids.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) result.universe.cause_ids[static_cast<std::size_t>(i)] = i;

    std::vector<CauseMask> masks;
    if (request.cause_kind == CauseKind::feature) {
        masks.reserve(static_cast<std::size_t>(k));
        std::vector<int> constant_channels;
        for (int ch = 0; ch < k; ++ch) {
            Tensor plane({acts.dim(1), acts.dim(2)});
            const std::size_t n = plane.numel();
            std::copy_n(acts.data().begin() + static_cast<std::size_t>(ch) * n, n,
                        plane.data().begin());
            CauseMask m = build_cause_mask(plane, out_h, out_w);
            if (*std::max_element(m.data().begin(), m.data().end()) == 0.0f) {
                constant_channels.push_back(ch);
            }
            masks.push_back(std::move(m));
        }
        if (!constant_channels.empty()) {
            std::string list;
            for (std::size_t i = 0; i < constant_channels.size(); ++i) {
                if (i) list += ",";
                list += std::to_string(constant_channels[i]);
            }
            result.warnings.push_back("layer \"" + request.layer_id + "\" channel(s) " + list +
                                      " have constant activations; their masks are empty");
        }
    }

    Executors ex = request.cause_kind == CauseKind::feature
                       ? make_feature_executors(model, request.image, request.class_index, masks)
                       : make_filter_executors(model, request.image, request.class_index,
                                               request.layer_id, k);
    result.p_orig = ex.p_orig;
    if (ex.p_orig <= kProbEpsilon) {
        result.warnings.push_back("class " + std::to_string(request.class_index) +
                                  " probability " + format_prob(ex.p_orig) + " is at or below " +
                                  format_prob(kProbEpsilon) +
                                  "; values are normalized by the epsilon floor");
    }

    const auto n_scores = singleton_scan(*ex.necessity, result.universe);
    const auto s_scores = singleton_scan(*ex.sufficiency, result.universe);
    result.hypothesized_n = select_hypothesized(n_scores, result.universe, cfg.k_necessity);
    result.hypothesized_s = select_hypothesized(s_scores, result.universe, cfg.k_sufficiency);

    auto attribute = [&](const CoalitionValueFn& fn, const CauseUniverse& hyp,
                         std::uint64_t seed) {
        if (static_cast<int>(hyp.size()) <= cfg.exact_threshold) {
            return shapley_exact(fn, hyp);
        }
        return shapley_sampled(fn, hyp, cfg.permutations, seed);
    };
    // Direction-specific sampling streams; keeps the two reports independent
    // while still a pure function of the request seed.
    result.n_report = attribute(*ex.necessity, result.hypothesized_n, cfg.seed);
    result.s_report = attribute(*ex.sufficiency, result.hypothesized_s, cfg.seed + 1);

    result.n_map = compose_saliency(result.n_report, acts, out_h, out_w);
    result.s_map = compose_saliency(result.s_report, acts, out_h, out_w);
    return result;
}

} // namespace nscam
