#ifndef NSCAM_EXPLAIN_HPP
#define NSCAM_EXPLAIN_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nscam/causal.hpp"
#include "nscam/engine.hpp"
#include "nscam/model.hpp"
#include "nscam/tensor.hpp"

namespace nscam {

/// A cause mask or saliency map is an [H,W] grid in [0,1] at input resolution.
using CauseMask = Tensor;
using SaliencyMap = Tensor;

struct ExplainConfig {
    int k_necessity = 32;   // hypothesized-set budget, necessity direction
    int k_sufficiency = 32; // hypothesized-set budget, sufficiency direction
    int permutations = 64;  // sampling budget when enumeration is too big
    int exact_threshold = 10; // enumerate exactly up to this many causes
    std::uint64_t seed = 0;
};

struct ExplainRequest {
    const Model* model = nullptr;
    Tensor image; // [C,H,W], values in [0,1]
    std::string layer_id;
    int class_index = 0;
    CauseKind cause_kind = CauseKind::feature;
    ExplainConfig config;
};

struct ExplanationResult {
    SaliencyMap n_map; // where the class evidence is necessary
    SaliencyMap s_map; // where the class evidence is sufficient
    ShapleyReport n_report;
    ShapleyReport s_report;
    CauseUniverse universe;      // every channel of the explained layer
    CauseUniverse hypothesized_n;
    CauseUniverse hypothesized_s;
    double p_orig = 0.0;
    std::vector<std::string> warnings;
};

/// Spatial footprint of one channel: its activation map upsampled to input
/// resolution (align-corners bilinear) and min-max normalized. A constant
/// activation map yields an all-zero mask.
CauseMask build_cause_mask(const Tensor& channel_activation, int out_h, int out_w);

/// Union footprint of a coalition: the elementwise max over the members'
/// masks. masks is indexed by cause id; an empty coalition gives an all-zero
/// mask (it keeps or removes nothing).
CauseMask coalition_mask(const std::vector<CauseMask>& masks, const Coalition& coalition);

/// A matched pair of cached value functions over one cause universe.
struct Executors {
    double p_orig = 0.0;
    std::unique_ptr<CoalitionValueFn> necessity;
    std::unique_ptr<CoalitionValueFn> sufficiency;
};

/// Input-space interventions. Necessity of a coalition masks its union
/// footprint out of the image; sufficiency keeps only the union footprint.
/// Keeping the full universe is the identity intervention, so its
/// sufficiency value is exactly 1 whenever p_orig is above the epsilon
/// floor.
Executors make_feature_executors(const Model& model, const Tensor& image, int class_index,
                                 const std::vector<CauseMask>& masks);

/// Channel-space interventions at one conv2d layer. Necessity zeroes the
/// coalition's channels; sufficiency zeroes the complement, keeping only the
/// coalition alive.
Executors make_filter_executors(const Model& model, const Tensor& image, int class_index,
                                const std::string& layer_id, int channel_count);

/// Responsibility-weighted activation sum -> relu -> upsample -> minmax_norm.
/// Channels outside the report's hypothesized set contribute zero weight.
SaliencyMap compose_saliency(const ShapleyReport& report, const Tensor& activations, int out_h,
                             int out_w);

/// The full pipeline: score every channel of the target layer in both
/// directions, keep the top-k as hypothesized causes, attribute
/// responsibility to them (exact enumeration when the hypothesized set is
/// within exact_threshold, seeded permutation sampling otherwise), and
/// compose one saliency map per direction. Deterministic for a fixed
/// request and seed. Degenerate inputs (vanishing class probability,
/// constant activation channels) complete with warnings.
ExplanationResult explain(const ExplainRequest& request);

} // namespace nscam

#endif
