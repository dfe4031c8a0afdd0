#ifndef NSCAM_MODEL_HPP
#define NSCAM_MODEL_HPP

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "nscam/tensor.hpp"

namespace nscam {

enum class LayerKind {
    conv2d,
    relu,
    maxpool2d,
    global_avg_pool,
    flatten,
    dense,
    softmax,
};

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct ConvParams {
    int out_channels = 0;
    int in_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    int stride = 1;
    int pad = 0;
};

struct PoolParams {
    int window = 0;
    int stride = 0;
};

struct DenseParams {
    int out_features = 0;
    int in_features = 0;
};

struct NoParams {};

using LayerParams = std::variant<NoParams, ConvParams, PoolParams, DenseParams>;

struct LayerSpec {
    std::string id;
    LayerKind kind = LayerKind::relu;
    LayerParams params;

    bool has_weights() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }
};

/// Learned parameters of one conv2d or dense layer.
/// conv2d: weight [out,in,kh,kw], bias [out].
/// dense:  weight [out,in],       bias [out].
struct LayerWeights {
    Tensor weight;
    Tensor bias;
};

/// An immutable feed-forward chain. Weights are keyed by layer id; layers
/// execute in declaration order and each consumes the previous output.
struct Model {
    std::vector<LayerSpec> layers;
    std::map<std::string, LayerWeights> weights;
    std::vector<int> input_dims; // [C,H,W]
    int class_count = 0;

    const LayerSpec* find_layer(const std::string& id) const;
    const LayerWeights& weights_of(const std::string& id) const;
};

/// Non-destructive intervention: zero the listed output channels of one
/// conv2d layer during a forward pass. Equivalent, bit for bit, to running
/// a copy of the model whose corresponding filter weights and biases were
/// set to zero.
struct FilterOverlay {
    std::string layer_id;
    std::set<int> zeroed_channels;
};

/// Output shape of a single layer given its input shape. Rejects shape
/// mismatches with a message naming the offending dimension.
std::vector<int> infer_output_dims(const LayerSpec& layer, const Model& model,
                                   const std::vector<int>& in_dims);

/// Full structural validation: unique layer ids, per-layer shape chain,
/// weight tensors matching declared params, final output of length
/// class_count, finite weights. Throws std::invalid_argument on violation.
void validate_model(const Model& model);

} // namespace nscam

#endif
