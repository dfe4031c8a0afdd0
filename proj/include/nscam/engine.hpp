#ifndef NSCAM_ENGINE_HPP
#define NSCAM_ENGINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "nscam/model.hpp"
#include "nscam/tensor.hpp"

namespace nscam {

/// 2-D cross-correlation of a [C,H,W] input with [O,C,kh,kw] weights and an
/// [O] bias, zero padding, square stride. Output is
/// [O, (H+2p-kh)/s+1, (W+2p-kw)/s+1].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad);

Tensor maxpool2d(const Tensor& input, int window, int stride);
Tensor global_avg_pool(const Tensor& input);
Tensor flatten(const Tensor& input);
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Numerically stable softmax (max subtraction). Output sums to 1.
Tensor softmax(const Tensor& input);
std::vector<double> softmax(const std::vector<double>& logits);

/// Evaluate one layer. Weighted kinds pull their parameters from the model.
Tensor layer_forward(const Model& model, const LayerSpec& layer, const Tensor& input);

/// Run the chain end to end. An overlay, if given, zeroes the listed output
/// channels of its conv2d layer in flight; the model itself is never
/// modified. Unknown overlay layer ids and non-conv overlay targets are
/// rejected.
Tensor forward(const Model& model, const Tensor& input,
               const std::optional<FilterOverlay>& overlay = std::nullopt);

/// Output tensor of the named layer for this input (no overlay applied).
Tensor activations_at(const Model& model, const Tensor& input, const std::string& layer_id);

/// Softmax probability of class_index over the model's final output.
/// Models are expected to end at logits; the softmax lives here.
double predict_prob(const Model& model, const Tensor& input, int class_index,
                    const std::optional<FilterOverlay>& overlay = std::nullopt);

/// Full probability vector (softmax over the final output).
std::vector<double> predict_all(const Model& model, const Tensor& input,
                                const std::optional<FilterOverlay>& overlay = std::nullopt);

} // namespace nscam

#endif
