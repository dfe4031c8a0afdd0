#ifndef NSCAM_TESTS_REFERENCE_ENGINE_HPP
#define NSCAM_TESTS_REFERENCE_ENGINE_HPP

#include <set>
#include <string>

#include "nscam/model.hpp"
#include "nscam/tensor.hpp"

namespace nscam::testsupport {

/// Naive re-implementation of the forward pass used as an oracle: convolution
/// runs over an explicitly materialized zero-padded buffer (no boundary
/// branches), pooling scans windows into a scratch vector, and every
/// reduction accumulates in double. Shares no code with the engine.
Tensor reference_forward(const Model& model, const Tensor& input);

/// Output of the named layer, computed by the same naive pass.
Tensor reference_activations(const Model& model, const Tensor& input,
                             const std::string& layer_id);

/// Softmax probability of class_index, computed in double from
/// reference_forward's logits.
double reference_predict_prob(const Model& model, const Tensor& input, int class_index);

/// Deep copy of the model with the listed output filters of one conv2d layer
/// literally zeroed: their weight slices and bias entries set to 0.
Model zero_filters_copy(const Model& model, const std::string& layer_id,
                        const std::set<int>& channels);

} // namespace nscam::testsupport

#endif
