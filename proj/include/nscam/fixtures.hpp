#ifndef NSCAM_FIXTURES_HPP
#define NSCAM_FIXTURES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nscam/metrics.hpp"
#include "nscam/model.hpp"
#include "nscam/tensor.hpp"

namespace nscam::fixtures {

/// Synthetic models with hand-set weights, used by the test suite and the
/// fixture generator tool. All of them end at logits.

struct Fixture {
    std::string name;
    Model model;
    Tensor image;
    std::string explain_layer;
    int class_index = 0;
};

/// 2-class chain CNN over [1,32,32] inputs. Channel 0 of "conv1" is a
/// brightness detector with threshold 0.75; the class-1 logit reads that
/// channel only at the pooled positions of the 8x8 patch [4,12)x[4,12), so
/// class 1 depends on nothing but those patch pixels. Channel 3 has zero
/// weights and a positive bias: a constant activation map. The class-0
/// logit is a plain bias.
Model planted_model();

/// Bright patch (values ~0.83..1.0, unique peak at (6,6)) on a dim smooth
/// background (< 0.25). Variants perturb patch and background levels while
/// keeping the prediction at class 1.
Tensor planted_image(int variant = 0);

BBox planted_bbox();

/// [1,4,4] input, conv + dense, 3 classes. Small enough to check by hand.
Model tiny_model();
Tensor tiny_image();

/// [2,6,6] input with a global_avg_pool stage, 2 classes.
Model gap_model();
Tensor gap_image();

/// Class 0 carries probability ~1.4e-11: drives the vanishing-probability
/// warning paths.
Model skewed_model();
Tensor skewed_image();

/// Seeded random weights over a few different chain topologies
/// (variant 0..2); exercises stride, padding and pooling combinations.
Model random_chain_model(int variant, std::uint64_t seed);

/// Seeded uniform [0,1] image matching the model's input dims.
Tensor random_image(const Model& model, std::uint64_t seed);

/// The standard fixture set: planted, tiny, gap and three random chains.
/// Every entry has p(class) comfortably above the epsilon floor.
std::vector<Fixture> all_fixtures();

} // namespace nscam::fixtures

#endif
