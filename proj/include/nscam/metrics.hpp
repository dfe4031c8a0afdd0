#ifndef NSCAM_METRICS_HPP
#define NSCAM_METRICS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nscam/explain.hpp"
#include "nscam/model.hpp"
#include "nscam/tensor.hpp"

namespace nscam {

/// Probability trace of a progressive pixel intervention. fractions is
/// strictly increasing from 0 to 1 (fraction of pixels changed so far) and
/// probs holds the class probability after each step, step 0 included.
struct Curve {
    std::vector<double> fractions;
    std::vector<double> probs;
};

struct DeletionInsertion {
    Curve deletion;
    Curve insertion;
};

/// Pixel bounding box, half-open: [x0,x1) x [y0,y1).
struct BBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
};

void validate_bbox(const BBox& b, int w, int h);

/// Replicate-border separable Gaussian blur, used as the insertion baseline.
Tensor gaussian_blur(const Tensor& image, int kernel, double sigma);

constexpr int kDefaultCurveSteps = 100;
constexpr int kDefaultBlurKernel = 11;
constexpr double kDefaultBlurSigma = 5.0;
constexpr double kDefaultAttackSigma = 0.1;
constexpr double kSanityRandomSigma = 0.05;

/// Pixel indices (row-major over [H,W]) ordered by descending map value;
/// equal values keep row-major order.
std::vector<std::size_t> pixel_ranking(const Tensor& map);

/// Deletion: zero pixels of the original image in ranking order.
/// Insertion: restore original pixels, in the same order, onto a
/// Gaussian-blurred copy. Probability is recorded before the first step and
/// after every step; steps is clamped to the pixel count so every step
/// changes at least one pixel.
DeletionInsertion deletion_insertion(const Model& model, const Tensor& image, int class_index,
                                     const Tensor& map, int steps = kDefaultCurveSteps,
                                     int blur_kernel = kDefaultBlurKernel,
                                     double blur_sigma = kDefaultBlurSigma);

/// Trapezoidal area under the curve over its recorded fractions.
double auc(const Curve& curve);

struct NsScores {
    std::optional<double> n_score;
    std::optional<double> s_score;
    double map_size = 0.0; // fraction of strictly nonzero map pixels
    std::vector<std::string> warnings;
};

/// Size-normalized drop/retention scores of a single map:
///   n = (p(I) - p(I*(1-map))) / (max(p(I),eps) * max(size,eps))
///   s = p(I*map) / (max(p(I),eps) * max(size,eps))
double n_score_from(double p_orig, double p_removed, double map_size);
double s_score_from(double p_orig, double p_kept, double map_size);

/// End-to-end scores for one model/image/map triple. An all-zero map yields
/// absent scores plus a warning instead of a division blow-up.
NsScores ns_quantification(const Model& model, const Tensor& image, int class_index,
                           const Tensor& map);

/// One noise attack confined to the map's footprint:
/// I' = clip(I + sigma*z (.) map, 0, 1). Returns whether the predicted
/// class flipped. Deterministic for a fixed seed.
bool attack_flips(const Model& model, const Tensor& image, const Tensor& map, double sigma,
                  std::uint64_t seed);

/// flip_rate / max(avg_map_size, eps).
double attack_score(double flip_rate, double avg_map_size);

/// Energy inside the box over total energy. Absent for an all-zero map.
std::optional<double> energy_pointing(const Tensor& map, const BBox& bbox);

/// Spearman rank correlation with average ranks on ties. Absent when either
/// side has no rank variance (constant input).
std::optional<double> spearman(const std::vector<float>& a, const std::vector<float>& b);

struct SanityStage {
    std::string layer_id; // "none" for the unrandomized baseline row
    std::optional<double> n_similarity;
    std::optional<double> s_similarity;
};

using ExplainFn = std::function<ExplanationResult(const ExplainRequest&)>;

/// Cascading weight randomization: starting from the output end, replace
/// each parameterized layer's weights with N(0, 0.05^2) draws (keeping all
/// previously randomized layers randomized), re-explain, and record the
/// Spearman similarity of both maps against the baseline explanation. The
/// first row is the baseline against itself (similarity 1 by definition).
std::vector<SanityStage> sanity_check(const ExplainRequest& request, std::uint64_t randomize_seed,
                                      const ExplainFn& explain_fn = {});

/// Mean of the present similarities at the final stage; a stage with no
/// defined similarity (both maps degenerate) counts as fully dissimilar.
double sanity_final_mean(const std::vector<SanityStage>& stages);

struct EvalRecord {
    std::string image;
    std::optional<double> deletion_auc;
    std::optional<double> insertion_auc;
    std::optional<double> overall; // insertion - deletion
    std::optional<double> n_score;
    std::optional<double> s_score;
    std::optional<double> map_size;
    std::optional<bool> attack_flip;
    std::optional<double> proportion;
    std::vector<std::string> warnings;
    std::optional<std::string> error; // set when this image failed entirely
};

struct EvalAggregates {
    int images = 0;
    int failed = 0;
    std::optional<double> deletion_auc;
    std::optional<double> insertion_auc;
    std::optional<double> overall;
    std::optional<double> n_score;
    std::optional<double> s_score;
    std::optional<double> flip_rate;
    std::optional<double> avg_map_size;
    std::optional<double> attack;
    std::optional<double> proportion;
};

EvalAggregates aggregate(const std::vector<EvalRecord>& records);

/// Serialize a run: config block, per-image records, aggregates.
std::string eval_report_json(const std::vector<EvalRecord>& records,
                             const std::vector<std::pair<std::string, std::string>>& config);
std::string eval_report_csv(const std::vector<EvalRecord>& records);

} // namespace nscam

#endif
