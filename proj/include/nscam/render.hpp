#ifndef NSCAM_RENDER_HPP
#define NSCAM_RENDER_HPP

#include <string>
#include <vector>

#include "nscam/explain.hpp"

namespace nscam {

/// Write the standard explanation artifacts into out_dir:
///   n_map.png / s_map.png      8-bit grayscale maps, pixel = round(255*v)
///   overlay_n.png / overlay_s.png  heat over the input image
///   bivariate.png              red channel = necessity, blue = sufficiency
///   result.json                p_orig, class/layer/cause/seed, per-cause
///                              responsibilities and the full float grids
/// Output bytes are a pure function of the request and result. Returns the
/// written paths.
std::vector<std::string> render(const ExplainRequest& request, const ExplanationResult& result,
                                const std::string& out_dir);

} // namespace nscam

#endif
