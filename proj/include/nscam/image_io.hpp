#ifndef NSCAM_IMAGE_IO_HPP
#define NSCAM_IMAGE_IO_HPP

#include <string>
#include <vector>

#include "nscam/model.hpp"
#include "nscam/tensor.hpp"

namespace nscam {

/// Decode a PNG (8/16-bit gray, palette, RGB, RGBA) or PPM/PGM (P2/P3/P5/P6,
/// 8-bit) file to a [C,H,W] float tensor in [0,1], C of 1 or 3.
Tensor read_image(const std::string& path);

/// Decode, bilinear-resize to the model's input resolution and scale to
/// [0,1]. A grayscale image is replicated across the model's channels; any
/// other channel mismatch is rejected.
Tensor preprocess_image(const std::string& path, const Model& model);

/// Load an externally produced saliency map: an 8-bit grayscale PNG (scaled
/// to [0,1]) or a JSON file holding a 2-D array (either bare or under a
/// "grid" key). The grid is bilinear-resized to [h,w] when sizes differ.
Tensor load_saliency_map(const std::string& path, int h, int w);

/// 8-bit grayscale PNG; pixel = round(255 * value), values clamped to [0,1].
void write_png_gray8(const std::string& path, const Tensor& map);

/// 8-bit RGB PNG from interleaved rows (3*w bytes per row).
void write_png_rgb8(const std::string& path, int w, int h, const std::vector<unsigned char>& rgb);

} // namespace nscam

#endif
