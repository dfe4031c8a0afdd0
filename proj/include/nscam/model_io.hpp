#ifndef NSCAM_MODEL_IO_HPP
#define NSCAM_MODEL_IO_HPP

#include <string>

#include "nscam/model.hpp"

namespace nscam {

/// On-disk model format, version "ns-model/1":
///   model.json   manifest: version, input_dims, class_count, weights_file,
///                ordered layer array (id, kind, params, weight byte offsets
///                and element counts into the blob)
///   weights.bin  all weight tensors as little-endian IEEE-754 float32,
///                concatenated in manifest order
///
/// load validates the version field, every layer kind, blob length against
/// the manifest (truncation errors name expected vs actual byte counts) and
/// runs full structural validation before returning.
Model load_model(const std::string& manifest_path);

/// Writes manifest_path plus the weight blob next to it. Output is
/// deterministic: identical models produce identical bytes.
void save_model(const Model& model, const std::string& manifest_path,
                const std::string& weights_file = "weights.bin");

} // namespace nscam

#endif
