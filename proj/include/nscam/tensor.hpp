#ifndef NSCAM_TENSOR_HPP
#define NSCAM_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace nscam {

/// Dense row-major float32 tensor. The last dimension is contiguous;
/// a [C,H,W] tensor stores element (c,y,x) at c*H*W + y*W + x.
///
/// Values are expected to stay finite: loaders and operations reject or
/// guard anything that could introduce NaN/Inf on valid input.
class Tensor {
public:
    Tensor() = default;

    /// Zero-initialized tensor. Every dimension must be positive.
    explicit Tensor(std::vector<int> dims);

    /// Tensor with explicit contents; data.size() must equal the dim product.
    Tensor(std::vector<int> dims, std::vector<float> data);

    const std::vector<int>& dims() const { return dims_; }
    int dim(std::size_t i) const { return dims_.at(i); }
    std::size_t rank() const { return dims_.size(); }
    std::size_t numel() const { return data_.size(); }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    // Rank-checked accessors for the shapes the engine actually uses.
    float& at1(int i);
    float at1(int i) const;
    float& at3(int c, int y, int x);
    float at3(int c, int y, int x) const;
    float& at4(int o, int i, int y, int x);
    float at4(int o, int i, int y, int x) const;

    bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
    bool all_finite() const;

    /// "[2,3,4]" -- used in error messages.
    std::string shape_str() const;

private:
    std::vector<int> dims_;
    std::vector<float> data_;
};

/// Elementwise product. Accepts equal shapes, or a [C,h,w] lhs with an
/// [h,w] rhs which is broadcast across channels. Anything else is rejected.
Tensor hadamard(const Tensor& a, const Tensor& b);

/// (x - min) / (max - min). A constant input (max == min) maps to all zeros.
/// Output is always within [0,1]; the op is idempotent on its own output.
Tensor minmax_norm(const Tensor& x);

/// Align-corners bilinear resampling of a [h,w] grid to [out_h,out_w].
/// Corner pixels map exactly onto corner pixels; works in both the
/// enlarging and the shrinking direction.
Tensor upsample_bilinear(const Tensor& x, int out_h, int out_w);

/// max(x, 0) elementwise.
Tensor relu(const Tensor& x);

/// 1 - x elementwise (complement of a mask in [0,1]).
Tensor one_minus(const Tensor& x);

} // namespace nscam

#endif
