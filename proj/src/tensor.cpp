#include "nscam/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nscam {

namespace {

std::size_t checked_numel(const std::vector<int>& dims) {
    if (dims.empty()) {
        throw std::invalid_argument("tensor: empty dimension list");
    }
    std::size_t n = 1;
    for (int d : dims) {
        if (d <= 0) {
            throw std::invalid_argument("tensor: non-positive dimension " + std::to_string(d));
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void require_rank(const Tensor& t, std::size_t r, const char* who) {
    if (t.rank() != r) {
        throw std::invalid_argument(std::string(who) + ": expected rank " + std::to_string(r) +
                                    " tensor, got shape " + t.shape_str());
    }
}

} // namespace

Tensor::Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    data_.assign(checked_numel(dims_), 0.0f);
}

Tensor::Tensor(std::vector<int> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
    if (checked_numel(dims_) != data_.size()) {
        throw std::invalid_argument("tensor: data size " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str());
    }
}

float& Tensor::at1(int i) {
    require_rank(*this, 1, "at1");
    return data_[static_cast<std::size_t>(i)];
}

float Tensor::at1(int i) const { return const_cast<Tensor*>(this)->at1(i); }

float& Tensor::at3(int c, int y, int x) {
    require_rank(*this, 3, "at3");
    const std::size_t h = static_cast<std::size_t>(dims_[1]);
    const std::size_t w = static_cast<std::size_t>(dims_[2]);
    return data_[(static_cast<std::size_t>(c) * h + static_cast<std::size_t>(y)) * w +
                 static_cast<std::size_t>(x)];
}

float Tensor::at3(int c, int y, int x) const { return const_cast<Tensor*>(this)->at3(c, y, x); }

float& Tensor::at4(int o, int i, int y, int x) {
    require_rank(*this, 4, "at4");
    const std::size_t ci = static_cast<std::size_t>(dims_[1]);
    const std::size_t h = static_cast<std::size_t>(dims_[2]);
    const std::size_t w = static_cast<std::size_t>(dims_[3]);
    return data_[((static_cast<std::size_t>(o) * ci + static_cast<std::size_t>(i)) * h +
                  static_cast<std::size_t>(y)) *
                     w +
                 static_cast<std::size_t>(x)];
}

float Tensor::at4(int o, int i, int y, int x) const {
    return const_cast<Tensor*>(this)->at4(o, i, y, x);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << ',';
        os << dims_[i];
    }
    os << ']';
    return os.str();
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (a.same_shape(b)) {
        Tensor out = a;
        for (std::size_t i = 0; i < out.numel(); ++i) {
            out[i] = a[i] * b[i];
        }
        return out;
    }
    // [C,h,w] * [h,w] broadcast.
    if (a.rank() == 3 && b.rank() == 2 && a.dim(1) == b.dim(0) && a.dim(2) == b.dim(1)) {
        Tensor out = a;
        const std::size_t plane = static_cast<std::size_t>(a.dim(1)) * a.dim(2);
        for (int c = 0; c < a.dim(0); ++c) {
            float* dst = out.data().data() + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] *= b[i];
            }
        }
        return out;
    }
    throw std::invalid_argument("hadamard: incompatible shapes " + a.shape_str() + " and " +
                                b.shape_str());
}

Tensor minmax_norm(const Tensor& x) {
    if (x.numel() == 0) {
        throw std::invalid_argument("minmax_norm: empty tensor");
    }
    const auto [mn_it, mx_it] = std::minmax_element(x.data().begin(), x.data().end());
    const float mn = *mn_it;
    const float mx = *mx_it;
    Tensor out(x.dims());
    if (mx == mn) {
        return out; // constant map carries no ordering information
    }
    const float inv = 1.0f / (mx - mn);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        out[i] = (x[i] - mn) * inv;
    }
    return out;
}

Tensor upsample_bilinear(const Tensor& x, int out_h, int out_w) {
    require_rank(x, 2, "upsample_bilinear");
    if (out_h <= 0 || out_w <= 0) {
        throw std::invalid_argument("upsample_bilinear: non-positive target size");
    }
    const int in_h = x.dim(0);
    const int in_w = x.dim(1);
    Tensor out({out_h, out_w});

    // Align-corners mapping: target index t lands on source coordinate
    // t * (in-1) / (out-1); a size-1 axis collapses onto coordinate 0.
    const double sy = out_h > 1 ? static_cast<double>(in_h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(in_w - 1) / (out_w - 1) : 0.0;

    for (int ty = 0; ty < out_h; ++ty) {
        const double fy = ty * sy;
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, in_h - 1);
        const double wy = fy - y0;
        for (int tx = 0; tx < out_w; ++tx) {
            const double fx = tx * sx;
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, in_w - 1);
            const double wx = fx - x0;
            const double top = x.data()[static_cast<std::size_t>(y0) * in_w + x0] * (1.0 - wx) +
                               x.data()[static_cast<std::size_t>(y0) * in_w + x1] * wx;
            const double bot = x.data()[static_cast<std::size_t>(y1) * in_w + x0] * (1.0 - wx) +
                               x.data()[static_cast<std::size_t>(y1) * in_w + x1] * wx;
            out.data()[static_cast<std::size_t>(ty) * out_w + tx] =
                static_cast<float>(top * (1.0 - wy) + bot * wy);
        }
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data()) {
        v = v > 0.0f ? v : 0.0f;
    }
    return out;
}

Tensor one_minus(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data()) {
        v = 1.0f - v;
    }
    return out;
}

} // namespace nscam
