#include "xopgan/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xopgan/numerics/errors.hpp"

namespace xopgan {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

static void check_dims(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
    for (auto d : shape)
        if (d == 0) throw DimensionError("tensor dimension must be positive: " + shape_string(shape));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_dims(shape_);
    if (!std::isfinite(fill)) throw ValueError("non-finite tensor fill value");
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims(shape_);
    if (shape_size(shape_) != data_.size())
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
    if (!all_finite()) throw ValueError("non-finite value in tensor data");
}

Tensor Tensor::reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(what) + ": shape " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    require_same_shape(*this, other, "tensor -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) noexcept {
    for (auto& v : data_) v *= s;
    return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_channels: no inputs");
    const auto h = parts[0].dim(1), w = parts[0].dim(2);
    std::size_t channels = 0;
    for (const auto& p : parts) {
        if (p.rank() != 3 || p.dim(1) != h || p.dim(2) != w)
            throw DimensionError("concat_channels: spatial mismatch " + shape_string(p.shape()));
        channels += p.dim(0);
    }
    Tensor out({channels, h, w});
    double* dst = out.data();
    for (const auto& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
    return out;
}

std::vector<Tensor> split_channels(const Tensor& t, std::span<const std::size_t> widths) {
    const auto plane = t.dim(1) * t.dim(2);
    std::size_t total = 0;
    for (auto w : widths) total += w;
    if (total != t.dim(0)) throw DimensionError("split_channels: widths do not cover channels");
    std::vector<Tensor> out;
    const double* src = t.data();
    for (auto c : widths) {
        Tensor part({c, t.dim(1), t.dim(2)});
        std::copy(src, src + c * plane, part.data());
        src += c * plane;
        out.push_back(std::move(part));
    }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double sum(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v;
    return s;
}

}  // namespace xopgan
