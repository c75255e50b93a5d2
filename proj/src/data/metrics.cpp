#include "xopgan/data/metrics.hpp"

#include "xopgan/numerics/errors.hpp"

namespace xopgan {

double psnr(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "psnr");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sse += d * d;
    }
    if (sse == 0.0) return kPsnrInfinity;
    const double mse = sse / static_cast<double>(a.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double mean_psnr(std::span<const double> values) {
    if (values.empty()) throw ValueError("mean_psnr of an empty set");
    double s = 0.0;
    for (double v : values) s += psnr_capped(v);
    return s / static_cast<double>(values.size());
}

}  // namespace xopgan
