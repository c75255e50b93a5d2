#include "xopgan/numerics/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "xopgan/numerics/errors.hpp"

namespace xopgan {

namespace {

std::atomic<std::size_t> g_threads{1};

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(g_threads.load(std::memory_order_relaxed), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        pool.emplace_back([&fn, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (std::size_t i = 0; i < std::min(n, chunk); ++i) fn(i);
    for (auto& t : pool) t.join();
}

// Splits [0, n) into one contiguous block per worker and runs fn(lo, hi).
template <typename Fn>
void for_blocks(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(g_threads.load(std::memory_order_relaxed), n);
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    parallel_for(workers, [&](std::size_t w) {
        const std::size_t lo = std::min(n, w * chunk), hi = std::min(n, lo + chunk);
        if (lo < hi) fn(lo, hi);
    });
}

struct ConvDims {
    std::size_t cin, h, w, cout, kh, kw, oh, ow;
};

ConvDims conv_dims(const Tensor& input, const Tensor& weights, const ConvGeometry& geom) {
    if (input.rank() != 3) throw DimensionError("conv2d: input must be [C,H,W], got " + shape_string(input.shape()));
    if (weights.rank() != 4)
        throw DimensionError("conv2d: weights must be [C_out,C_in,kH,kW], got " + shape_string(weights.shape()));
    if (weights.dim(1) != input.dim(0))
        throw DimensionError("conv2d: input has " + std::to_string(input.dim(0)) + " channels, weights expect " +
                             std::to_string(weights.dim(1)));
    if (geom.stride == 0) throw ConfigError("conv2d: stride must be positive");
    ConvDims d{input.dim(0), input.dim(1), input.dim(2), weights.dim(0), weights.dim(2), weights.dim(3), 0, 0};
    d.oh = geom.output_extent(d.h, d.kh);
    d.ow = geom.output_extent(d.w, d.kw);
    return d;
}

void check_bias(const Tensor& bias, std::size_t cout) {
    if (!bias.empty() && (bias.rank() != 1 || bias.dim(0) != cout))
        throw DimensionError("conv2d: bias must be [" + std::to_string(cout) + "], got " + shape_string(bias.shape()));
}

// Valid kernel taps [lo, hi) along one axis for output coordinate o.
struct TapRange {
    std::size_t lo, hi;
    std::ptrdiff_t origin;  // input coordinate of tap 0
};

TapRange taps(std::size_t o, std::size_t stride, std::size_t pad, std::size_t k, std::size_t in) {
    const auto origin = static_cast<std::ptrdiff_t>(o * stride) - static_cast<std::ptrdiff_t>(pad);
    const auto lo = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(-origin, 0, static_cast<std::ptrdiff_t>(k)));
    const auto hi = static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(in) - origin, static_cast<std::ptrdiff_t>(lo),
                                   static_cast<std::ptrdiff_t>(k)));
    return {lo, hi, origin};
}

// Lowers output positions [p0, p1) into dst, one row of (ic, ky, kx) per
// position matching the memory order of one output channel's weights.
// Padding taps are zero.
void im2col(const Tensor& input, const ConvDims& d, const ConvGeometry& g, std::size_t p0, std::size_t p1,
            double* dst) {
    const std::size_t r = d.cin * d.kh * d.kw;
    const double* src = input.data();
    for (std::size_t p = p0; p < p1; ++p) {
        const auto ty = taps(p / d.ow, g.stride, g.pad_lo, d.kh, d.h);
        const auto tx = taps(p % d.ow, g.stride, g.pad_lo, d.kw, d.w);
        double* row = dst + (p - p0) * r;
        if (ty.hi - ty.lo < d.kh || tx.hi - tx.lo < d.kw) std::fill_n(row, r, 0.0);
        for (std::size_t c = 0; c < d.cin; ++c) {
            for (std::size_t ky = ty.lo; ky < ty.hi; ++ky) {
                const double* in = src + (c * d.h + static_cast<std::size_t>(ty.origin + static_cast<std::ptrdiff_t>(ky))) * d.w;
                double* out = row + (c * d.kh + ky) * d.kw;
                for (std::size_t kx = tx.lo; kx < tx.hi; ++kx) out[kx] = in[tx.origin + static_cast<std::ptrdiff_t>(kx)];
            }
        }
    }
}

// Adjoint of im2col for the same position range.
void col2im_add(const double* cols, const ConvDims& d, const ConvGeometry& g, std::size_t p0, std::size_t p1,
                Tensor& out) {
    const std::size_t r = d.cin * d.kh * d.kw;
    double* dst = out.data();
    for (std::size_t p = p0; p < p1; ++p) {
        const auto ty = taps(p / d.ow, g.stride, g.pad_lo, d.kh, d.h);
        const auto tx = taps(p % d.ow, g.stride, g.pad_lo, d.kw, d.w);
        const double* row = cols + (p - p0) * r;
        for (std::size_t c = 0; c < d.cin; ++c) {
            for (std::size_t ky = ty.lo; ky < ty.hi; ++ky) {
                double* o = dst + (c * d.h + static_cast<std::size_t>(ty.origin + static_cast<std::ptrdiff_t>(ky))) * d.w;
                const double* s = row + (c * d.kh + ky) * d.kw;
                for (std::size_t kx = tx.lo; kx < tx.hi; ++kx) o[tx.origin + static_cast<std::ptrdiff_t>(kx)] += s[kx];
            }
        }
    }
}

// Positions lowered at a time, sized so the column buffers stay cache
// resident. Chunking never changes a result: every output element and every
// gradient accumulation runs over positions in ascending order.
std::size_t chunk_positions(std::size_t r) { return std::max<std::size_t>(16, 32768 / std::max<std::size_t>(r, 1)); }

}  // namespace

void set_num_threads(std::size_t n) { g_threads.store(std::max<std::size_t>(1, n)); }
std::size_t num_threads() { return g_threads.load(); }

ConvGeometry ConvGeometry::same(std::size_t in, std::size_t kernel, std::size_t stride) {
    if (stride == 0) throw ConfigError("stride must be positive");
    const std::size_t out = (in + stride - 1) / stride;
    const std::size_t need = (out - 1) * stride + kernel;
    const std::size_t total = need > in ? need - in : 0;
    return {stride, total / 2, total - total / 2};
}

std::size_t ConvGeometry::output_extent(std::size_t in, std::size_t kernel) const {
    const std::size_t padded = in + pad_lo + pad_hi;
    if (padded < kernel)
        throw DimensionError("conv2d: padded extent " + std::to_string(padded) + " smaller than kernel " +
                             std::to_string(kernel));
    return (padded - kernel) / stride + 1;
}

Tensor conv2d_reference(const Tensor& input, const Tensor& weights, const Tensor& bias, const ConvGeometry& geom) {
    const auto d = conv_dims(input, weights, geom);
    check_bias(bias, d.cout);
    Tensor out({d.cout, d.oh, d.ow});
    for (std::size_t oc = 0; oc < d.cout; ++oc) {
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
            for (std::size_t ox = 0; ox < d.ow; ++ox) {
                double s = 0.0;
                for (std::size_t c = 0; c < d.cin; ++c) {
                    for (std::size_t ky = 0; ky < d.kh; ++ky) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * geom.stride + ky) - static_cast<std::ptrdiff_t>(geom.pad_lo);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                        for (std::size_t kx = 0; kx < d.kw; ++kx) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * geom.stride + kx) -
                                            static_cast<std::ptrdiff_t>(geom.pad_lo);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                            s += weights[((oc * d.cin + c) * d.kh + ky) * d.kw + kx] *
                                 input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                        }
                    }
                }
                out.at(oc, oy, ox) = bias.empty() ? s : s + bias[oc];
            }
        }
    }
    return out;
}

Tensor conv2d_lowered(const Tensor& input, const Tensor& weights, const Tensor& bias, const ConvGeometry& geom,
                      const simd::KernelTable& k) {
    return polyconv2d(input, std::span<const Tensor>(&weights, 1), bias, geom, k);
}

Tensor polyconv2d(const Tensor& input, std::span<const Tensor> banks, const Tensor& bias, const ConvGeometry& geom,
                  const simd::KernelTable& k) {
    if (banks.empty()) throw ConfigError("polyconv2d: at least one weight bank is required");
    const auto d = conv_dims(input, banks[0], geom);
    for (const auto& w : banks)
        if (w.shape() != banks[0].shape()) throw DimensionError("polyconv2d: weight banks differ in shape");
    check_bias(bias, d.cout);
    const std::size_t r = d.cin * d.kh * d.kw;
    const std::size_t positions = d.oh * d.ow;
    const std::size_t chunk = std::min(positions, chunk_positions(r));

    Tensor out({d.cout, d.oh, d.ow});
    std::vector<Tensor> terms;
    for (std::size_t q = 1; q < banks.size(); ++q) terms.emplace_back(Shape{d.cout, d.oh, d.ow});
    std::vector<double> cols(chunk * r), power(banks.size() > 1 ? chunk * r : 0);
    for (std::size_t p0 = 0; p0 < positions; p0 += chunk) {
        const std::size_t n = std::min(chunk, positions - p0);
        im2col(input, d, geom, p0, p0 + n, cols.data());
        for (std::size_t q = 0; q < banks.size(); ++q) {
            // Powers of the lowered columns equal the lowering of the powers.
            if (q == 1) std::copy_n(cols.data(), n * r, power.data());
            if (q >= 1)
                for (std::size_t i = 0; i < n * r; ++i) power[i] *= cols[i];
            const double* lowered = q == 0 ? cols.data() : power.data();
            double* dst = (q == 0 ? out : terms[q - 1]).data();
            for_blocks(d.cout, [&](std::size_t lo, std::size_t hi) {
                k.gemm_nt(hi - lo, n, r, banks[q].data() + lo * r, r, lowered, r, dst + lo * positions + p0,
                          positions);
            });
        }
    }
    if (!bias.empty())
        for (std::size_t oc = 0; oc < d.cout; ++oc)
            for (std::size_t i = 0; i < positions; ++i) out[oc * positions + i] += bias[oc];
    for (const auto& t : terms) out += t;
    return out;
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, const ConvGeometry& geom) {
    return conv2d_lowered(input, weights, bias, geom, simd::active());
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    return conv2d(input, weights, bias, ConvGeometry::symmetric(stride, padding));
}

static void check_upstream(const Tensor& upstream, const ConvDims& d) {
    if (upstream.shape() != Shape{d.cout, d.oh, d.ow})
        throw DimensionError("conv2d_grad: upstream " + shape_string(upstream.shape()) + " does not match output " +
                             shape_string({d.cout, d.oh, d.ow}));
}

Conv2dGrads conv2d_grad_reference(const Tensor& input, const Tensor& weights, const Tensor& upstream,
                                  const ConvGeometry& geom) {
    const auto d = conv_dims(input, weights, geom);
    check_upstream(upstream, d);
    Conv2dGrads g{Tensor::zeros_like(input), Tensor::zeros_like(weights), Tensor::zeros({d.cout})};
    for (std::size_t oc = 0; oc < d.cout; ++oc) {
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
            for (std::size_t ox = 0; ox < d.ow; ++ox) {
                const double up = upstream.at(oc, oy, ox);
                g.bias[oc] += up;
                for (std::size_t c = 0; c < d.cin; ++c) {
                    for (std::size_t ky = 0; ky < d.kh; ++ky) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * geom.stride + ky) - static_cast<std::ptrdiff_t>(geom.pad_lo);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                        for (std::size_t kx = 0; kx < d.kw; ++kx) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * geom.stride + kx) -
                                            static_cast<std::ptrdiff_t>(geom.pad_lo);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                            const std::size_t wi = ((oc * d.cin + c) * d.kh + ky) * d.kw + kx;
                            const auto uy = static_cast<std::size_t>(iy), ux = static_cast<std::size_t>(ix);
                            g.weights[wi] += up * input.at(c, uy, ux);
                            g.input.at(c, uy, ux) += up * weights[wi];
                        }
                    }
                }
            }
        }
    }
    return g;
}

Conv2dGrads conv2d_grad_lowered(const Tensor& input, const Tensor& weights, const Tensor& upstream,
                                const ConvGeometry& geom, const simd::KernelTable& k) {
    auto g = polyconv2d_grad(input, std::span<const Tensor>(&weights, 1), upstream, geom, k);
    return {std::move(g.input), std::move(g.weights[0]), std::move(g.bias)};
}

PolyConvGrads polyconv2d_grad(const Tensor& input, std::span<const Tensor> banks, const Tensor& upstream,
                              const ConvGeometry& geom, const simd::KernelTable& k) {
    if (banks.empty()) throw ConfigError("polyconv2d_grad: at least one weight bank is required");
    const auto d = conv_dims(input, banks[0], geom);
    for (const auto& w : banks)
        if (w.shape() != banks[0].shape()) throw DimensionError("polyconv2d_grad: weight banks differ in shape");
    check_upstream(upstream, d);
    const std::size_t r = d.cin * d.kh * d.kw;
    const std::size_t positions = d.oh * d.ow;
    const std::size_t chunk = std::min(positions, chunk_positions(r));

    PolyConvGrads g{Tensor::zeros_like(input), {}, Tensor::zeros({d.cout})};
    for (std::size_t oc = 0; oc < d.cout; ++oc) {
        double b = 0.0;
        for (std::size_t p = 0; p < positions; ++p) b += upstream[oc * positions + p];
        g.bias[oc] = b;
    }
    for (const auto& w : banks) g.weights.push_back(Tensor::zeros_like(w));

    // Lowered input^(q+1) for the current order q, ping-ponged between two
    // buffers so input^q stays available for the chain rule.
    const bool poly = banks.size() > 1;
    std::vector<double> cols(chunk * r), gcols(chunk * r), term(poly ? chunk * r : 0);
    std::vector<double> pw[2] = {std::vector<double>(poly ? chunk * r : 0), std::vector<double>(banks.size() > 2 ? chunk * r : 0)};
    for (std::size_t p0 = 0; p0 < positions; p0 += chunk) {
        const std::size_t n = std::min(chunk, positions - p0);
        const std::size_t len = n * r;
        im2col(input, d, geom, p0, p0 + n, cols.data());
        const double* prev = nullptr;
        const double* lowered = cols.data();
        for (std::size_t q = 0; q < banks.size(); ++q) {
            if (q >= 1) {
                prev = lowered;
                double* next = pw[(q - 1) % 2].data();
                for (std::size_t i = 0; i < len; ++i) next[i] = prev[i] * cols[i];
                lowered = next;
            }
            for_blocks(d.cout, [&](std::size_t lo, std::size_t hi) {
                k.gemm_nn(hi - lo, r, n, upstream.data() + lo * positions + p0, positions, 1, lowered, r,
                          g.weights[q].data() + lo * r, r, true);
            });

            double* dst = q == 0 ? gcols.data() : term.data();
            for_blocks(n, [&](std::size_t lo, std::size_t hi) {
                k.gemm_nn(hi - lo, r, d.cout, upstream.data() + p0 + lo, 1, positions, banks[q].data(), r,
                          dst + lo * r, r, false);
            });
            if (q > 0) {
                const double order = static_cast<double>(q + 1);
                for (std::size_t i = 0; i < len; ++i) gcols[i] += order * prev[i] * term[i];
            }
        }
        col2im_add(gcols.data(), d, geom, p0, p0 + n, g.input);
    }
    return g;
}

Conv2dGrads conv2d_grad(const Tensor& input, const Tensor& weights, const Tensor& upstream,
                        const ConvGeometry& geom) {
    return conv2d_grad_lowered(input, weights, upstream, geom, simd::active());
}

Conv2dGrads conv2d_grad(const Tensor& input, const Tensor& weights, const Tensor& upstream, std::size_t stride,
                        std::size_t padding) {
    return conv2d_grad(input, weights, upstream, ConvGeometry::symmetric(stride, padding));
}

static double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

Tensor elementwise(const Tensor& input, Activation fn) {
    Tensor out = Tensor::zeros_like(input);
    switch (fn.kind) {
        case ActivationKind::Tanh:
            for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::tanh(input[i]);
            break;
        case ActivationKind::Sigmoid:
            for (std::size_t i = 0; i < input.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-input[i]));
            break;
        case ActivationKind::Power:
            if (fn.exponent < 1) throw ConfigError("power exponent must be >= 1");
            for (std::size_t i = 0; i < input.size(); ++i) out[i] = ipow(input[i], fn.exponent);
            break;
    }
    return out;
}

Tensor elementwise_grad(const Tensor& input, Activation fn, const Tensor& upstream) {
    require_same_shape(input, upstream, "elementwise_grad");
    Tensor g = Tensor::zeros_like(input);
    switch (fn.kind) {
        case ActivationKind::Tanh:
            for (std::size_t i = 0; i < input.size(); ++i) {
                const double t = std::tanh(input[i]);
                g[i] = (1.0 - t * t) * upstream[i];
            }
            break;
        case ActivationKind::Sigmoid:
            for (std::size_t i = 0; i < input.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-input[i]));
                g[i] = s * (1.0 - s) * upstream[i];
            }
            break;
        case ActivationKind::Power:
            if (fn.exponent < 1) throw ConfigError("power exponent must be >= 1");
            for (std::size_t i = 0; i < input.size(); ++i)
                g[i] = fn.exponent * ipow(input[i], fn.exponent - 1) * upstream[i];
            break;
    }
    return g;
}

Tensor tanh_grad_from_output(const Tensor& output, const Tensor& upstream) {
    require_same_shape(output, upstream, "tanh_grad_from_output");
    Tensor g = Tensor::zeros_like(output);
    for (std::size_t i = 0; i < output.size(); ++i) g[i] = (1.0 - output[i] * output[i]) * upstream[i];
    return g;
}

Tensor upsample_nearest(const Tensor& input, std::size_t factor) {
    if (factor == 0) throw ConfigError("upsample factor must be >= 1");
    if (input.rank() != 3) throw DimensionError("upsample_nearest: input must be [C,H,W]");
    const auto c = input.dim(0), h = input.dim(1), w = input.dim(2);
    Tensor out({c, h * factor, w * factor});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h * factor; ++y)
            for (std::size_t x = 0; x < w * factor; ++x) out.at(ch, y, x) = input.at(ch, y / factor, x / factor);
    return out;
}

Tensor upsample_nearest_grad(const Tensor& upstream, std::size_t factor) {
    if (factor == 0) throw ConfigError("upsample factor must be >= 1");
    if (upstream.rank() != 3 || upstream.dim(1) % factor || upstream.dim(2) % factor)
        throw DimensionError("upsample_nearest_grad: upstream not a multiple of factor");
    const auto c = upstream.dim(0), h = upstream.dim(1) / factor, w = upstream.dim(2) / factor;
    Tensor g({c, h, w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h * factor; ++y)
            for (std::size_t x = 0; x < w * factor; ++x) g.at(ch, y / factor, x / factor) += upstream.at(ch, y, x);
    return g;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (weights.rank() != 2 || weights.dim(1) != input.size())
        throw DimensionError("dense: weights " + shape_string(weights.shape()) + " vs input of " +
                             std::to_string(input.size()));
    if (bias.rank() != 1 || bias.dim(0) != weights.dim(0)) throw DimensionError("dense: bias shape mismatch");
    const auto m = weights.dim(0), n = weights.dim(1);
    const auto& k = simd::active();
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) out[i] = k.dot(weights.data() + i * n, input.data(), n) + bias[i];
    return out;
}

DenseGrads dense_grad(const Tensor& input, const Tensor& weights, const Tensor& upstream) {
    if (weights.rank() != 2 || weights.dim(1) != input.size() || upstream.size() != weights.dim(0))
        throw DimensionError("dense_grad: shape mismatch");
    const auto m = weights.dim(0), n = weights.dim(1);
    const auto& k = simd::active();
    DenseGrads g{Tensor::zeros_like(input), Tensor::zeros_like(weights), Tensor::zeros({m})};
    for (std::size_t i = 0; i < m; ++i) {
        const double up = upstream[i];
        g.bias[i] = up;
        k.axpy(up, input.data(), g.weights.data() + i * n, n);
        k.axpy(up, weights.data() + i * n, g.input.data(), n);
    }
    return g;
}

}  // namespace xopgan
