#include "lfcfg/frequency.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lfcfg/error.hpp"

namespace lfcfg {
namespace {

struct Tap {
    std::size_t i0;
    std::size_t i1;
    double frac;  // weight of i1
};

// One resampling tap per output coordinate, for an axis of `in` coarse cells
// stretched over `out` fine cells.
std::vector<Tap> axis_taps(std::size_t out, std::size_t in, UpsampleKernel kernel) {
    std::vector<Tap> taps(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
        if (kernel == UpsampleKernel::nearest) {
            auto src = static_cast<std::size_t>(std::floor(static_cast<double>(d) * ratio));
            src = std::min(src, in - 1);
            taps[d] = {src, src, 0.0};
            continue;
        }
        double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const auto i0 = static_cast<std::size_t>(std::floor(src));
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        taps[d] = {i0, i1, src - static_cast<double>(i0)};
    }
    return taps;
}

}  // namespace

const char* to_string(UpsampleKernel kernel) { return kernel == UpsampleKernel::bilinear ? "bilinear" : "nearest"; }

UpsampleKernel parse_upsample_kernel(const std::string& name) {
    if (name == "bilinear") return UpsampleKernel::bilinear;
    if (name == "nearest") return UpsampleKernel::nearest;
    throw ConfigError("unknown upsample kernel '" + name + "' (expected bilinear or nearest)");
}

void validate_filter_scale(int s) {
    if (s != 1 && s != 2 && s != 4 && s != 8) {
        throw ConfigError("filter scale must be one of 1, 2, 4, 8; got " + std::to_string(s));
    }
}

Field lowpass(const Field& f, int s, UpsampleKernel kernel) {
    validate_filter_scale(s);
    if (s == 1) return f;

    const std::size_t H = f.height(), W = f.width(), C = f.channels();
    const auto step = static_cast<std::size_t>(s);
    const std::size_t hc = (H + step - 1) / step;
    const std::size_t wc = (W + step - 1) / step;

    std::vector<double> coarse(C * hc * wc);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < hc; ++i) {
            const std::size_t h_end = std::min(H, (i + 1) * step);
            for (std::size_t j = 0; j < wc; ++j) {
                const std::size_t w_end = std::min(W, (j + 1) * step);
                double acc = 0.0;
                for (std::size_t h = i * step; h < h_end; ++h)
                    for (std::size_t w = j * step; w < w_end; ++w) acc += f.at(c, h, w);
                const auto count = static_cast<double>((h_end - i * step) * (w_end - j * step));
                coarse[(c * hc + i) * wc + j] = acc / count;
            }
        }
    }

    const auto ty = axis_taps(H, hc, kernel);
    const auto tx = axis_taps(W, wc, kernel);
    std::vector<double> out(f.size());
    for (std::size_t c = 0; c < C; ++c) {
        const double* g = coarse.data() + c * hc * wc;
        for (std::size_t h = 0; h < H; ++h) {
            const Tap& y = ty[h];
            for (std::size_t w = 0; w < W; ++w) {
                const Tap& x = tx[w];
                const double top = g[y.i0 * wc + x.i0] * (1.0 - x.frac) + g[y.i0 * wc + x.i1] * x.frac;
                const double bot = g[y.i1 * wc + x.i0] * (1.0 - x.frac) + g[y.i1 * wc + x.i1] * x.frac;
                out[(c * H + h) * W + w] = top * (1.0 - y.frac) + bot * y.frac;
            }
        }
    }
    return Field(f.shape(), std::move(out));
}

FreqSplit split(const Field& f, int s, UpsampleKernel kernel) {
    Field low = lowpass(f, s, kernel);
    Field high = sub(f, low);
    return FreqSplit{std::move(low), std::move(high), s};
}

}  // namespace lfcfg
