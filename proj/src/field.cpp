#include "lfcfg/field.hpp"

#include <algorithm>
#include <cmath>

#include "lfcfg/error.hpp"

namespace lfcfg {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::shape_mismatch: return "shape_mismatch";
        case ErrorKind::format: return "format";
        case ErrorKind::config: return "config";
        case ErrorKind::manifest: return "manifest";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::model: return "model";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

std::string to_string(const Shape& shape) {
    return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" + std::to_string(shape.width);
}

Field::Field(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (shape_.channels == 0 || shape_.height == 0 || shape_.width == 0) {
        throw ShapeMismatchError("field shape must be at least 1x1x1, got " + to_string(shape_));
    }
    if (data_.size() != shape_.size()) {
        throw ShapeMismatchError("field data length " + std::to_string(data_.size()) + " does not match shape " +
                                 to_string(shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw DegenerateError("non-finite field value at flat index " + std::to_string(i));
        }
    }
}

Field Field::zeros(Shape shape) { return Field(shape, std::vector<double>(shape.size(), 0.0)); }

Field Field::constant(Shape shape, double value) { return Field(shape, std::vector<double>(shape.size(), value)); }

Field Field::generate(Shape shape, const std::function<double(std::size_t, std::size_t, std::size_t)>& fn) {
    std::vector<double> data;
    data.reserve(shape.size());
    for (std::size_t c = 0; c < shape.channels; ++c)
        for (std::size_t h = 0; h < shape.height; ++h)
            for (std::size_t w = 0; w < shape.width; ++w) data.push_back(fn(c, h, w));
    return Field(shape, std::move(data));
}

void require_same_shape(const Field& a, const Field& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeMismatchError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                 to_string(b.shape()));
    }
}

Field field_map2(const Field& a, const Field& b, BinaryOp op) {
    require_same_shape(a, b, "field_map2");
    std::vector<double> out(a.size());
    auto x = a.values();
    auto y = b.values();
    switch (op) {
        case BinaryOp::add: std::transform(x.begin(), x.end(), y.begin(), out.begin(), std::plus<>{}); break;
        case BinaryOp::sub: std::transform(x.begin(), x.end(), y.begin(), out.begin(), std::minus<>{}); break;
        case BinaryOp::mul: std::transform(x.begin(), x.end(), y.begin(), out.begin(), std::multiplies<>{}); break;
    }
    return Field(a.shape(), std::move(out));
}

Field scale(const Field& a, double factor) {
    std::vector<double> out(a.size());
    auto x = a.values();
    std::transform(x.begin(), x.end(), out.begin(), [factor](double v) { return v * factor; });
    return Field(a.shape(), std::move(out));
}

Field axpy(const Field& a, double s, const Field& b) {
    require_same_shape(a, b, "axpy");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + s * b[i];
    return Field(a.shape(), std::move(out));
}

double sum(const Field& f) {
    double s = 0.0;
    for (double v : f.values()) s += v;
    return s;
}

double mean(const Field& f) { return sum(f) / static_cast<double>(f.size()); }

double dot(const Field& a, const Field& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const Field& f) { return std::sqrt(dot(f, f)); }

double max_abs(const Field& f) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Field& a, const Field& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::uint8_t to_byte(double x) {
    const double clamped = std::clamp(x, -1.0, 1.0);
    const double scaled = (clamped + 1.0) / 2.0 * 255.0;
    return static_cast<std::uint8_t>(std::floor(scaled + 0.5));
}

ImageU8 to_image(const Field& f) {
    if (f.channels() != 3) {
        throw ShapeMismatchError("to_image requires 3 channels, got " + to_string(f.shape()));
    }
    ImageU8 img{f.height(), f.width(), std::vector<std::uint8_t>(f.height() * f.width() * 3)};
    for (std::size_t h = 0; h < f.height(); ++h)
        for (std::size_t w = 0; w < f.width(); ++w)
            for (std::size_t c = 0; c < 3; ++c) img.rgb[(h * f.width() + w) * 3 + c] = to_byte(f.at(c, h, w));
    return img;
}

}  // namespace lfcfg
