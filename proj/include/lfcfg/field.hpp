#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lfcfg {

struct Shape {
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;

    std::size_t plane() const noexcept { return height * width; }
    std::size_t size() const noexcept { return channels * height * width; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// Dense C x H x W field of doubles in row-major (c, h, w) order.
///
/// A Field is a value: it is never mutated after construction, so copies can be
/// shared freely between threads. Every constructor checks that the shape is
/// non-degenerate and that all values are finite.
class Field {
public:
    Field(Shape shape, std::vector<double> data);

    static Field zeros(Shape shape);
    static Field constant(Shape shape, double value);
    static Field generate(Shape shape, const std::function<double(std::size_t, std::size_t, std::size_t)>& fn);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t channels() const noexcept { return shape_.channels; }
    std::size_t height() const noexcept { return shape_.height; }
    std::size_t width() const noexcept { return shape_.width; }
    std::size_t size() const noexcept { return data_.size(); }

    double at(std::size_t c, std::size_t h, std::size_t w) const {
        return data_[(c * shape_.height + h) * shape_.width + w];
    }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<const double> values() const noexcept { return data_; }
    std::span<const double> channel(std::size_t c) const {
        return std::span<const double>(data_).subspan(c * shape_.plane(), shape_.plane());
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

enum class BinaryOp { add, sub, mul };

/// Throws ShapeMismatchError unless `a` and `b` share a shape. `what` names the
/// calling operation in the message.
void require_same_shape(const Field& a, const Field& b, const char* what);

Field field_map2(const Field& a, const Field& b, BinaryOp op);
Field scale(const Field& a, double factor);

inline Field add(const Field& a, const Field& b) { return field_map2(a, b, BinaryOp::add); }
inline Field sub(const Field& a, const Field& b) { return field_map2(a, b, BinaryOp::sub); }
inline Field mul(const Field& a, const Field& b) { return field_map2(a, b, BinaryOp::mul); }

inline Field operator+(const Field& a, const Field& b) { return add(a, b); }
inline Field operator-(const Field& a, const Field& b) { return sub(a, b); }
inline Field operator*(double s, const Field& a) { return scale(a, s); }

// a + s * b
Field axpy(const Field& a, double s, const Field& b);

double sum(const Field& f);
double mean(const Field& f);
double dot(const Field& a, const Field& b);
double l2_norm(const Field& f);
double max_abs(const Field& f);
double max_abs_diff(const Field& a, const Field& b);

/// 8-bit RGB image, interleaved row-major.
struct ImageU8 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> rgb;

    std::uint8_t at(std::size_t h, std::size_t w, std::size_t c) const { return rgb[(h * width + w) * 3 + c]; }
};

/// Maps field units [-1, 1] to a byte with clamping and half-up rounding.
std::uint8_t to_byte(double x);

/// Requires C = 3.
ImageU8 to_image(const Field& f);

}  // namespace lfcfg
