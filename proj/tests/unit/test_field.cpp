#include <cmath>
#include <limits>

#include "doctest.h"
#include "lfcfg/error.hpp"
#include "lfcfg/field.hpp"
#include "lfcfg/io.hpp"
#include "testing.hpp"

using namespace lfcfg;

TEST_CASE("field construction validates shape, length and finiteness") {
    CHECK_THROWS_AS(Field(Shape{0, 2, 2}, {}), ShapeMismatchError);
    CHECK_THROWS_AS(Field(Shape{1, 2, 2}, {1, 2, 3}), ShapeMismatchError);
    CHECK_THROWS_AS(Field(Shape{1, 1, 2}, {1, std::numeric_limits<double>::quiet_NaN()}), Error);
    CHECK_THROWS_AS(Field(Shape{1, 1, 1}, {std::numeric_limits<double>::infinity()}), Error);
    const Field f = Field::generate(Shape{2, 3, 4}, [](auto c, auto h, auto w) { return 100.0 * c + 10.0 * h + w; });
    CHECK(f.at(1, 2, 3) == 123.0);
    CHECK(f[(1 * 3 + 2) * 4 + 3] == 123.0);
    CHECK(f.channel(1)[0] == 100.0);
}

TEST_CASE("elementwise ops") {
    std::mt19937_64 rng(11);
    const Field f = testing::random_field(Shape{3, 5, 7}, rng);
    CHECK(max_abs_diff(add(f, Field::zeros(f.shape())), f) == 0.0);
    CHECK(max_abs(sub(f, f)) == 0.0);
    CHECK(max_abs_diff(scale(scale(f, 2.0), 0.5), f) <= 1e-15);
    CHECK(mul(f, f).shape() == f.shape());
    CHECK_THROWS_AS(add(f, Field::zeros(Shape{3, 5, 6})), ShapeMismatchError);
    CHECK_THROWS_AS(field_map2(f, Field::zeros(Shape{1, 5, 7}), BinaryOp::mul), ShapeMismatchError);
}

TEST_CASE("to_image clamp map and rounding") {
    const ImageU8 black = to_image(Field::constant(Shape{3, 2, 2}, -1.0));
    const ImageU8 white = to_image(Field::constant(Shape{3, 2, 2}, 1.0));
    const ImageU8 mid = to_image(Field::constant(Shape{3, 1, 1}, 0.0));
    for (auto b : black.rgb) CHECK(b == 0);
    for (auto b : white.rgb) CHECK(b == 255);
    CHECK(mid.at(0, 0, 0) == 128);
    CHECK(to_byte(-5.0) == 0);
    CHECK(to_byte(5.0) == 255);
    CHECK_THROWS_AS(to_image(Field::zeros(Shape{1, 2, 2})), ShapeMismatchError);

    // Monotone in the value.
    int prev = -1;
    for (double x = -1.2; x <= 1.2; x += 0.001) {
        const int b = to_byte(x);
        CHECK(b >= prev);
        prev = b;
    }
}

TEST_CASE("ppm encoding and panels") {
    const ImageU8 img = to_image(Field::generate(Shape{3, 2, 3}, [](auto c, auto, auto w) {
        return c == 0 ? 1.0 : (w == 0 ? -1.0 : 0.0);
    }));
    const auto bytes = encode_ppm(img);
    const std::string header = "P6\n3 2\n255\n";
    REQUIRE(bytes.size() == header.size() + 3 * 2 * 3);
    CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
    CHECK(static_cast<unsigned char>(bytes[header.size()]) == 255);

    const ImageU8 strip = hconcat({img, img}, 2);
    CHECK(strip.width == 8);
    CHECK(strip.height == 2);

    const std::vector<double> plane{0.0, 0.5, 1.0, 2.0};
    const ImageU8 hm = heatmap(plane, 2, 2, 0.0, 1.0);
    CHECK(hm.at(0, 0, 0) == 0);
    CHECK(hm.at(1, 1, 2) == 255);
}
