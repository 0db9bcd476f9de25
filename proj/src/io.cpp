#include "lfcfg/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "lfcfg/error.hpp"

namespace lfcfg {

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes) {
    write_file_atomic(path, std::string_view(bytes.data(), bytes.size()));
}

std::vector<char> encode_ppm(const ImageU8& img) {
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<char> out(header.begin(), header.end());
    out.insert(out.end(), img.rgb.begin(), img.rgb.end());
    return out;
}

void write_ppm(const ImageU8& img, const std::filesystem::path& path) { write_file_atomic(path, encode_ppm(img)); }

ImageU8 hconcat(const std::vector<ImageU8>& panels, std::size_t gap) {
    ImageU8 out;
    for (const auto& p : panels) {
        out.height = std::max(out.height, p.height);
        out.width += p.width;
    }
    if (!panels.empty()) out.width += gap * (panels.size() - 1);
    out.rgb.assign(out.height * out.width * 3, 0);
    std::size_t x0 = 0;
    for (const auto& p : panels) {
        for (std::size_t h = 0; h < p.height; ++h)
            std::copy_n(p.rgb.begin() + static_cast<std::ptrdiff_t>(h * p.width * 3), p.width * 3,
                        out.rgb.begin() + static_cast<std::ptrdiff_t>((h * out.width + x0) * 3));
        x0 += p.width + gap;
    }
    return out;
}

ImageU8 heatmap(std::span<const double> plane, std::size_t height, std::size_t width, double lo, double hi) {
    ImageU8 img{height, width, std::vector<std::uint8_t>(height * width * 3)};
    const double range = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < height * width; ++i) {
        const double u = std::clamp((plane[i] - lo) / range, 0.0, 1.0);
        const auto b = static_cast<std::uint8_t>(std::floor(u * 255.0 + 0.5));
        img.rgb[i * 3] = img.rgb[i * 3 + 1] = img.rgb[i * 3 + 2] = b;
    }
    return img;
}

}  // namespace lfcfg
