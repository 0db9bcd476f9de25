#include "lfcfg/npy.hpp"

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>

#include "lfcfg/error.hpp"
#include "lfcfg/io.hpp"

namespace lfcfg {
namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreludeLen = 10;  // magic + version + uint16 header length
constexpr std::size_t kAlign = 64;

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Returns the raw text of the value for `key` in a numpy header dict literal.
std::string header_value(const std::string& header, const std::string& key) {
    const std::string needle = "'" + key + "'";
    auto pos = header.find(needle);
    if (pos == std::string::npos) throw FormatError("npy header field '" + key + "' is missing");
    pos = header.find(':', pos + needle.size());
    if (pos == std::string::npos) throw FormatError("npy header field '" + key + "' has no value");
    ++pos;
    while (pos < header.size() && std::isspace(static_cast<unsigned char>(header[pos]))) ++pos;
    if (pos >= header.size()) throw FormatError("npy header field '" + key + "' has no value");
    std::size_t end;
    if (header[pos] == '(') {
        end = header.find(')', pos);
        if (end == std::string::npos) throw FormatError("npy header field '" + key + "' is not a closed tuple");
        return header.substr(pos, end - pos + 1);
    }
    if (header[pos] == '\'') {
        end = header.find('\'', pos + 1);
        if (end == std::string::npos) throw FormatError("npy header field '" + key + "' is not a closed string");
        return header.substr(pos + 1, end - pos - 1);
    }
    end = header.find_first_of(",}", pos);
    return trim(header.substr(pos, end - pos));
}

Shape parse_shape(const std::string& tuple) {
    std::vector<std::size_t> dims;
    std::string inner = tuple.substr(1, tuple.size() - 2);
    std::size_t start = 0;
    while (start <= inner.size()) {
        auto comma = inner.find(',', start);
        std::string tok = trim(inner.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!tok.empty()) {
            for (char ch : tok)
                if (!std::isdigit(static_cast<unsigned char>(ch)))
                    throw FormatError("npy header field 'shape' has a non-integer entry: " + tuple);
            dims.push_back(std::stoull(tok));
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (dims.size() != 3) throw FormatError("npy header field 'shape' must have rank 3 (C, H, W), got " + tuple);
    return Shape{dims[0], dims[1], dims[2]};
}

std::string shape_literal(const Shape& s) {
    return "(" + std::to_string(s.channels) + ", " + std::to_string(s.height) + ", " + std::to_string(s.width) + ")";
}

}  // namespace

const char* to_string(NpyDtype dtype) { return dtype == NpyDtype::f32 ? "float32" : "float64"; }

NpyDtype parse_dtype(const std::string& name) {
    if (name == "float32" || name == "f4" || name == "<f4") return NpyDtype::f32;
    if (name == "float64" || name == "f8" || name == "<f8") return NpyDtype::f64;
    throw FormatError("unsupported dtype '" + name + "' (expected float32 or float64)");
}

std::vector<char> npy_encode(const Field& f, NpyDtype dtype) {
    std::string dict = std::string("{'descr': '") + (dtype == NpyDtype::f32 ? "<f4" : "<f8") +
                       "', 'fortran_order': False, 'shape': " + shape_literal(f.shape()) + ", }";
    std::size_t total = kPreludeLen + dict.size() + 1;
    std::size_t padded = (total + kAlign - 1) / kAlign * kAlign;
    dict.append(padded - total, ' ');
    dict.push_back('\n');

    const std::size_t elem = dtype == NpyDtype::f32 ? 4 : 8;
    const auto hlen = static_cast<std::uint16_t>(dict.size());
    std::vector<char> out(kPreludeLen + dict.size() + f.size() * elem);
    char* p = out.data();
    std::memcpy(p, kMagic, kMagicLen);
    p += kMagicLen;
    *p++ = '\x01';
    *p++ = '\x00';
    *p++ = static_cast<char>(hlen & 0xff);
    *p++ = static_cast<char>(hlen >> 8);
    std::memcpy(p, dict.data(), dict.size());
    p += dict.size();
    for (double v : f.values()) {
        if (dtype == NpyDtype::f32) {
            const float x = static_cast<float>(v);
            std::memcpy(p, &x, 4);
        } else {
            std::memcpy(p, &v, 8);
        }
        p += elem;
    }
    return out;
}

Field npy_decode(const std::vector<char>& bytes, NpyDtype* stored_dtype) {
    if (bytes.size() < kPreludeLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
        throw FormatError("npy field 'magic' is invalid");
    }
    if (bytes[6] != 1 || bytes[7] != 0) {
        throw FormatError("npy field 'version' must be 1.0, got " + std::to_string(static_cast<int>(bytes[6])) + "." +
                          std::to_string(static_cast<int>(bytes[7])));
    }
    const std::size_t hlen = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
    if (bytes.size() < kPreludeLen + hlen) throw FormatError("npy field 'header_len' exceeds file size");
    const std::string header(bytes.data() + kPreludeLen, hlen);
    if (header.find('{') == std::string::npos || header.find('}') == std::string::npos) {
        throw FormatError("npy header is not a dict literal");
    }

    const std::string descr = header_value(header, "descr");
    NpyDtype dtype;
    if (descr == "<f4") {
        dtype = NpyDtype::f32;
    } else if (descr == "<f8") {
        dtype = NpyDtype::f64;
    } else {
        throw FormatError("npy header field 'descr' has unsupported dtype '" + descr + "'");
    }
    const std::string fortran = header_value(header, "fortran_order");
    if (fortran == "True") throw FormatError("npy header field 'fortran_order' is True; only C order is supported");
    if (fortran != "False") throw FormatError("npy header field 'fortran_order' has invalid value '" + fortran + "'");
    const std::string shape_text = header_value(header, "shape");
    if (shape_text.empty() || shape_text.front() != '(') {
        throw FormatError("npy header field 'shape' is not a tuple: " + shape_text);
    }
    const Shape shape = parse_shape(shape_text);

    const std::size_t elem = dtype == NpyDtype::f32 ? 4 : 8;
    const std::size_t offset = kPreludeLen + hlen;
    if (bytes.size() - offset != shape.size() * elem) {
        throw FormatError("npy payload has " + std::to_string(bytes.size() - offset) + " bytes, header field 'shape' " +
                          shape_text + " requires " + std::to_string(shape.size() * elem));
    }
    std::vector<double> data(shape.size());
    const char* p = bytes.data() + offset;
    for (std::size_t i = 0; i < data.size(); ++i, p += elem) {
        if (dtype == NpyDtype::f32) {
            float x;
            std::memcpy(&x, p, 4);
            data[i] = x;
        } else {
            std::memcpy(&data[i], p, 8);
        }
    }
    if (stored_dtype) *stored_dtype = dtype;
    return Field(shape, std::move(data));
}

void npy_write(const Field& f, const std::filesystem::path& path, NpyDtype dtype) {
    write_file_atomic(path, npy_encode(f, dtype));
}

Field npy_read(const std::filesystem::path& path, NpyDtype* stored_dtype) {
    return npy_decode(read_file(path), stored_dtype);
}

Field narrow_to_f32(const Field& f) {
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(f[i]);
    return Field(f.shape(), std::move(out));
}

}  // namespace lfcfg
