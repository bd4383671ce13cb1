#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aforge/errors.hpp"
#include "aforge/tensor.hpp"

namespace aforge {

/// Round half away from zero, quantizing a [0,1] value to 0..255.
inline int quantize_u8(double v) {
    const long q = std::lround(255.0 * v);
    return static_cast<int>(std::clamp(q, 0L, 255L));
}

/// Writes an H x W (grayscale, P5) or H x W x 3 (P6) tensor of [0,1] values.
inline void write_pnm(const Tensor& img, const std::filesystem::path& path) {
    const bool color = img.rank() == 3;
    if (!color && img.rank() != 2) {
        throw ShapeError("write_pnm: expected rank 2 or 3, got " + img.shape_str());
    }
    if (color && img.extent(2) != 3) {
        throw ShapeError("write_pnm: color image must have 3 channels, got " + img.shape_str());
    }
    const std::size_t h = img.extent(0), w = img.extent(1);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pnm: cannot open " + path.string());
    out << (color ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> bytes;
    bytes.reserve(h * w * (color ? 3 : 1));
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (color) {
                for (std::size_t c = 0; c < 3; ++c)
                    bytes.push_back(static_cast<unsigned char>(quantize_u8(img.at(y, x, c))));
            } else {
                bytes.push_back(static_cast<unsigned char>(quantize_u8(img.at(y, x))));
            }
        }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write_pnm: short write to " + path.string());
}

/// Reads a binary P5/P6 file into an H x W or H x W x 3 tensor of [0,1] values.
inline Tensor read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pnm: cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6") {
        throw SchemaError("read_pnm: unsupported magic '" + magic + "' in " + path.string());
    }
    auto next_token = [&in, &path]() {
        std::string tok;
        while (true) {
            if (!(in >> tok)) throw SchemaError("read_pnm: truncated header in " + path.string());
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
    };
    const std::size_t w = std::stoul(next_token());
    const std::size_t h = std::stoul(next_token());
    const std::size_t maxval = std::stoul(next_token());
    if (maxval != 255) throw SchemaError("read_pnm: only maxval 255 supported in " + path.string());
    in.get();  // single whitespace before raster
    const std::size_t channels = (magic == "P6") ? 3 : 1;
    std::vector<unsigned char> bytes(h * w * channels);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throw SchemaError("read_pnm: truncated raster in " + path.string());
    }
    Tensor img(channels == 3 ? std::vector<std::size_t>{h, w, 3} : std::vector<std::size_t>{h, w});
    for (std::size_t i = 0; i < bytes.size(); ++i) img[i] = static_cast<double>(bytes[i]) / 255.0;
    return img;
}

// Raw little-endian 64-bit float blobs (explicit byte order, host independent).

inline void append_f64le(std::vector<unsigned char>& out, double v) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>((u >> (8 * b)) & 0xff));
}

inline double parse_f64le(const unsigned char* p) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(u);
}

inline void write_f64_blob(const std::vector<const Tensor*>& tensors,
                           const std::filesystem::path& path) {
    std::vector<unsigned char> bytes;
    for (const Tensor* t : tensors)
        for (std::size_t i = 0; i < t->size(); ++i) append_f64le(bytes, (*t)[i]);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_f64_blob: cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write_f64_blob: short write to " + path.string());
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_file_bytes: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string s = ss.str();
    return std::vector<unsigned char>(s.begin(), s.end());
}

inline void read_f64_blob(const std::filesystem::path& path, const std::vector<Tensor*>& tensors) {
    const std::vector<unsigned char> bytes = read_file_bytes(path);
    std::size_t need = 0;
    for (const Tensor* t : tensors) need += t->size() * 8;
    if (bytes.size() != need) {
        throw SchemaError("read_f64_blob: " + path.string() + " holds " +
                          std::to_string(bytes.size()) + " bytes, manifest expects " +
                          std::to_string(need));
    }
    std::size_t off = 0;
    for (Tensor* t : tensors) {
        for (std::size_t i = 0; i < t->size(); ++i) {
            (*t)[i] = parse_f64le(bytes.data() + off);
            off += 8;
        }
    }
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_text_file: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_text_file: cannot open " + path.string());
    out << content;
    if (!out) throw IoError("write_text_file: short write to " + path.string());
}

}  // namespace aforge
