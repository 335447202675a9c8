// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/image_io.h>

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace nmf {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Image readPng(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw Error("cannot open image " + path);
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_stdio(&image, file.get())) throw Error("not a readable PNG: " + path);
    const bool alpha = image.format & PNG_FORMAT_FLAG_ALPHA;
    const bool color = image.format & PNG_FORMAT_FLAG_COLOR;
    const int channels = (color ? 3 : 1) + (alpha ? 1 : 0);
    image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB) : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error("corrupt PNG " + path + ": " + image.message);
    }
    Image out(static_cast<int>(image.width), static_cast<int>(image.height), channels);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = buffer[i] / 255.0f;
    return out;
}

void writePng(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3 && img.channels != 4) throw Error("PNG needs 1, 3 or 4 channels");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 1 ? PNG_FORMAT_GRAY : (img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA);
    std::vector<png_byte> buffer(img.data.size());
    for (size_t i = 0; i < buffer.size(); ++i) {
        const float v = std::isfinite(img.data[i]) ? std::clamp(img.data[i], 0.0f, 1.0f) : 0.0f;
        buffer[i] = static_cast<png_byte>(std::lround(v * 255.0f));
    }
    if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr))
        throw Error("cannot write PNG " + path + ": " + image.message);
}

Image readPfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    in.get();  // the single whitespace byte after the header
    if (magic != "PF" || w <= 0 || h <= 0 || scale == 0.0) throw Error("not a 3-channel PFM: " + path);
    const bool little = scale < 0.0;
    Image img(w, h, 3);
    std::vector<uint32_t> raw(static_cast<size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!in) throw Error("truncated PFM: " + path);
    const bool swap = little != (std::endian::native == std::endian::little);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w * 3; ++x) {
            uint32_t bits = raw[static_cast<size_t>(y) * w * 3 + x];
            if (swap) bits = __builtin_bswap32(bits);
            img.data[static_cast<size_t>(h - 1 - y) * w * 3 + x] = std::bit_cast<float>(bits);
        }
    return img;
}

void writePfm(const std::string& path, const Image& img) {
    if (img.channels != 3) throw Error("PFM export needs 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << "PF\n" << img.width << ' ' << img.height << "\n-1.0\n";
    std::vector<uint32_t> raw(img.data.size());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width * 3; ++x) {
            uint32_t bits = std::bit_cast<uint32_t>(img.data[static_cast<size_t>(img.height - 1 - y) * img.width * 3 + x]);
            if constexpr (std::endian::native != std::endian::little) bits = __builtin_bswap32(bits);
            raw[static_cast<size_t>(y) * img.width * 3 + x] = bits;
        }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!out) throw Error("failed writing " + path);
}

Image encodeNormals(const Image& normals) {
    Image out = normals;
    for (float& v : out.data) v = v * 0.5f + 0.5f;
    return out;
}

Image decodeNormals(const Image& encoded) {
    Image out(encoded.width, encoded.height, 3);
    for (int y = 0; y < encoded.height; ++y)
        for (int x = 0; x < encoded.width; ++x) {
            Vec3d n{encoded.at(x, y, 0) * 2.0 - 1.0, encoded.at(x, y, 1) * 2.0 - 1.0, encoded.at(x, y, 2) * 2.0 - 1.0};
            const double len = length(n);
            // 8-bit mid-gray decodes to a tiny vector: treat as "no normal".
            n = len > 0.5 ? n / len : Vec3d{};
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(n[c]);
        }
    return out;
}

EnvironmentMap environmentFromImage(const Image& img) {
    std::vector<double> rgb(img.data.begin(), img.data.end());
    for (double& v : rgb) v = std::max(v, 1e-6);
    return EnvironmentMap::fromRadiance(img.height, img.width, rgb);
}

Image environmentToImage(const EnvironmentMap& env) {
    Image img(env.width(), env.height(), 3);
    const std::vector<double> rgb = env.radiance();
    for (size_t i = 0; i < rgb.size(); ++i) img.data[i] = static_cast<float>(rgb[i]);
    return img;
}

}  // namespace nmf
