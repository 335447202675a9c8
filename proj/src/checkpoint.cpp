// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/checkpoint.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace nmf {

namespace {

struct Array {
    std::vector<uint32_t> dims;
    std::vector<float> data;
};

void putU32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t getU32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw Error("truncated checkpoint");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void putArray(std::ostream& out, const std::string& name, std::span<const double> values) {
    putU32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    putU32(out, 1);
    putU32(out, static_cast<uint32_t>(values.size()));
    for (double v : values) putU32(out, std::bit_cast<uint32_t>(static_cast<float>(v)));
}

}  // namespace

void saveCheckpoint(const std::string& path, Model& model, int step) {
    const GridShape& g = model.grid.shape();
    const std::vector<double> shape{static_cast<double>(g.resolution[0]),
                                    static_cast<double>(g.resolution[1]),
                                    static_cast<double>(g.resolution[2]),
                                    static_cast<double>(g.densityRank),
                                    static_cast<double>(g.featureRank),
                                    static_cast<double>(g.featureDim),
                                    model.gain.mode() == GainMode::Neural ? 1.0 : 0.0,
                                    static_cast<double>(model.env.height()),
                                    static_cast<double>(model.env.width()),
                                    static_cast<double>(step)};
    const std::vector<double> bounds{g.bounds.lo.x, g.bounds.lo.y, g.bounds.lo.z,
                                     g.bounds.hi.x, g.bounds.hi.y, g.bounds.hi.z};
    const std::vector<double> alphaMin{model.decoder.alphaMin()};
    const ParamList params = model.params();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path);
    out.write("NMF1", 4);
    putU32(out, kCheckpointVersion);
    putU32(out, static_cast<uint32_t>(3 + params.size()));
    putU32(out, 0);
    putArray(out, "meta.shape", shape);
    putArray(out, "meta.bounds", bounds);
    putArray(out, "meta.alpha_min", alphaMin);
    for (const ParamRef& p : params) putArray(out, p.name, p.data);
    if (!out) throw Error("failed writing checkpoint " + path);
}

Model loadCheckpoint(const std::string& path, int* step) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "NMF1", 4) != 0) throw Error("not a checkpoint (bad magic): " + path);
    const uint32_t version = getU32(in);
    if (version != kCheckpointVersion)
        throw Error("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + "): " + path);
    const uint32_t count = getU32(in);
    getU32(in);

    std::map<std::string, Array> arrays;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t len = getU32(in);
        if (len > 4096) throw Error("corrupt checkpoint (array name too long): " + path);
        std::string name(len, '\0');
        in.read(name.data(), len);
        Array a;
        const uint32_t ndim = getU32(in);
        if (ndim > 8) throw Error("corrupt checkpoint (too many dimensions): " + path);
        size_t n = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            a.dims.push_back(getU32(in));
            n *= a.dims.back();
        }
        if (n > (size_t{1} << 32)) throw Error("corrupt checkpoint (array too large): " + path);
        a.data.resize(n);
        for (size_t k = 0; k < n; ++k) a.data[k] = std::bit_cast<float>(getU32(in));
        arrays[name] = std::move(a);
    }

    auto need = [&](const std::string& name) -> const Array& {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw Error("checkpoint is missing array " + name + ": " + path);
        return it->second;
    };
    const Array& shape = need("meta.shape");
    const Array& bounds = need("meta.bounds");
    if (shape.data.size() != 10 || bounds.data.size() != 6) throw Error("corrupt checkpoint metadata: " + path);

    ModelShape ms;
    for (int a = 0; a < 3; ++a) ms.grid.resolution[a] = static_cast<int>(shape.data[a]);
    ms.grid.densityRank = static_cast<int>(shape.data[3]);
    ms.grid.featureRank = static_cast<int>(shape.data[4]);
    ms.grid.featureDim = static_cast<int>(shape.data[5]);
    ms.gainMode = shape.data[6] != 0.0f ? GainMode::Neural : GainMode::Identity;
    ms.envHeight = static_cast<int>(shape.data[7]);
    ms.envWidth = static_cast<int>(shape.data[8]);
    ms.grid.bounds.lo = {bounds.data[0], bounds.data[1], bounds.data[2]};
    ms.grid.bounds.hi = {bounds.data[3], bounds.data[4], bounds.data[5]};
    if (step) *step = static_cast<int>(shape.data[9]);

    Model model;
    model.grid = FactorGrid(ms.grid);
    double alphaMin = arrays.count("meta.alpha_min") ? arrays["meta.alpha_min"].data.at(0) : kAlphaMin;
    if (static_cast<float>(alphaMin) == static_cast<float>(kAlphaMin)) alphaMin = kAlphaMin;
    model.decoder = MaterialDecoder(ms.grid.featureDim, alphaMin);
    model.gain = GainNetwork(ms.grid.featureDim, ms.gainMode);
    model.env = EnvironmentMap(ms.envHeight, ms.envWidth);
    for (ParamRef& p : model.params()) {
        const Array& a = need(p.name);
        if (a.data.size() != p.data.size())
            throw Error("checkpoint array " + p.name + " has " + std::to_string(a.data.size()) + " values, expected " +
                        std::to_string(p.data.size()));
        for (size_t k = 0; k < a.data.size(); ++k) p.data[k] = a.data[k];
    }
    return model;
}

}  // namespace nmf
