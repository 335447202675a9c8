// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/dataset.h>
#include <nmf/log.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace nmf {

namespace fs = std::filesystem;
using nlohmann::json;

Camera SceneDataset::camera(size_t i) const {
    Camera cam;
    cam.width = frames.at(i).rgb.width;
    cam.height = frames.at(i).rgb.height;
    cam.angleX = angleX;
    cam.pose = frames.at(i).pose;
    return cam;
}

namespace {

std::string resolveImage(const fs::path& dir, const std::string& rel) {
    fs::path p = dir / rel;
    if (!p.has_extension() || p.extension() != ".png") {
        fs::path withExt = p;
        withExt += ".png";
        if (fs::exists(withExt)) return withExt.string();
    }
    return p.string();
}

Image compositeOverWhite(const Image& img) {
    if (img.channels == 3) return img;
    Image out(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const bool gray = img.channels <= 2;
            const bool alpha = img.channels == 2 || img.channels == 4;
            const float a = alpha ? img.at(x, y, img.channels - 1) : 1.0f;
            for (int c = 0; c < 3; ++c) {
                const float v = img.at(x, y, gray ? 0 : c);
                out.at(x, y, c) = v * a + (1.0f - a);
            }
        }
    return out;
}

// Gram-Schmidt on the rotation columns; returns the largest deviation seen.
double orthonormalize(Mat4& m) {
    Vec3d col[3];
    for (int c = 0; c < 3; ++c) col[c] = {m(0, c), m(1, c), m(2, c)};
    double dev = 0.0;
    for (int a = 0; a < 3; ++a) {
        dev = std::max(dev, std::abs(dot(col[a], col[a]) - 1.0));
        for (int b = a + 1; b < 3; ++b) dev = std::max(dev, std::abs(dot(col[a], col[b])));
    }
    if (dev <= 1e-2) return dev;
    const double sign = dot(cross(col[0], col[1]), col[2]) < 0.0 ? -1.0 : 1.0;
    col[0] = normalize(col[0]);
    col[1] = normalize(col[1] - col[0] * dot(col[0], col[1]));
    col[2] = cross(col[0], col[1]) * sign;
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) m(r, c) = col[c][r];
    return dev;
}

}  // namespace

SceneDataset loadScene(const std::string& dirPath, const std::string& split) {
    const fs::path dir(dirPath);
    const fs::path file = dir / ("transforms_" + split + ".json");
    std::ifstream in(file);
    if (!in) throw Error("missing transforms file " + file.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error("malformed JSON in " + file.string() + ": " + e.what());
    }
    SceneDataset ds;
    ds.split = split;
    if (!doc.contains("camera_angle_x") || !doc["camera_angle_x"].is_number())
        throw Error("missing camera_angle_x in " + file.string());
    ds.angleX = doc["camera_angle_x"].get<double>();
    if (!(ds.angleX > 0.0 && ds.angleX < kPi)) throw Error("camera_angle_x out of range in " + file.string());
    if (!doc.contains("frames") || !doc["frames"].is_array() || doc["frames"].empty())
        throw Error("no frames in " + file.string());

    for (size_t i = 0; i < doc["frames"].size(); ++i) {
        const json& fr = doc["frames"][i];
        const std::string where = file.string() + " frame " + std::to_string(i);
        if (!fr.contains("file_path") || !fr["file_path"].is_string()) throw Error("missing file_path in " + where);
        const json& tm = fr.value("transform_matrix", json());
        if (!tm.is_array() || tm.size() != 4) throw Error("malformed transform_matrix in " + where);
        Frame frame;
        for (int r = 0; r < 4; ++r) {
            if (!tm[r].is_array() || tm[r].size() != 4) throw Error("malformed transform_matrix in " + where);
            for (int c = 0; c < 4; ++c) {
                if (!tm[r][c].is_number()) throw Error("malformed transform_matrix in " + where);
                frame.pose(r, c) = tm[r][c].get<double>();
                if (!std::isfinite(frame.pose(r, c))) throw Error("non-finite pose in " + where);
            }
        }
        const double dev = orthonormalize(frame.pose);
        if (dev > 1e-2) logWarning("re-orthonormalized rotation of " + where + " (deviation " + std::to_string(dev) + ")");

        frame.imagePath = resolveImage(dir, fr["file_path"].get<std::string>());
        if (!fs::exists(frame.imagePath)) throw Error("missing image " + frame.imagePath);
        frame.rgb = compositeOverWhite(readPng(frame.imagePath));
        if (fr.contains("normal_path")) {
            const std::string p = resolveImage(dir, fr["normal_path"].get<std::string>());
            if (!fs::exists(p)) throw Error("missing normal map " + p);
            frame.normals = decodeNormals(compositeOverWhite(readPng(p)));
        }
        if (fr.contains("opacity_path")) {
            const std::string p = resolveImage(dir, fr["opacity_path"].get<std::string>());
            if (!fs::exists(p)) throw Error("missing opacity map " + p);
            Image a = readPng(p);
            Image one(a.width, a.height, 1);
            for (int y = 0; y < a.height; ++y)
                for (int x = 0; x < a.width; ++x) one.at(x, y, 0) = a.at(x, y, 0);
            frame.opacity = one;
        }
        if (!ds.frames.empty() && (frame.rgb.width != ds.width() || frame.rgb.height != ds.height()))
            throw Error("inconsistent image size " + frame.imagePath);
        ds.frames.push_back(std::move(frame));
    }
    return ds;
}

void writeTransforms(const std::string& dir, const std::string& split, double angleX,
                     const std::vector<std::string>& files, const std::vector<Mat4>& poses,
                     const std::vector<std::string>& normalFiles, const std::vector<std::string>& opacityFiles) {
    json doc;
    doc["camera_angle_x"] = angleX;
    doc["frames"] = json::array();
    for (size_t i = 0; i < files.size(); ++i) {
        json fr;
        fr["file_path"] = files[i];
        json m = json::array();
        for (int r = 0; r < 4; ++r) {
            json row = json::array();
            for (int c = 0; c < 4; ++c) row.push_back(poses[i](r, c));
            m.push_back(row);
        }
        fr["transform_matrix"] = m;
        if (i < normalFiles.size()) fr["normal_path"] = normalFiles[i];
        if (i < opacityFiles.size()) fr["opacity_path"] = opacityFiles[i];
        doc["frames"].push_back(fr);
    }
    const fs::path path = fs::path(dir) / ("transforms_" + split + ".json");
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

Mat4 lookAt(const Vec3d& eye, const Vec3d& target, const Vec3d& up) {
    const Vec3d z = normalize(eye - target);  // camera looks along -z
    Vec3d x = cross(up, z);
    if (length(x) < 1e-9) x = cross(Vec3d{0.0, 1.0, 0.0}, z);
    x = normalize(x);
    const Vec3d y = cross(z, x);
    Mat4 m;
    for (int r = 0; r < 3; ++r) {
        m(r, 0) = x[r];
        m(r, 1) = y[r];
        m(r, 2) = z[r];
        m(r, 3) = eye[r];
    }
    return m;
}

}  // namespace nmf
