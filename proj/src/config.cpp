// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/config.h>
#include <nmf/parallel.h>

#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace nmf {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool validKey(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) return false;
    return k.front() != '.' && k.back() != '.';
}

bool parseNumber(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::string t;
    for (char c : s)
        if (c != '_') t += c;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end && *end == '\0' && std::isfinite(out);
}

// Strips a trailing comment that is not inside a string.
std::string stripComment(const std::string& line) {
    bool inString = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) inString = !inString;
        if (line[i] == '#' && !inString) return line.substr(0, i);
    }
    return line;
}

ConfigValue parseValue(const std::string& raw, bool allowBare, const std::string& where) {
    const std::string v = trim(raw);
    if (v.empty()) throw Error(where + ": missing value");
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') throw Error(where + ": unterminated string");
        std::string out;
        for (size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                const char e = v[++i];
                out += e == 'n' ? '\n' : (e == 't' ? '\t' : e);
            } else {
                out += v[i];
            }
        }
        return out;
    }
    if (v.front() == '[') {
        if (v.back() != ']') throw Error(where + ": unterminated array");
        std::vector<double> arr;
        std::stringstream ss(v.substr(1, v.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            double d;
            if (!parseNumber(item, d)) throw Error(where + ": arrays may only hold numbers, got '" + item + "'");
            arr.push_back(d);
        }
        return arr;
    }
    double d;
    if (parseNumber(v, d)) return d;
    if (allowBare) return v;
    throw Error(where + ": cannot parse value '" + v + "'");
}

// --- typed accessors --------------------------------------------------------------

const char* typeName(const ConfigValue& v) {
    switch (v.index()) {
        case 0: return "boolean";
        case 1: return "number";
        case 2: return "string";
        default: return "array";
    }
}

double asNumber(const std::string& key, const ConfigValue& v) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    if (const std::string* s = std::get_if<std::string>(&v)) {
        double d;
        if (parseNumber(*s, d)) return d;
    }
    throw Error("config key " + key + " expects a number, got a " + typeName(v));
}

int asInt(const std::string& key, const ConfigValue& v, int lo, int hi) {
    const double d = asNumber(key, v);
    if (d != std::floor(d)) throw Error("config key " + key + " expects an integer");
    if (d < lo || d > hi)
        throw Error("config key " + key + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(d);
}

double asReal(const std::string& key, const ConfigValue& v, double lo, double hi) {
    const double d = asNumber(key, v);
    if (d < lo || d > hi) throw Error("config key " + key + " is out of range");
    return d;
}

bool asBool(const std::string& key, const ConfigValue& v) {
    if (const bool* b = std::get_if<bool>(&v)) return *b;
    if (const std::string* s = std::get_if<std::string>(&v)) {
        if (*s == "true") return true;
        if (*s == "false") return false;
    }
    throw Error("config key " + key + " expects true or false");
}

std::string asString(const std::string& key, const ConfigValue& v) {
    if (const std::string* s = std::get_if<std::string>(&v)) return *s;
    throw Error("config key " + key + " expects a string");
}

Rgbd asColor(const std::string& key, const ConfigValue& v, double lo, double hi) {
    const auto* a = std::get_if<std::vector<double>>(&v);
    if (!a || a->size() != 3) throw Error("config key " + key + " expects an array of 3 numbers");
    for (double x : *a)
        if (x < lo || x > hi) throw Error("config key " + key + " is out of range");
    return {(*a)[0], (*a)[1], (*a)[2]};
}

template <typename E>
E asChoice(const std::string& key, const ConfigValue& v, std::initializer_list<std::pair<const char*, E>> choices) {
    const std::string s = asString(key, v);
    std::string names;
    for (const auto& [name, value] : choices) {
        if (s == name) return value;
        names += names.empty() ? name : std::string(", ") + name;
    }
    throw Error("config key " + key + " must be one of: " + names);
}

constexpr int kMaxInt = std::numeric_limits<int>::max();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

ConfigTable parseConfigText(const std::string& text, const std::string& origin) {
    ConfigTable table;
    std::string section;
    std::stringstream in(text);
    std::string line;
    for (int lineNo = 1; std::getline(in, line); ++lineNo) {
        const std::string where = origin + ":" + std::to_string(lineNo);
        const std::string s = trim(stripComment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3) throw Error(where + ": malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!validKey(section)) throw Error(where + ": invalid section name '" + section + "'");
            continue;
        }
        const size_t eq = s.find('=');
        if (eq == std::string::npos) throw Error(where + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        if (!validKey(key)) throw Error(where + ": invalid key '" + key + "'");
        if (!section.empty()) key = section + "." + key;
        if (table.count(key)) throw Error(where + ": duplicate key " + key);
        table[key] = parseValue(s.substr(eq + 1), false, where);
    }
    return table;
}

std::pair<std::string, ConfigValue> parseOverride(const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos) throw Error("override '" + assignment + "' is not key=value");
    const std::string key = trim(assignment.substr(0, eq));
    if (!validKey(key)) throw Error("override has an invalid key '" + key + "'");
    return {key, parseValue(assignment.substr(eq + 1), true, "override " + key)};
}

void RunConfig::apply(const ConfigTable& table) {
    using Setter = std::function<void(const std::string&, const ConfigValue&)>;
    RenderConfig& r = render;
    SyntheticConfig& sy = synthetic;
    const std::map<std::string, Setter> setters = {
        {"data.path", [&](auto& k, auto& v) { dataPath = asString(k, v); }},
        {"data.train_split", [&](auto& k, auto& v) { trainSplit = asString(k, v); }},
        {"data.test_split", [&](auto& k, auto& v) { testSplit = asString(k, v); }},
        {"io.checkpoint", [&](auto& k, auto& v) { checkpoint = asString(k, v); }},
        {"relight.env", [&](auto& k, auto& v) { relightEnv = asString(k, v); }},
        {"relight.rotate_degrees", [&](auto& k, auto& v) { relightRotateDegrees = asReal(k, v, -360.0, 360.0); }},

        {"model.resolution", [&](auto& k, auto& v) { model.grid.resolution.fill(asInt(k, v, 2, 2048)); }},
        {"model.final_resolution", [&](auto& k, auto& v) { finalResolution = asInt(k, v, 2, 2048); }},
        {"model.density_rank", [&](auto& k, auto& v) { model.grid.densityRank = asInt(k, v, 1, 1024); }},
        {"model.feature_rank", [&](auto& k, auto& v) { model.grid.featureRank = asInt(k, v, 1, 1024); }},
        {"model.feature_dim", [&](auto& k, auto& v) { model.grid.featureDim = asInt(k, v, 1, 1024); }},
        {"model.bounds",
         [&](auto& k, auto& v) {
             const double b = asReal(k, v, 1e-3, 1e6);
             model.grid.bounds.lo = {-b, -b, -b};
             model.grid.bounds.hi = {b, b, b};
         }},
        {"model.gain",
         [&](auto& k, auto& v) {
             model.gainMode = asChoice<GainMode>(k, v, {{"neural", GainMode::Neural}, {"identity", GainMode::Identity}});
         }},
        {"model.seed", [&](auto& k, auto& v) { modelSeed = static_cast<uint64_t>(asInt(k, v, 0, kMaxInt)); }},

        {"env.height", [&](auto& k, auto& v) { model.envHeight = asInt(k, v, 4, 1 << 14); }},
        {"env.width", [&](auto& k, auto& v) { model.envWidth = asInt(k, v, 4, 1 << 15); }},
        {"env.init", [&](auto& k, auto& v) { model.envInit = asReal(k, v, 1e-6, 1e6); }},

        {"render.secondary_budget", [&](auto& k, auto& v) { r.secondaryBudget = asInt(k, v, 0, 1 << 16); }},
        {"render.secondary_budget_deep", [&](auto& k, auto& v) { r.secondaryBudgetDeep = asInt(k, v, 0, 1 << 16); }},
        {"render.retrace_budget", [&](auto& k, auto& v) { r.retraceBudget = asInt(k, v, 0, 1 << 16); }},
        {"render.max_bounces", [&](auto& k, auto& v) { r.maxBounces = asInt(k, v, 1, 4); }},
        {"render.samples_per_ray", [&](auto& k, auto& v) { r.samplesPerRay = asInt(k, v, 1, 1 << 16); }},
        {"render.near", [&](auto& k, auto& v) { r.near = asReal(k, v, 0.0, kInf); }},
        {"render.far", [&](auto& k, auto& v) { r.far = asReal(k, v, 0.0, kInf); }},
        {"render.early_stop", [&](auto& k, auto& v) { r.transmittanceEps = asReal(k, v, 1e-12, 0.5); }},
        {"render.min_shade_weight", [&](auto& k, auto& v) { r.minShadeWeight = asReal(k, v, 0.0, 1.0); }},
        {"render.retrace_noise", [&](auto& k, auto& v) { r.retraceNoise = asReal(k, v, 0.0, 1e3); }},
        {"render.retrace_offset_voxels", [&](auto& k, auto& v) { r.retraceOffsetVoxels = asReal(k, v, 0.0, 1e3); }},
        {"render.background",
         [&](auto& k, auto& v) {
             r.background = asChoice<BackgroundMode>(k, v,
                                                     {{"white", BackgroundMode::White},
                                                      {"black", BackgroundMode::Black},
                                                      {"color", BackgroundMode::Color},
                                                      {"env", BackgroundMode::Environment}});
         }},
        {"render.background_color", [&](auto& k, auto& v) { r.backgroundColor = asColor(k, v, 0.0, 1e6); }},
        {"render.footprint",
         [&](auto& k, auto& v) {
             r.footprint = asChoice<FootprintRule>(
                 k, v, {{"solid_angle", FootprintRule::SolidAngle}, {"literal", FootprintRule::Literal}});
         }},
        {"render.alignment",
         [&](auto& k, auto& v) {
             r.alignment = asChoice<RectAlignment>(
                 k, v, {{"fractional", RectAlignment::Fractional}, {"outward", RectAlignment::Outward}});
         }},
        {"render.pixel_jitter", [&](auto& k, auto& v) { r.pixelJitter = asBool(k, v); }},
        {"render.seed", [&](auto& k, auto& v) { r.seed = static_cast<uint64_t>(asInt(k, v, 0, kMaxInt)); }},
        {"render.normal_sigma",
         [&](auto& k, auto& v) { r.kernel = NormalKernel::gaussian(asReal(k, v, 1e-3, 100.0)); }},

        {"train.schedule_scale", [&](auto& k, auto& v) { scheduleScale = asReal(k, v, 1e-6, 1e3); }},
        {"train.batch_size", [&](auto& k, auto& v) { train.batchSize = asInt(k, v, 1, 1 << 24); }},
        {"train.lambda_orientation", [&](auto& k, auto& v) { train.lambdaOrientation = asReal(k, v, 0.0, 1e6); }},
        {"train.lr_grid", [&](auto& k, auto& v) { train.adam.lrGrid = asReal(k, v, 0.0, 1e3); }},
        {"train.lr_network", [&](auto& k, auto& v) { train.adam.lrNetwork = asReal(k, v, 0.0, 1e3); }},
        {"train.lr_env", [&](auto& k, auto& v) { train.adam.lrEnvironment = asReal(k, v, 0.0, 1e3); }},
        {"train.beta1", [&](auto& k, auto& v) { train.adam.beta1 = asReal(k, v, 0.0, 0.999999); }},
        {"train.beta2", [&](auto& k, auto& v) { train.adam.beta2 = asReal(k, v, 0.0, 0.999999); }},
        {"train.eps", [&](auto& k, auto& v) { train.adam.eps = asReal(k, v, 0.0, 1.0); }},
        {"train.grad_chunks", [&](auto& k, auto& v) { train.gradChunks = asInt(k, v, 1, 4096); }},
        {"train.seed", [&](auto& k, auto& v) { train.seed = static_cast<uint64_t>(asInt(k, v, 0, kMaxInt)); }},
        {"train.snapshot_every", [&](auto& k, auto& v) { snapshotEvery = asInt(k, v, 0, kMaxInt); }},
        {"train.checkpoint_every", [&](auto& k, auto& v) { checkpointEvery = asInt(k, v, 0, kMaxInt); }},
        {"train.snapshot_view", [&](auto& k, auto& v) { snapshotView = asInt(k, v, 0, kMaxInt); }},

        {"synthetic.train_views", [&](auto& k, auto& v) { sy.trainViews = asInt(k, v, 1, 100000); }},
        {"synthetic.test_views", [&](auto& k, auto& v) { sy.testViews = asInt(k, v, 0, 100000); }},
        {"synthetic.width", [&](auto& k, auto& v) { sy.width = asInt(k, v, 1, 1 << 14); }},
        {"synthetic.height", [&](auto& k, auto& v) { sy.height = asInt(k, v, 1, 1 << 14); }},
        {"synthetic.fov_degrees", [&](auto& k, auto& v) { sy.fovDegrees = asReal(k, v, 1.0, 179.0); }},
        {"synthetic.camera_distance", [&](auto& k, auto& v) { sy.cameraDistance = asReal(k, v, 1e-3, 1e6); }},
        {"synthetic.radius", [&](auto& k, auto& v) { sy.radius = asReal(k, v, 1e-3, 1e6); }},
        {"synthetic.sharpness", [&](auto& k, auto& v) { sy.sharpness = asReal(k, v, 1e-5, 1e3); }},
        {"synthetic.sigma_max", [&](auto& k, auto& v) { sy.sigmaMax = asReal(k, v, 1e-3, 1e9); }},
        {"synthetic.albedo", [&](auto& k, auto& v) { sy.albedo = asColor(k, v, 0.0, 1.0); }},
        {"synthetic.albedo_alt", [&](auto& k, auto& v) { sy.albedoAlt = asColor(k, v, 0.0, 1.0); }},
        {"synthetic.checker", [&](auto& k, auto& v) { sy.checker = asInt(k, v, 0, 4096); }},
        {"synthetic.f0", [&](auto& k, auto& v) { sy.f0 = asColor(k, v, 0.0, 1.0); }},
        {"synthetic.roughness", [&](auto& k, auto& v) { sy.roughness = asReal(k, v, kAlphaMin, 1.0); }},
        {"synthetic.env_height", [&](auto& k, auto& v) { sy.envHeight = asInt(k, v, 4, 1 << 14); }},
        {"synthetic.env_width", [&](auto& k, auto& v) { sy.envWidth = asInt(k, v, 4, 1 << 15); }},
        {"synthetic.secondary_budget", [&](auto& k, auto& v) { sy.secondaryBudget = asInt(k, v, 0, 1 << 16); }},
        {"synthetic.samples_per_ray", [&](auto& k, auto& v) { sy.samplesPerRay = asInt(k, v, 1, 1 << 16); }},
        {"synthetic.seed", [&](auto& k, auto& v) { sy.seed = static_cast<uint64_t>(asInt(k, v, 0, kMaxInt)); }},
    };
    for (const auto& [key, value] : table) {
        auto it = setters.find(key);
        if (it == setters.end()) throw Error("unknown config key " + key);
        it->second(key, value);
    }
}

void RunConfig::finalize() {
    const int start = model.grid.resolution[0];
    if (finalResolution < start) throw Error("model.final_resolution must be at least model.resolution");
    if (model.envWidth != 2 * model.envHeight && model.envWidth < model.envHeight)
        throw Error("env.width must not be smaller than env.height");
    render.validate();
    train.schedule = Schedule::scaled(scheduleScale);
    train.startResolution = start;
    train.finalResolution = finalResolution;
    train.render = render;
    train.workers = workerCount();
    if (synthetic.testViews < 0 || synthetic.trainViews < 1) throw Error("synthetic view counts are invalid");
}

RunConfig loadRunConfig(const std::string& path, const std::vector<std::string>& overrides) {
    ConfigTable table;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw Error("cannot read config " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        table = parseConfigText(ss.str(), path);
    }
    for (const std::string& o : overrides) {
        auto [key, value] = parseOverride(o);
        table[key] = value;
    }
    RunConfig cfg;
    cfg.apply(table);
    cfg.finalize();
    return cfg;
}

}  // namespace nmf
