// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/optim.h>

#include <nmf/metrics.h>
#include <nmf/parallel.h>

#include <algorithm>
#include <cmath>

namespace nmf {

Schedule Schedule::scaled(double factor) {
    if (!(factor > 0.0)) throw Error("schedule scale must be positive");
    Schedule s;
    auto scale = [factor](int v) { return std::max(1, static_cast<int>(std::lround(v * factor))); };
    s.warmupSteps = scale(s.warmupSteps);
    s.totalSteps = scale(s.totalSteps);
    for (int& u : s.upsampleSteps) u = scale(u);
    return s;
}

double lrMultiplier(int i, const Schedule& s) {
    const double warm = std::clamp(static_cast<double>(i) / s.warmupSteps, 0.0, 1.0);
    const double ramp = s.warmupFloor + (1.0 - s.warmupFloor) * std::sin(0.5 * kPi * warm);
    return ramp * std::pow(s.finalDecay, static_cast<double>(i) / s.totalSteps);
}

double orientationLoss(std::span<const double> weights, std::span<const Vec3d> normals, const Vec3d& wo) {
    if (weights.size() != normals.size()) throw Error("orientation loss needs one normal per weight");
    double s = 0.0;
    for (size_t j = 0; j < weights.size(); ++j) {
        const double back = std::max(0.0, -dot(normals[j], wo));
        s += weights[j] * back * back;
    }
    return s;
}

double photometricLoss(const Image& rendered, const Image& target) { return meanSquaredError(rendered, target); }

double AdamConfig::lr(ParamGroup g) const {
    switch (g) {
        case ParamGroup::Grid: return lrGrid;
        case ParamGroup::Network: return lrNetwork;
        default: return lrEnvironment;
    }
}

void Adam::step(ParamList params, ParamList grads, double multiplier) {
    if (params.size() != grads.size()) throw Error("gradient list does not match the parameters");
    moments_.resize(params.size());
    for (size_t a = 0; a < params.size(); ++a) {
        if (grads[a].data.size() != params[a].data.size()) throw Error("gradient shape mismatch for " + params[a].name);
        for (double g : grads[a].data)
            if (!std::isfinite(g)) throw Error("non-finite gradient in " + params[a].name);
    }
    std::vector<std::vector<double>> updated(params.size());
    for (size_t a = 0; a < params.size(); ++a) {
        Moments& mo = moments_[a];
        const size_t n = params[a].data.size();
        if (mo.m.size() != n) mo = {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
    }
    // Compute into scratch first so a failure leaves the state untouched.
    std::vector<Moments> next = moments_;
    for (size_t a = 0; a < params.size(); ++a) {
        Moments& mo = next[a];
        mo.t += 1;
        const double lr = cfg_.lr(params[a].group) * multiplier;
        const double c1 = 1.0 - std::pow(cfg_.beta1, mo.t), c2 = 1.0 - std::pow(cfg_.beta2, mo.t);
        const auto p = params[a].data;
        const auto g = grads[a].data;
        updated[a].resize(p.size());
        for (size_t k = 0; k < p.size(); ++k) {
            mo.m[k] = cfg_.beta1 * mo.m[k] + (1.0 - cfg_.beta1) * g[k];
            mo.v[k] = cfg_.beta2 * mo.v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            const double mh = mo.m[k] / c1, vh = mo.v[k] / c2;
            const double v = p[k] - lr * mh / (std::sqrt(vh) + cfg_.eps);
            if (!std::isfinite(v)) throw Error("non-finite parameter after update in " + params[a].name);
            updated[a][k] = v;
        }
    }
    for (size_t a = 0; a < params.size(); ++a) std::copy(updated[a].begin(), updated[a].end(), params[a].data.begin());
    moments_ = std::move(next);
    ++steps_;
}

LossParts pixelLoss(const Model& model, const Lighting& light, std::span<const Camera> cameras,
                    std::span<const Image> targets, std::span<const PixelRef> pixels, const RenderConfig& cfg,
                    double lambdaOrientation, double normalizer, ModelGradient* grad, DecisionLog* log,
                    uint64_t imageSalt) {
    LossParts out;
    const RenderContext ctx(cfg, log);
    const double wColor = 1.0 / (3.0 * normalizer), wOrient = lambdaOrientation / normalizer;
    if (grad) {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        ModelScene<Var> scene(model, light, grad, cfg.kernel);
        for (const PixelRef& px : pixels) {
            tape.clear();
            const PixelResult<Var> r = renderPixel(scene, cameras[px.image], px.x, px.y, ctx, imageSalt + px.image);
            Var color(0.0);
            for (int c = 0; c < 3; ++c) {
                const Var d = r.srgb[c] - static_cast<double>(targets[px.image].at(px.x, px.y, c));
                color = color + d * d;
            }
            const Var loss = color * wColor + r.orientation * wOrient;
            out.photometric += color.value() * wColor;
            out.orientation += r.orientation.value() / normalizer;
            out.total += loss.value();
            if (!loss.isConstant()) tape.backward(loss.node());
        }
    } else {
        ModelScene<double> scene(model, light, nullptr, cfg.kernel);
        for (const PixelRef& px : pixels) {
            const PixelResult<double> r = renderPixel(scene, cameras[px.image], px.x, px.y, ctx, imageSalt + px.image);
            double color = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double d = r.srgb[c] - targets[px.image].at(px.x, px.y, c);
                color += d * d;
            }
            out.photometric += color * wColor;
            out.orientation += r.orientation / normalizer;
            out.total += color * wColor + r.orientation * wOrient;
        }
    }
    return out;
}

void train(Model& model, const SceneDataset& data, const TrainConfig& cfg, const TrainHooks& hooks) {
    if (data.frames.empty()) throw Error("training needs at least one posed image");
    if (cfg.batchSize < 1 || cfg.gradChunks < 1) throw Error("batch size and gradient chunks must be positive");
    cfg.render.validate();
    const Schedule& sched = cfg.schedule;

    std::vector<Camera> cameras;
    std::vector<Image> targets;
    for (size_t i = 0; i < data.frames.size(); ++i) {
        cameras.push_back(data.camera(i));
        targets.push_back(data.frames[i].rgb);
    }
    const uint64_t pixelsPerImage = static_cast<uint64_t>(data.width()) * data.height();
    const uint64_t totalPixels = pixelsPerImage * data.frames.size();

    Adam adam(cfg.adam);
    const int chunks = std::min(cfg.gradChunks, cfg.batchSize);
    std::vector<ModelGradient> grads(chunks, ModelGradient::zerosLike(model));
    std::vector<LossParts> parts(chunks);
    std::vector<PixelRef> batch(cfg.batchSize);
    const int numEvents = static_cast<int>(sched.upsampleSteps.size());

    for (int step = 0; step < sched.totalSteps; ++step) {
        const auto ev = std::find(sched.upsampleSteps.begin(), sched.upsampleSteps.end(), step);
        if (ev != sched.upsampleSteps.end()) {
            const int k = static_cast<int>(ev - sched.upsampleSteps.begin()) + 1;
            const int res = scheduledResolution(cfg.startResolution, cfg.finalResolution, k, numEvents);
            const auto cur = model.grid.resolution();
            if (res > cur[0] || res > cur[1] || res > cur[2]) {
                model.grid = model.grid.upsampled({std::max(res, cur[0]), std::max(res, cur[1]), std::max(res, cur[2])});
                roundToFloat(model.grid.params());
                grads.assign(chunks, ModelGradient::zerosLike(model));
                if (hooks.onUpsample) hooks.onUpsample(step, res);
            }
        }

        for (int b = 0; b < cfg.batchSize; ++b) {
            const auto idx = static_cast<uint64_t>(qmc::hashUniform(cfg.seed, static_cast<uint64_t>(step), b) *
                                                   static_cast<double>(totalPixels));
            const uint64_t clamped = std::min(idx, totalPixels - 1);
            const uint64_t local = clamped % pixelsPerImage;
            batch[b] = {static_cast<int>(clamped / pixelsPerImage), static_cast<int>(local % data.width()),
                        static_cast<int>(local / data.width())};
        }

        RenderConfig rc = cfg.render;
        rc.seed = qmc::mix64(cfg.render.seed ^ qmc::mix64(static_cast<uint64_t>(step) + 1));
        const Lighting light(model.env);
        parallelFor(chunks, cfg.workers, [&](int c) {
            grads[c].setZero();
            const size_t begin = static_cast<size_t>(cfg.batchSize) * c / chunks;
            const size_t end = static_cast<size_t>(cfg.batchSize) * (c + 1) / chunks;
            parts[c] = pixelLoss(model, light, cameras, targets,
                                 std::span<const PixelRef>(batch.data() + begin, end - begin), rc,
                                 cfg.lambdaOrientation, cfg.batchSize, &grads[c]);
        });
        LossParts loss;
        for (int c = 0; c < chunks; ++c) {
            loss.total += parts[c].total;
            loss.photometric += parts[c].photometric;
            loss.orientation += parts[c].orientation;
            if (c > 0) grads[0].add(grads[c]);
        }
        if (!std::isfinite(loss.total)) {
            if (hooks.onDivergence) hooks.onDivergence(model, step);
            throw Error("training diverged at step " + std::to_string(step) + ": loss is not finite");
        }
        grads[0].finish(model);

        const double mult = lrMultiplier(step, sched);
        try {
            adam.step(model.params(), grads[0].params(), mult);
        } catch (const Error& e) {
            if (hooks.onDivergence) hooks.onDivergence(model, step);
            throw Error("training diverged at step " + std::to_string(step) + ": " + e.what());
        }
        roundToFloat(model.params());

        if (hooks.afterStep) {
            StepStats st;
            st.step = step;
            st.loss = loss.total;
            st.photometric = loss.photometric;
            st.orientation = loss.orientation;
            st.psnr = psnrFromMse(loss.photometric);
            st.lrMultiplier = mult;
            st.resolution = model.grid.resolution()[0];
            hooks.afterStep(st, model);
        }
    }
}

}  // namespace nmf
