// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#include <nmf/commands.h>

#include <nmf/checkpoint.h>
#include <nmf/dataset.h>
#include <nmf/image_io.h>
#include <nmf/log.h>
#include <nmf/metrics.h>
#include <nmf/optim.h>
#include <nmf/parallel.h>
#include <nmf/synthetic.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace nmf {

namespace fs = std::filesystem;

namespace {

void requireKey(const std::string& value, const char* key) {
    if (value.empty()) throw Error(std::string("missing required config key ") + key);
}

std::string padded(int v, int width = 6) {
    std::ostringstream s;
    s << std::setw(width) << std::setfill('0') << v;
    return s.str();
}

Image grayFromOpacity(const Image& op) {
    Image out(op.width, op.height, 3);
    for (int y = 0; y < op.height; ++y)
        for (int x = 0; x < op.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = std::clamp(op.at(x, y, 0), 0.0f, 1.0f);
    return out;
}

RenderOutput renderView(const Model& model, const Camera& cam, const RenderConfig& rc, int workers, uint64_t view) {
    const Lighting light(model.env);
    const ModelScene<double> scene(model, light, nullptr, rc.kernel);
    return renderImage(scene, cam, rc, workers, view);
}

void writeView(const fs::path& dir, int i, const RenderOutput& out) {
    const std::string stem = "r_" + std::to_string(i);
    writePng((dir / (stem + ".png")).string(), out.srgb);
    writePfm((dir / (stem + ".pfm")).string(), out.linear);
    writePng((dir / (stem + "_normal.png")).string(), encodeNormals(out.normal));
    writePng((dir / (stem + "_opacity.png")).string(), grayFromOpacity(out.opacity));
}

void renderSplit(const Model& model, const RunConfig& cfg, const std::string& out) {
    requireKey(cfg.dataPath, "data.path");
    const SceneDataset data = loadScene(cfg.dataPath, cfg.testSplit);
    fs::create_directories(out);
    const int workers = workerCount();
    for (size_t i = 0; i < data.frames.size(); ++i) {
        writeView(out, static_cast<int>(i), renderView(model, data.camera(i), cfg.render, workers, i));
        logInfo("rendered view " + std::to_string(i + 1) + "/" + std::to_string(data.frames.size()));
    }
}

Model loadModel(const RunConfig& cfg) {
    requireKey(cfg.checkpoint, "io.checkpoint");
    return loadCheckpoint(cfg.checkpoint);
}

}  // namespace

void runTrain(const RunConfig& cfg, const std::string& out) {
    requireKey(cfg.dataPath, "data.path");
    const SceneDataset data = loadScene(cfg.dataPath, cfg.trainSplit);
    fs::create_directories(out);
    const fs::path dir(out);

    Model model = Model::create(cfg.model, cfg.modelSeed);
    std::ofstream log(dir / "train_log.csv");
    if (!log) throw Error("cannot write " + (dir / "train_log.csv").string());
    log << "step,loss,psnr,lr_multiplier\n";
    log << std::setprecision(9);

    const int view = std::min<int>(cfg.snapshotView, static_cast<int>(data.frames.size()) - 1);
    const int workers = cfg.train.workers;
    TrainHooks hooks;
    hooks.afterStep = [&](const StepStats& st, const Model& m) {
        log << st.step << ',' << st.loss << ',' << st.psnr << ',' << st.lrMultiplier << '\n';
        const int done = st.step + 1;
        if (cfg.snapshotEvery > 0 && done % cfg.snapshotEvery == 0) {
            fs::create_directories(dir / "snapshots");
            const RenderOutput r = renderView(m, data.camera(view), cfg.render, workers, view);
            writePng((dir / "snapshots" / ("step_" + padded(done) + ".png")).string(), r.srgb);
        }
        if (cfg.checkpointEvery > 0 && done % cfg.checkpointEvery == 0) {
            fs::create_directories(dir / "checkpoints");
            Model copy = m;
            saveCheckpoint((dir / "checkpoints" / ("step_" + padded(done) + ".nmf")).string(), copy, done);
        }
        if (done % 50 == 0 || done == cfg.train.schedule.totalSteps)
            logInfo("step " + std::to_string(done) + "/" + std::to_string(cfg.train.schedule.totalSteps) +
                    " loss " + std::to_string(st.loss) + " res " + std::to_string(st.resolution));
    };
    hooks.onUpsample = [](int step, int res) {
        logInfo("upsampled grid to " + std::to_string(res) + " at step " + std::to_string(step));
    };
    hooks.onDivergence = [&](const Model& m, int step) {
        Model copy = m;
        saveCheckpoint((dir / "last_finite.nmf").string(), copy, step);
        log.flush();
    };
    train(model, data, cfg.train, hooks);
    log.flush();
    saveCheckpoint((dir / "model.nmf").string(), model, cfg.train.schedule.totalSteps);
    writePfm((dir / "env.pfm").string(), environmentToImage(model.env));
}

void runRender(const RunConfig& cfg, const std::string& out) { renderSplit(loadModel(cfg), cfg, out); }

void runRelight(const RunConfig& cfg, const std::string& out) {
    requireKey(cfg.relightEnv, "relight.env");
    Model model = loadModel(cfg);
    const Image img = readPfm(cfg.relightEnv);
    // A PFM holding the model's own environment (as exported by train) keeps
    // the exact stored values, so relighting with it reproduces render bitwise.
    const Image own = environmentToImage(model.env);
    EnvironmentMap env = own.width == img.width && own.height == img.height && own.data == img.data
                             ? model.env
                             : environmentFromImage(img);
    const int columns = static_cast<int>(std::lround(cfg.relightRotateDegrees / 360.0 * env.width()));
    if (columns != 0) env = env.rotatedColumns(columns);
    model.env = env;
    renderSplit(model, cfg, out);
}

void runEval(const RunConfig& cfg, const std::string& out) {
    requireKey(cfg.dataPath, "data.path");
    const Model model = loadModel(cfg);
    const SceneDataset data = loadScene(cfg.dataPath, cfg.testSplit);
    fs::create_directories(out);
    const fs::path dir(out);
    const int workers = workerCount();

    std::ofstream csv(dir / "metrics.csv");
    if (!csv) throw Error("cannot write " + (dir / "metrics.csv").string());
    csv << std::setprecision(9) << "view,psnr,ssim,mae_normals\n";
    double sumPsnr = 0.0, sumSsim = 0.0, sumMae = 0.0;
    int maeCount = 0;
    for (size_t i = 0; i < data.frames.size(); ++i) {
        const Frame& f = data.frames[i];
        const RenderOutput r = renderView(model, data.camera(i), cfg.render, workers, i);
        writeView(dir, static_cast<int>(i), r);
        const double p = psnr(r.srgb, f.rgb), s = ssim(r.srgb, f.rgb);
        sumPsnr += p;
        sumSsim += s;
        csv << i << ',' << p << ',' << s << ',';
        if (f.normals && f.opacity) {
            const double mae = maeNormals(r.normal, *f.normals, *f.opacity, &r.opacity);
            sumMae += mae;
            ++maeCount;
            csv << mae;
        } else {
            csv << "nan";
        }
        csv << '\n';
    }
    const double n = static_cast<double>(data.frames.size());
    csv << "mean," << sumPsnr / n << ',' << sumSsim / n << ',';
    if (maeCount > 0)
        csv << sumMae / maeCount;
    else
        csv << "nan";
    csv << '\n';

    std::ofstream txt(dir / "metrics.txt");
    txt << std::setprecision(9) << "psnr=" << sumPsnr / n << "\nssim=" << sumSsim / n << '\n';
    if (maeCount > 0) txt << "mae_normals_degrees=" << sumMae / maeCount << '\n';
    txt << "views=" << data.frames.size() << '\n';
    logInfo("psnr " + std::to_string(sumPsnr / n) + " ssim " + std::to_string(sumSsim / n));
}

void runMakeSynthetic(const RunConfig& cfg, const std::string& out) {
    writeSyntheticDataset(out, cfg.synthetic, workerCount());
}

}  // namespace nmf
