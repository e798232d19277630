// ugcsr command line: dataset build, training, inference, sweeps, scoring.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ugcsr/config.hpp"
#include "ugcsr/dataset.hpp"
#include "ugcsr/metrics.hpp"
#include "ugcsr/sampler.hpp"
#include "ugcsr/sweep.hpp"
#include "ugcsr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ugcsr;

namespace {

constexpr const char* kCodeVersion = "ugcsr-1.0";

RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) {
        RunConfig cfg;
        cfg.sampler = preset_by_name(cfg.sampler_preset);
        cfg.validate();
        return cfg;
    }
    return load_run_config(path);
}

void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const RunConfig& cfg, const json& extra) {
    fs::create_directories(out_dir);
    json m;
    m["command"] = command;
    m["code_version"] = kCodeVersion;
    m["config"] = json::parse(run_config_json(cfg));
    m["details"] = extra;
    std::ofstream f(out_dir + "/run_manifest.json");
    f << m.dump(2) << "\n";
}

std::vector<std::string> list_images(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
            out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct BuiltModels {
    Autoencoder vae;
    Denoiser den;
    SemanticExtractor ext;

    explicit BuiltModels(const RunConfig& cfg)
        : vae(cfg.autoencoder), den(cfg.denoiser), ext(cfg.extractor) {}
    SamplerModels sampler_models() { return {&vae, &den, &ext}; }
    TrainModels train_models() { return {&vae, &den, &ext}; }
};

std::vector<std::pair<Image, Image>> load_pairs(const std::string& manifest_path) {
    DatasetManifest m = load_manifest(manifest_path);
    std::string base = fs::path(manifest_path).parent_path().string();
    std::vector<std::pair<Image, Image>> pairs;
    for (const PatchRecord& r : m.records)
        pairs.emplace_back(load_image(base + "/" + r.hr_path), load_image(base + "/" + r.lr_path));
    return pairs;
}

int cmd_build_dataset(const std::string& config_path, const std::string& lsdir,
                      const std::string& ugc_pairs, const std::string& ugc_hr,
                      const std::string& out) {
    RunConfig cfg = load_config_or_default(config_path);
    DatasetManifest m = assemble_training_set(lsdir, ugc_pairs, ugc_hr, cfg.dataset, out);
    json extra;
    extra["component_counts"] = m.component_counts;
    extra["records"] = m.records.size();
    write_run_manifest(out, "build-dataset", cfg, extra);
    std::cout << "built " << m.records.size() << " patch pairs in " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& out, const std::string& resume) {
    RunConfig cfg = load_config_or_default(config_path);
    BuiltModels models(cfg);
    auto pairs = load_pairs(manifest_path);
    std::vector<Image> hr_images;
    for (const auto& [hr, lr] : pairs) hr_images.push_back(hr);
    if (resume.empty())
        pretrain_autoencoder(models.vae, hr_images, cfg.optimizer.vae_steps,
                             cfg.optimizer.vae_lr, cfg.optimizer.seed);
    NoiseSchedule sched = cfg.schedule.build();
    TrainStats stats =
        train_denoiser(models.train_models(), pairs, sched, cfg.optimizer, out, resume);
    json extra;
    extra["start_step"] = stats.start_step;
    extra["end_step"] = stats.end_step;
    extra["lead_mean_loss"] = stats.lead_mean;
    extra["trail_mean_loss"] = stats.trail_mean;
    write_run_manifest(out, "train", cfg, extra);
    std::cout << "trained to step " << stats.end_step << "; loss " << stats.lead_mean << " -> "
              << stats.trail_mean << "\n";
    return 0;
}

int cmd_infer(const std::string& config_path, const std::string& checkpoint,
              const std::string& in_dir, const std::string& preset, uint64_t seed,
              bool seed_given, const std::string& out) {
    RunConfig cfg = load_config_or_default(config_path);
    if (!preset.empty()) {
        cfg.sampler_preset = preset;
        cfg.sampler = preset_by_name(preset);
    }
    if (seed_given) cfg.sampler.seed = seed;
    BuiltModels models(cfg);
    if (!checkpoint.empty()) load_models(checkpoint, models.train_models());
    NoiseSchedule sched = cfg.schedule.build();
    fs::create_directories(out);
    json per_image = json::object();
    size_t done = 0;
    for (const std::string& path : list_images(in_dir)) {
        std::string name = fs::path(path).stem().string();
        Image lr;
        try {
            lr = load_image(path);
        } catch (const std::exception& e) {
            std::cerr << "skipping unreadable " << path << ": " << e.what() << "\n";
            continue;
        }
        SamplerConfig img_cfg = cfg.sampler;
        img_cfg.seed = hash_combine(cfg.sampler.seed, name);
        Image sr = sample(img_cfg, lr, models.sampler_models(), sched);
        save_png(sr, out + "/" + name + ".png");
        json rec;
        rec["preset"] = cfg.sampler_preset;
        rec["seed"] = img_cfg.seed;
        rec["guidance_scale"] = img_cfg.guidance_scale;
        rec["start_point"] = img_cfg.start_point == StartPoint::noise ? "noise" : "lr";
        rec["num_steps"] = img_cfg.num_steps;
        rec["positive_prompt"] = img_cfg.positive_prompt;
        rec["negative_prompt"] = img_cfg.negative_prompt;
        per_image[name] = rec;
        ++done;
    }
    write_run_manifest(out, "infer", cfg, {{"images", per_image}});
    std::cout << "wrote " << done << " SR images to " << out << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& checkpoint,
              const std::string& in_dir, const std::string& grid_path,
              const std::string& inject, size_t workers, const std::string& preset,
              const std::string& out) {
    RunConfig cfg = load_config_or_default(config_path);
    if (!preset.empty()) {
        cfg.sampler_preset = preset;
        cfg.sampler = preset_by_name(preset);
    }
    BuiltModels models(cfg);
    if (!checkpoint.empty()) load_models(checkpoint, models.train_models());
    NoiseSchedule sched = cfg.schedule.build();
    SweepGrid grid = load_sweep_grid(grid_path);
    std::vector<std::pair<std::string, Image>> images;
    if (inject.empty())
        for (const std::string& path : list_images(in_dir))
            images.emplace_back(fs::path(path).stem().string(), load_image(path));
    StubNrIqa stub;
    SweepResult result = run_sweep(grid, cfg.sampler, images, models.sampler_models(), sched,
                                   &stub, inject, workers);
    fs::create_directories(out);
    write_sweep_csv(out + "/sweep.csv", result);
    write_sweep_plots(out, grid, result);
    json extra;
    extra["grid_points"] = result.points.size();
    extra["replay"] = !inject.empty();
    write_run_manifest(out, "sweep", cfg, extra);
    size_t failed = 0;
    for (const auto& p : result.points) failed += p.failed ? 1 : 0;
    std::cout << "swept " << result.points.size() << " grid points (" << failed
              << " failed) into " << out << "\n";
    return 0;
}

int cmd_score(const std::string& config_path, const std::string& sr_dir,
              const std::string& ref_dir, const std::string& inject, const std::string& out) {
    RunConfig cfg = load_config_or_default(config_path);
    SemanticExtractor extractor(cfg.extractor);
    std::unique_ptr<InjectedMetrics> injected;
    if (!inject.empty()) injected = std::make_unique<InjectedMetrics>(inject);
    std::vector<MetricReport> reports;
    for (const std::string& path : list_images(sr_dir)) {
        std::string name = fs::path(path).stem().string();
        MetricReport r;
        r.image_id = name;
        Image sr = load_image(path);
        if (!ref_dir.empty()) {
            fs::path ref = fs::path(ref_dir) / fs::path(path).filename();
            if (!fs::exists(ref)) {
                std::cerr << "no reference for " << name << ", skipped\n";
                continue;
            }
            Image rimg = load_image(ref.string());
            r.psnr = psnr(sr, rimg);
            r.ssim = ssim(sr, rimg);
            r.lpips = perceptual_distance(sr, rimg, extractor);
        }
        if (injected) {
            if (auto inj = injected->lookup(name)) {
                if (inj->psnr) r.psnr = inj->psnr;
                if (inj->ssim) r.ssim = inj->ssim;
                if (inj->lpips) r.lpips = inj->lpips;
                r.musiq = inj->musiq;
                r.maniqa = inj->maniqa;
                r.clipiqa = inj->clipiqa;
                r.nrqm = inj->nrqm;
                r.hyperiqa = inj->hyperiqa;
                r.source = MetricReport::Source::injected;
            }
        }
        reports.push_back(std::move(r));
    }
    ScoreCard card = aggregate(reports);
    fs::create_directories(out);
    write_metric_csv(out + "/scores.csv", card);
    write_run_manifest(out, "score", cfg,
                       {{"rows", card.rows.size()},
                        {"psnr_inf_excluded", card.psnr_inf_excluded}});
    std::cout << "scored " << card.rows.size() << " images into " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semantic-guided latent-diffusion super-resolution toolkit"};
    app.require_subcommand(1);

    std::string config, out, lsdir, ugc_pairs, ugc_hr, manifest, resume, checkpoint, in_dir,
        preset, grid, inject, sr_dir, ref_dir;
    uint64_t seed = 0;
    size_t workers = 1;

    auto* build = app.add_subcommand("build-dataset", "assemble the mixed training patch set");
    build->add_option("--config", config);
    build->add_option("--lsdir", lsdir, "HR image dir, 50/50 downsample-vs-degrade mixing");
    build->add_option("--ugc-pairs", ugc_pairs, "dir with HR/ and LR/ subdirectories");
    build->add_option("--ugc-hr", ugc_hr, "HR image dir degraded at native scale");
    build->add_option("--out", out)->required();

    auto* train = app.add_subcommand("train", "train the conditioning pathway");
    train->add_option("--config", config);
    train->add_option("--manifest", manifest, "dataset manifest path")->required();
    train->add_option("--resume", resume, "checkpoint to continue from");
    train->add_option("--out", out)->required();

    auto* infer = app.add_subcommand("infer", "4x super-resolve a directory of images");
    infer->add_option("--config", config);
    infer->add_option("--checkpoint", checkpoint);
    infer->add_option("--in", in_dir)->required();
    infer->add_option("--preset", preset)->check(CLI::IsMember({"synthetic", "wild"}));
    auto* seed_opt = infer->add_option("--seed", seed);
    infer->add_option("--out", out)->required();

    auto* sweep = app.add_subcommand("sweep", "grid-evaluate sampler hyperparameters");
    sweep->add_option("--config", config);
    sweep->add_option("--checkpoint", checkpoint);
    sweep->add_option("--in", in_dir);
    sweep->add_option("--grid", grid)->required();
    sweep->add_option("--inject-metrics", inject, "replay dir of <point>.csv metric files");
    sweep->add_option("--workers", workers);
    sweep->add_option("--preset", preset)->check(CLI::IsMember({"synthetic", "wild"}));
    sweep->add_option("--out", out)->required();

    auto* score = app.add_subcommand("score", "metric + challenge-score a result directory");
    score->add_option("--config", config);
    score->add_option("--sr", sr_dir)->required();
    score->add_option("--ref", ref_dir, "reference dir for full-reference metrics");
    score->add_option("--inject-metrics", inject, "metric CSV overriding computed values");
    score->add_option("--out", out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) return cmd_build_dataset(config, lsdir, ugc_pairs, ugc_hr, out);
        if (train->parsed()) return cmd_train(config, manifest, out, resume);
        if (infer->parsed())
            return cmd_infer(config, checkpoint, in_dir, preset, seed, seed_opt->count() > 0,
                             out);
        if (sweep->parsed())
            return cmd_sweep(config, checkpoint, in_dir, grid, inject, workers, preset, out);
        if (score->parsed()) return cmd_score(config, sr_dir, ref_dir, inject, out);
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 1;
}
