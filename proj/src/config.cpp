#include "ugcsr/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace ugcsr {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& block) {
    if (!j.is_object()) throw std::invalid_argument("config: " + block + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key \"" + key + "\" in " + block);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_recipe(const json& j, const std::string& block, DegradationRecipe& r) {
    check_keys(j,
               {"blur_sigma_min", "blur_sigma_max", "noise_sigma_min", "noise_sigma_max",
                "jpeg_quality_min", "jpeg_quality_max", "resize_factor", "op_order", "seed"},
               block);
    read(j, "blur_sigma_min", r.blur_sigma_min);
    read(j, "blur_sigma_max", r.blur_sigma_max);
    read(j, "noise_sigma_min", r.noise_sigma_min);
    read(j, "noise_sigma_max", r.noise_sigma_max);
    read(j, "jpeg_quality_min", r.jpeg_quality_min);
    read(j, "jpeg_quality_max", r.jpeg_quality_max);
    read(j, "resize_factor", r.resize_factor);
    read(j, "seed", r.seed);
    if (j.contains("op_order")) {
        std::string s = j.at("op_order").get<std::string>();
        if (s == "fixed") r.op_order = OpOrder::fixed;
        else if (s == "shuffled") r.op_order = OpOrder::shuffled;
        else throw std::invalid_argument("config: bad op_order \"" + s + "\"");
    }
}

json recipe_json(const DegradationRecipe& r) {
    return {{"blur_sigma_min", r.blur_sigma_min},
            {"blur_sigma_max", r.blur_sigma_max},
            {"noise_sigma_min", r.noise_sigma_min},
            {"noise_sigma_max", r.noise_sigma_max},
            {"jpeg_quality_min", r.jpeg_quality_min},
            {"jpeg_quality_max", r.jpeg_quality_max},
            {"resize_factor", r.resize_factor},
            {"op_order", r.op_order == OpOrder::fixed ? "fixed" : "shuffled"},
            {"seed", r.seed}};
}

StartPoint start_point_from_string(const std::string& s) {
    if (s == "noise") return StartPoint::noise;
    if (s == "lr") return StartPoint::lr;
    throw std::invalid_argument("config: bad start_point \"" + s + "\"");
}

}  // namespace

void RunConfig::validate() const {
    dataset.synth_recipe.validate();
    dataset.wild_recipe.validate();
    autoencoder.validate();
    denoiser.validate();
    extractor.validate();
    if (denoiser.semantic_dim != extractor.embed_dim)
        throw std::invalid_argument(
            "config: denoiser semantic_dim must equal extractor embed_dim");
    sampler.validate(schedule.build());
    if (optimizer.steps < 1 || optimizer.vae_steps < 1)
        throw std::invalid_argument("config: optimizer step counts must be >= 1");
    if (optimizer.lr <= 0.0 || optimizer.vae_lr <= 0.0)
        throw std::invalid_argument("config: learning rates must be > 0");
}

RunConfig parse_run_config(const std::string& json_text) {
    json j = json::parse(json_text);
    check_keys(j,
               {"seed", "schedule", "dataset", "autoencoder", "denoiser", "extractor",
                "sampler", "optimizer"},
               "run config");
    RunConfig cfg;
    read(j, "seed", cfg.seed);
    if (j.contains("schedule")) {
        const json& b = j.at("schedule");
        check_keys(b, {"T", "beta_start", "beta_end"}, "schedule");
        read(b, "T", cfg.schedule.T);
        read(b, "beta_start", cfg.schedule.beta_start);
        read(b, "beta_end", cfg.schedule.beta_end);
    }
    if (j.contains("dataset")) {
        const json& b = j.at("dataset");
        check_keys(b, {"synthetic_recipe", "wild_recipe", "patch", "stride", "seed"}, "dataset");
        if (b.contains("synthetic_recipe"))
            parse_recipe(b.at("synthetic_recipe"), "dataset.synthetic_recipe",
                         cfg.dataset.synth_recipe);
        if (b.contains("wild_recipe"))
            parse_recipe(b.at("wild_recipe"), "dataset.wild_recipe", cfg.dataset.wild_recipe);
        read(b, "patch", cfg.dataset.patch);
        read(b, "stride", cfg.dataset.stride);
        read(b, "seed", cfg.dataset.global_seed);
    }
    if (j.contains("autoencoder")) {
        const json& b = j.at("autoencoder");
        check_keys(b, {"downscale_factor", "latent_channels", "base_width", "kl_weight", "seed"},
                   "autoencoder");
        read(b, "downscale_factor", cfg.autoencoder.downscale_factor);
        read(b, "latent_channels", cfg.autoencoder.latent_channels);
        read(b, "base_width", cfg.autoencoder.base_width);
        read(b, "kl_weight", cfg.autoencoder.kl_weight);
        read(b, "seed", cfg.autoencoder.seed);
    }
    if (j.contains("denoiser")) {
        const json& b = j.at("denoiser");
        check_keys(b,
                   {"latent_channels", "widths", "attention_levels", "prompt_dim",
                    "semantic_dim", "temb_dim", "control_branch", "seed"},
                   "denoiser");
        read(b, "latent_channels", cfg.denoiser.latent_channels);
        read(b, "widths", cfg.denoiser.widths);
        read(b, "attention_levels", cfg.denoiser.attention_levels);
        read(b, "prompt_dim", cfg.denoiser.prompt_dim);
        read(b, "semantic_dim", cfg.denoiser.semantic_dim);
        read(b, "temb_dim", cfg.denoiser.temb_dim);
        read(b, "control_branch", cfg.denoiser.control_branch);
        read(b, "seed", cfg.denoiser.seed);
    }
    if (j.contains("extractor")) {
        const json& b = j.at("extractor");
        check_keys(b,
                   {"stage_depths", "stage_widths", "patchify_stride", "embed_dim", "window",
                    "seed"},
                   "extractor");
        if (b.contains("stage_depths")) {
            auto v = b.at("stage_depths").get<std::vector<size_t>>();
            if (v.size() != 4) throw std::invalid_argument("config: stage_depths needs 4 values");
            std::copy(v.begin(), v.end(), cfg.extractor.stage_depths.begin());
        }
        if (b.contains("stage_widths")) {
            auto v = b.at("stage_widths").get<std::vector<size_t>>();
            if (v.size() != 4) throw std::invalid_argument("config: stage_widths needs 4 values");
            std::copy(v.begin(), v.end(), cfg.extractor.stage_widths.begin());
        }
        read(b, "patchify_stride", cfg.extractor.patchify_stride);
        read(b, "embed_dim", cfg.extractor.embed_dim);
        read(b, "window", cfg.extractor.window);
        read(b, "seed", cfg.extractor.seed);
    }
    if (j.contains("sampler")) {
        const json& b = j.at("sampler");
        check_keys(b,
                   {"preset", "start_point", "guidance_scale", "num_steps", "positive_prompt",
                    "negative_prompt", "seed", "start_timestep", "max_lr_pixels"},
                   "sampler");
        read(b, "preset", cfg.sampler_preset);
        cfg.sampler = preset_by_name(cfg.sampler_preset);
        if (b.contains("start_point"))
            cfg.sampler.start_point = start_point_from_string(b.at("start_point"));
        read(b, "guidance_scale", cfg.sampler.guidance_scale);
        read(b, "num_steps", cfg.sampler.num_steps);
        read(b, "positive_prompt", cfg.sampler.positive_prompt);
        read(b, "negative_prompt", cfg.sampler.negative_prompt);
        read(b, "seed", cfg.sampler.seed);
        read(b, "start_timestep", cfg.sampler.start_timestep);
        read(b, "max_lr_pixels", cfg.sampler.max_lr_pixels);
    } else {
        cfg.sampler = preset_by_name(cfg.sampler_preset);
    }
    if (j.contains("optimizer")) {
        const json& b = j.at("optimizer");
        check_keys(b, {"steps", "lr", "vae_steps", "vae_lr", "seed"}, "optimizer");
        read(b, "steps", cfg.optimizer.steps);
        read(b, "lr", cfg.optimizer.lr);
        read(b, "vae_steps", cfg.optimizer.vae_steps);
        read(b, "vae_lr", cfg.optimizer.vae_lr);
        read(b, "seed", cfg.optimizer.seed);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string run_config_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["schedule"] = {{"T", cfg.schedule.T},
                     {"beta_start", cfg.schedule.beta_start},
                     {"beta_end", cfg.schedule.beta_end}};
    j["dataset"] = {{"synthetic_recipe", recipe_json(cfg.dataset.synth_recipe)},
                    {"wild_recipe", recipe_json(cfg.dataset.wild_recipe)},
                    {"patch", cfg.dataset.patch},
                    {"stride", cfg.dataset.stride},
                    {"seed", cfg.dataset.global_seed}};
    j["autoencoder"] = {{"downscale_factor", cfg.autoencoder.downscale_factor},
                        {"latent_channels", cfg.autoencoder.latent_channels},
                        {"base_width", cfg.autoencoder.base_width},
                        {"kl_weight", cfg.autoencoder.kl_weight},
                        {"seed", cfg.autoencoder.seed}};
    j["denoiser"] = {{"latent_channels", cfg.denoiser.latent_channels},
                     {"widths", cfg.denoiser.widths},
                     {"attention_levels", cfg.denoiser.attention_levels},
                     {"prompt_dim", cfg.denoiser.prompt_dim},
                     {"semantic_dim", cfg.denoiser.semantic_dim},
                     {"temb_dim", cfg.denoiser.temb_dim},
                     {"control_branch", cfg.denoiser.control_branch},
                     {"seed", cfg.denoiser.seed}};
    j["extractor"] = {
        {"stage_depths",
         std::vector<size_t>(cfg.extractor.stage_depths.begin(), cfg.extractor.stage_depths.end())},
        {"stage_widths",
         std::vector<size_t>(cfg.extractor.stage_widths.begin(), cfg.extractor.stage_widths.end())},
        {"patchify_stride", cfg.extractor.patchify_stride},
        {"embed_dim", cfg.extractor.embed_dim},
        {"window", cfg.extractor.window},
        {"seed", cfg.extractor.seed}};
    j["sampler"] = {
        {"preset", cfg.sampler_preset},
        {"start_point", cfg.sampler.start_point == StartPoint::noise ? "noise" : "lr"},
        {"guidance_scale", cfg.sampler.guidance_scale},
        {"num_steps", cfg.sampler.num_steps},
        {"positive_prompt", cfg.sampler.positive_prompt},
        {"negative_prompt", cfg.sampler.negative_prompt},
        {"seed", cfg.sampler.seed},
        {"start_timestep", cfg.sampler.start_timestep},
        {"max_lr_pixels", cfg.sampler.max_lr_pixels}};
    j["optimizer"] = {{"steps", cfg.optimizer.steps},
                      {"lr", cfg.optimizer.lr},
                      {"vae_steps", cfg.optimizer.vae_steps},
                      {"vae_lr", cfg.optimizer.vae_lr},
                      {"seed", cfg.optimizer.seed}};
    return j.dump(2);
}

}  // namespace ugcsr
