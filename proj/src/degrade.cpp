#include "ugcsr/degrade.hpp"

#include <algorithm>
#include <stdexcept>

namespace ugcsr {

void DegradationRecipe::validate() const {
    if (blur_sigma_min < 0.0 || blur_sigma_min > blur_sigma_max)
        throw std::invalid_argument("recipe: bad blur sigma range");
    if (noise_sigma_min < 0.0 || noise_sigma_min > noise_sigma_max)
        throw std::invalid_argument("recipe: bad noise sigma range");
    if (jpeg_quality_min < 10 || jpeg_quality_max > 95 || jpeg_quality_min > jpeg_quality_max)
        throw std::invalid_argument("recipe: jpeg quality range must lie in [10,95]");
    if (resize_factor != 1.0 && resize_factor != 4.0)
        throw std::invalid_argument("recipe: resize_factor must be 1 or 4");
}

MixBranch mix_branch(const std::string& image_id, uint64_t seed) {
    Rng rng(hash_combine(seed, "mix:" + image_id));
    return rng.uniform() < 0.5 ? MixBranch::downsample_only : MixBranch::degrade;
}

namespace {
Image apply_chain(Image img, const DegradationRecipe& recipe, uint64_t seed) {
    Rng rng(hash_combine(seed, "degrade"));
    double blur_sigma = rng.uniform(recipe.blur_sigma_min, recipe.blur_sigma_max);
    double noise_sigma = rng.uniform(recipe.noise_sigma_min, recipe.noise_sigma_max);
    int quality = rng.uniform_int(recipe.jpeg_quality_min, recipe.jpeg_quality_max);

    int order[3] = {0, 1, 2};  // blur, noise, jpeg
    if (recipe.op_order == OpOrder::shuffled) {
        for (int i = 2; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
    }
    for (int op : order) {
        switch (op) {
            case 0: img = gaussian_blur(img, blur_sigma); break;
            case 1: img = add_gaussian_noise(img, noise_sigma, rng); break;
            case 2:
                img.clamp01();
                img = jpeg_roundtrip(img, quality);
                break;
        }
    }
    img.clamp01();
    return img;
}
}  // namespace

Image synth_degrade(const Image& hr, const DegradationRecipe& recipe, uint64_t seed) {
    recipe.validate();
    if (hr.empty()) throw std::invalid_argument("synth_degrade: empty image");
    if (recipe.resize_factor != 4.0)
        throw std::invalid_argument("synth_degrade: recipe.resize_factor must be 4");
    if (hr.h % 4 != 0 || hr.w % 4 != 0)
        throw std::invalid_argument("synth_degrade: dimensions must be divisible by 4");
    Image lr = resize_bicubic(hr, hr.h / 4, hr.w / 4);
    return apply_chain(std::move(lr), recipe, seed);
}

Image wild_degrade(const Image& hr, const DegradationRecipe& recipe, uint64_t seed) {
    recipe.validate();
    if (hr.empty()) throw std::invalid_argument("wild_degrade: empty image");
    if (recipe.resize_factor != 1.0)
        throw std::invalid_argument("wild_degrade: recipe.resize_factor must be 1");
    return apply_chain(hr, recipe, seed);
}

}  // namespace ugcsr
