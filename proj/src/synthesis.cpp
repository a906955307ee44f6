// SPDX-License-Identifier: Apache-2.0

#include "ccub/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ccub/digest.hpp"

namespace ccub {

std::string_view to_string(GenerationMode mode) noexcept {
    switch (mode) {
        case GenerationMode::baseline: return "baseline";
        case GenerationMode::finetuned: return "finetuned";
        case GenerationMode::prompt_aug: return "prompt_aug";
        case GenerationMode::combined: return "combined";
    }
    return "unknown";
}

std::optional<GenerationMode> parse_generation_mode(std::string_view s) noexcept {
    for (auto m : kAllModes) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

bool uses_finetuned_denoiser(GenerationMode mode) noexcept {
    return mode == GenerationMode::finetuned || mode == GenerationMode::combined;
}

bool uses_augmented_prompt(GenerationMode mode) noexcept {
    return mode == GenerationMode::prompt_aug || mode == GenerationMode::combined;
}

json metadata_to_json(const ImageMetadata& m) {
    json doc = {
        {"final_prompt", m.final_prompt},
        {"mode", to_string(m.mode)},
        {"seed", m.seed},
        {"denoiser_fingerprint", m.denoiser_fingerprint},
        {"schedule_id", m.schedule_id},
        {"steps", m.steps},
    };
    if (m.guidance_scale) doc["guidance_scale"] = *m.guidance_scale;
    return doc;
}

std::string resolve_prompt(const GenerationRequest& request, Augmentor* augmentor) {
    if (!uses_augmented_prompt(request.mode)) {
        return baseline_prompt(request.given_prompt, request.country);
    }
    if (!augmentor) {
        throw ValidationError(std::string(to_string(request.mode)) + " mode needs an augmentor for " +
                              request.country);
    }
    const auto augmentation =
        augment(request.given_prompt, request.country, *augmentor, request.temperature, request.seed);
    return assemble_prompt(request.given_prompt, augmentation, request.country).final;
}

std::vector<int> sampling_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) {
        throw ValidationError("steps must lie in [1, T], got " + std::to_string(steps) + " for T=" + std::to_string(T));
    }
    if (steps == 1) return {T - 1};
    std::vector<int> ts(static_cast<std::size_t>(steps));
    const long span = steps - 1;
    for (long i = 0; i < steps; ++i) {
        ts[i] = static_cast<int>(((T - 1L) * (span - i) * 2 + span) / (2 * span));
    }
    return ts;
}

Vec denoise(const Vec& z_T, const Vec& c, const Denoiser& denoiser, const NoiseSchedule& schedule, int steps,
            std::uint64_t seed) {
    const auto ts = sampling_timesteps(schedule.T, steps);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec z = z_T;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const int prev = i + 1 < ts.size() ? ts[i + 1] : -1;
        const double ab_t = schedule.alphas_cumprod[t];
        const double ab_prev = prev >= 0 ? schedule.alphas_cumprod[prev] : 1.0;

        const Vec eps_hat = denoiser.predict(z, t, c);
        if (eps_hat.size() != z.size()) throw ValidationError("denoise: denoiser output shape differs from latent");
        const Vec x0 = (z - std::sqrt(1.0 - ab_t) * eps_hat) / std::sqrt(ab_t);

        const double beta = 1.0 - ab_t / ab_prev;
        const double coef_x0 = std::sqrt(ab_prev) * beta / (1.0 - ab_t);
        const double coef_z = std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab_t);
        Vec next = coef_x0 * x0 + coef_z * z;
        if (prev >= 0) {
            const double sigma = std::sqrt((1.0 - ab_prev) / (1.0 - ab_t) * beta);
            for (Eigen::Index j = 0; j < next.size(); ++j) next[j] += sigma * normal(rng);
        }
        if (!next.allFinite()) {
            throw RuntimeFailure("denoise: non-finite latent at timestep " + std::to_string(t));
        }
        z = std::move(next);
    }
    return z;
}

GuidedDenoiser::GuidedDenoiser(std::shared_ptr<const Denoiser> inner, Vec unconditional, double scale)
    : m_inner(std::move(inner)), m_unconditional(std::move(unconditional)), m_scale(scale) {
    if (!m_inner) throw ValidationError("guided denoiser needs an inner denoiser");
    if (!std::isfinite(m_scale) || m_scale < 0) throw ValidationError("guidance scale must be finite and >= 0");
}

json GuidedDenoiser::config() const { return {{"inner", m_inner->kind()}, {"scale", m_scale}}; }

Vec GuidedDenoiser::predict(const Vec& z_t, int t, const Vec& c) const {
    const Vec uncond = m_inner->predict(z_t, t, m_unconditional);
    return uncond + m_scale * (m_inner->predict(z_t, t, c) - uncond);
}

BundleRegistry::BundleRegistry(ModelBundle base, NoiseSchedule schedule)
    : m_base(std::move(base)), m_schedule(std::move(schedule)) {
    m_base.check_compatible();
}

void BundleRegistry::add_finetuned(const std::string& country, ModelBundle bundle) {
    bundle.check_compatible();
    m_finetuned.insert_or_assign(country, std::move(bundle));
}

const ModelBundle& BundleRegistry::resolve(const std::string& country, GenerationMode mode) const {
    if (!uses_finetuned_denoiser(mode)) return m_base;
    auto it = m_finetuned.find(country);
    if (it == m_finetuned.end()) {
        throw ValidationError("no fine-tuned model registered for " + country);
    }
    return it->second;
}

GeneratedImage generate(const GenerationRequest& request, const BundleRegistry& bundles,
                        const AugmentorRegistry& augmentors) {
    if (request.given_prompt.empty()) throw ValidationError("generate: given prompt is empty");
    if (request.pixel_scale < 1) throw ValidationError("generate: pixel_scale must be >= 1");
    const ModelBundle& bundle = bundles.resolve(request.country, request.mode);
    const int dim = request.latent_height * request.latent_width;
    if (request.latent_height < 1 || request.latent_width < 1 || dim != bundle.image_autoencoder->latent_dim()) {
        throw ValidationError("latent shape " + std::to_string(request.latent_height) + "x" +
                              std::to_string(request.latent_width) + " does not match the model latent size " +
                              std::to_string(bundle.image_autoencoder->latent_dim()));
    }

    GeneratedImage out;
    auto augmentor = uses_augmented_prompt(request.mode) ? augmentors.find(request.country) : nullptr;
    out.metadata.final_prompt = resolve_prompt(request, augmentor.get());
    out.metadata.mode = request.mode;
    out.metadata.seed = request.seed;
    out.metadata.denoiser_fingerprint = fingerprint(*bundle.denoiser);
    out.metadata.schedule_id = bundles.schedule().id();
    out.metadata.steps = request.steps;
    out.metadata.guidance_scale = request.guidance_scale;

    const Vec c = bundle.text_encoder->encode(out.metadata.final_prompt);
    std::mt19937_64 rng(mix_seed(request.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec z_T(dim);
    for (int j = 0; j < dim; ++j) z_T[j] = normal(rng);
    std::shared_ptr<const Denoiser> denoiser = bundle.denoiser;
    if (request.guidance_scale) {
        denoiser = std::make_shared<GuidedDenoiser>(bundle.denoiser, bundle.text_encoder->encode(""),
                                                    *request.guidance_scale);
    }
    const Vec z0 = denoise(z_T, c, *denoiser, bundles.schedule(), request.steps, mix_seed(request.seed, 1));
    const auto values = bundle.image_autoencoder->decode(z0);

    const int s = request.pixel_scale;
    auto& img = out.pixels;
    img.width = request.latent_width * s;
    img.height = request.latent_height * s;
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double v = std::clamp(values[static_cast<std::size_t>(y / s) * request.latent_width + x / s], -1.0, 1.0);
            img.pixels[static_cast<std::size_t>(y) * img.width + x] = static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
        }
    }
    return out;
}

std::filesystem::path write_generated(const GeneratedImage& image, const std::filesystem::path& dir,
                                      const std::string& stem) {
    const auto png = dir / (stem + ".png");
    const auto bytes = encode_png(image.pixels);
    write_text_file(png, std::string(bytes.begin(), bytes.end()));
    auto meta = metadata_to_json(image.metadata);
    meta["image_sha256"] = sha256_hex(bytes);
    write_text_file(dir / (stem + ".json"), canonical_dump(meta));
    return png;
}

}  // namespace ccub
