// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccub/augmentation.hpp"
#include "ccub/diffusion.hpp"
#include "ccub/image_io.hpp"

namespace ccub {

enum class GenerationMode { baseline, finetuned, prompt_aug, combined };

inline constexpr GenerationMode kAllModes[] = {
    GenerationMode::baseline, GenerationMode::finetuned, GenerationMode::prompt_aug, GenerationMode::combined,
};

std::string_view to_string(GenerationMode mode) noexcept;
std::optional<GenerationMode> parse_generation_mode(std::string_view s) noexcept;

/// finetuned and combined run the fine-tuned denoiser.
bool uses_finetuned_denoiser(GenerationMode mode) noexcept;
/// prompt_aug and combined run the augmented prompt; the others the suffix prompt.
bool uses_augmented_prompt(GenerationMode mode) noexcept;

struct GenerationRequest {
    std::string given_prompt;
    std::string country;
    GenerationMode mode = GenerationMode::baseline;
    std::uint64_t seed = 0;
    int steps = 50;
    int latent_height = 2;
    int latent_width = 4;
    double temperature = kDefaultTemperature;
    /// Nearest-neighbour upscale applied to the decoded raster.
    int pixel_scale = 16;
    /// Classifier-free guidance scale; unset means no guidance.
    std::optional<double> guidance_scale;
};

struct ImageMetadata {
    std::string final_prompt;
    GenerationMode mode = GenerationMode::baseline;
    std::uint64_t seed = 0;
    std::string denoiser_fingerprint;
    std::string schedule_id;
    int steps = 0;
    std::optional<double> guidance_scale;
};

json metadata_to_json(const ImageMetadata& meta);

struct GeneratedImage {
    GrayImage pixels;
    ImageMetadata metadata;
};

/// Prompt fed to the text encoder for this request. `augmentor` must be
/// non-null for the augmented modes.
std::string resolve_prompt(const GenerationRequest& request, Augmentor* augmentor);

/// `steps` timesteps evenly spaced from T-1 down to 0.
std::vector<int> sampling_timesteps(int T, int steps);

/// Ancestral sampling over the subsampled timesteps. Deterministic in `seed`.
Vec denoise(const Vec& z_T, const Vec& c, const Denoiser& denoiser, const NoiseSchedule& schedule, int steps,
            std::uint64_t seed);

/// Classifier-free guidance around another denoiser:
/// eps = eps(z, t, u) + scale * (eps(z, t, c) - eps(z, t, u)), where u is the
/// unconditional embedding.
class GuidedDenoiser final : public Denoiser {
public:
    GuidedDenoiser(std::shared_ptr<const Denoiser> inner, Vec unconditional, double scale);
    std::string kind() const override { return "guided"; }
    std::span<const double> parameters() const override { return m_inner->parameters(); }
    json config() const override;
    Vec predict(const Vec& z_t, int t, const Vec& c) const override;

private:
    std::shared_ptr<const Denoiser> m_inner;
    Vec m_unconditional;
    double m_scale;
};

/// Base model plus per-country fine-tuned denoisers, all sharing one schedule.
class BundleRegistry {
public:
    BundleRegistry(ModelBundle base, NoiseSchedule schedule);

    void add_finetuned(const std::string& country, ModelBundle bundle);
    const ModelBundle& base() const noexcept { return m_base; }
    const ModelBundle& resolve(const std::string& country, GenerationMode mode) const;
    const NoiseSchedule& schedule() const noexcept { return m_schedule; }

private:
    ModelBundle m_base;
    NoiseSchedule m_schedule;
    std::map<std::string, ModelBundle> m_finetuned;
};

GeneratedImage generate(const GenerationRequest& request, const BundleRegistry& bundles,
                        const AugmentorRegistry& augmentors);

/// Writes `<dir>/<stem>.png` and the metadata sidecar `<dir>/<stem>.json`.
std::filesystem::path write_generated(const GeneratedImage& image, const std::filesystem::path& dir,
                                      const std::string& stem);

}  // namespace ccub
