// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ccub/dataset.hpp"
#include "ccub/io.hpp"

namespace ccub {

using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Forward process

/// Discrete noise schedule. `alphas_cumprod[t]` is the product of (1 - beta)
/// over steps 0..t.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas_cumprod;

    /// Short content id, stable across runs (used in image metadata).
    std::string id() const;
};

/// Linear beta ramp from beta_start to beta_end over T steps.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);
NoiseSchedule schedule_from_betas(std::vector<double> betas);

/// sqrt(alpha_bar) * z0 + sqrt(1 - alpha_bar) * eps
Vec add_noise(const Vec& z0, int t, const Vec& eps, const NoiseSchedule& schedule);
Vec add_noise_at(const Vec& z0, double alpha_bar, const Vec& eps);

// ---------------------------------------------------------------------------
// Model components

/// Anything with parameters in a canonical order.
class Component {
public:
    virtual ~Component() = default;
    virtual std::string kind() const = 0;
    virtual std::span<const double> parameters() const = 0;
    virtual json config() const = 0;
};

/// SHA-256 over the kind tag, parameter count and raw little-endian parameter
/// bytes. Equal iff the parameters are bit-equal.
std::string fingerprint(const Component& component);

class TextEncoder : public Component {
public:
    virtual int dim() const = 0;
    virtual Vec encode(const std::string& text) const = 0;
};

class ImageAutoencoder : public Component {
public:
    virtual int latent_dim() const = 0;
    virtual Vec encode(const std::vector<double>& pixels) const = 0;
    virtual std::vector<double> decode(const Vec& latent) const = 0;
};

/// Noise estimator eps_theta(z_t, t, c).
class Denoiser : public Component {
public:
    virtual Vec predict(const Vec& z_t, int t, const Vec& c) const = 0;
};

class TrainableDenoiser : public Denoiser {
public:
    virtual std::span<double> mutable_parameters() = 0;
    /// Adds d(upstream . predict(z_t, t, c)) / d(theta) into `grad`.
    virtual void backprop(const Vec& z_t, int t, const Vec& c, const Vec& upstream, std::span<double> grad) const = 0;
    virtual std::unique_ptr<TrainableDenoiser> clone() const = 0;
};

/// Hashed bag-of-words: each lowercase word falls in one of `buckets`
/// rows of a fixed random projection; the encoding is the mean row.
class BagOfWordsEncoder final : public TextEncoder {
public:
    BagOfWordsEncoder(int buckets, int dim, std::uint64_t seed);
    BagOfWordsEncoder(int buckets, int dim, std::vector<double> projection);

    std::string kind() const override { return "bag_of_words"; }
    std::span<const double> parameters() const override { return m_projection; }
    json config() const override;
    int dim() const override { return m_dim; }
    Vec encode(const std::string& text) const override;

private:
    int m_buckets;
    int m_dim;
    std::vector<double> m_projection;  // buckets x dim, row-major
};

/// Per-channel scale: encode multiplies, decode divides. With unit scales
/// this is the identity.
class ScaleAutoencoder final : public ImageAutoencoder {
public:
    explicit ScaleAutoencoder(int dim);
    explicit ScaleAutoencoder(std::vector<double> scales);

    std::string kind() const override { return "scale_autoencoder"; }
    std::span<const double> parameters() const override { return m_scales; }
    json config() const override;
    int latent_dim() const override { return static_cast<int>(m_scales.size()); }
    Vec encode(const std::vector<double>& pixels) const override;
    std::vector<double> decode(const Vec& latent) const override;

private:
    std::vector<double> m_scales;
};

struct MlpShape {
    int latent_dim = 8;
    int cond_dim = 8;
    int hidden = 32;
    int time_features = 8;
    int T = 1000;

    int input_dim() const { return latent_dim + cond_dim + time_features; }
    std::size_t parameter_count() const;
    bool operator==(const MlpShape&) const = default;
};

/// Two-layer perceptron: out = W2 tanh(W1 [z_t; c; phi(t)] + b1) + b2, where
/// phi(t) is a sinusoidal embedding of t / T.
class MlpDenoiser final : public TrainableDenoiser {
public:
    MlpDenoiser(const MlpShape& shape, std::uint64_t seed);
    MlpDenoiser(const MlpShape& shape, std::vector<double> parameters);

    std::string kind() const override { return "mlp_denoiser"; }
    std::span<const double> parameters() const override { return m_params; }
    std::span<double> mutable_parameters() override { return m_params; }
    json config() const override;
    Vec predict(const Vec& z_t, int t, const Vec& c) const override;
    void backprop(const Vec& z_t, int t, const Vec& c, const Vec& upstream, std::span<double> grad) const override;
    std::unique_ptr<TrainableDenoiser> clone() const override;

    const MlpShape& shape() const noexcept { return m_shape; }
    Vec time_embedding(int t) const;

private:
    Vec input(const Vec& z_t, int t, const Vec& c) const;

    MlpShape m_shape;
    std::vector<double> m_params;  // W1 | b1 | W2 | b2, matrices column-major
};

/// Frozen text encoder and autoencoder around one denoiser.
struct ModelBundle {
    std::shared_ptr<const TextEncoder> text_encoder;
    std::shared_ptr<Denoiser> denoiser;
    std::shared_ptr<const ImageAutoencoder> image_autoencoder;

    void check_compatible() const;
};

struct ToyBundleOptions {
    int latent_dim = 8;
    int cond_dim = 8;
    int hidden = 32;
    int time_features = 8;
    int vocab_buckets = 256;
    int T = 100;
};

/// Small deterministic bundle for tests and offline runs.
ModelBundle make_toy_bundle(const ToyBundleOptions& options, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Objective

/// Timesteps and noise for one batch. Draw order from mt19937_64(seed): for
/// each example, t ~ U{0..T-1}, then `dim` standard normals.
struct NoiseDraw {
    std::vector<int> t;
    std::vector<Vec> eps;
};

NoiseDraw draw_noise(std::size_t batch, int dim, int T, std::uint64_t seed);

/// Mean over the batch of ||eps - eps_theta(z_t, t, c)||^2. Examples are
/// evaluated in batch order.
double ldm_loss(const std::vector<Vec>& z0_batch, const std::vector<std::string>& captions,
                const ModelBundle& bundle, const NoiseSchedule& schedule, std::uint64_t rng_seed);

/// Same value as ldm_loss; also writes d(loss)/d(theta) into `grad`
/// (overwritten, sized to the denoiser's parameter count).
double ldm_loss_and_gradient(const std::vector<Vec>& z0_batch, const std::vector<std::string>& captions,
                             const TextEncoder& text_encoder, const TrainableDenoiser& denoiser,
                             const NoiseSchedule& schedule, std::uint64_t rng_seed, std::span<double> grad);

// ---------------------------------------------------------------------------
// Fine-tuning

enum class OptimizerKind { sgd, adam };

struct TrainingConfig {
    double learning_rate = 1e-5;
    int epochs = 150;
    int batch_size = 4;
    std::uint64_t seed = 0;
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    OptimizerKind optimizer = OptimizerKind::sgd;

    void validate() const;
    bool operator==(const TrainingConfig&) const = default;
};

json training_config_to_json(const TrainingConfig& config);
TrainingConfig training_config_from_json(const json& obj);

struct TrainingReport {
    std::vector<double> epoch_losses;
    std::map<std::string, std::string> fingerprints_before;
    std::map<std::string, std::string> fingerprints_after;
    TrainingConfig config_echo;
};

using ImageLoader = std::function<std::vector<double>(const CulturalRecord&)>;

/// Trains only the denoiser on (image, caption) pairs with the LDM objective.
/// Text encoder and autoencoder are read through const pointers and their
/// fingerprints are recorded before and after.
TrainingReport fine_tune(const std::vector<CulturalRecord>& records, ModelBundle& bundle,
                         const TrainingConfig& config, const ImageLoader& image_loader);

/// Deterministic pseudo-image derived from the record's image hash, values
/// in [-1, 1]. Stands in for real pixels in toy runs.
std::vector<double> synthetic_image(const CulturalRecord& record, int n_pixels);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
    ModelBundle bundle;
    NoiseSchedule schedule;
    std::optional<TrainingConfig> config;
    std::vector<double> epoch_losses;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Rejects files whose stored fingerprints do not match the parameters.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ccub
