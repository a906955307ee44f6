// SPDX-License-Identifier: Apache-2.0

#include "ccub/diffusion.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "ccub/digest.hpp"

namespace ccub {

namespace {

void append_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<double> normal_vector(std::size_t n, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> out(n);
    for (auto& x : out) x = dist(rng);
    return out;
}

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

// ---------------------------------------------------------------------------

std::string NoiseSchedule::id() const {
    std::vector<std::uint8_t> bytes;
    append_u64_le(bytes, static_cast<std::uint64_t>(T));
    for (double b : betas) append_u64_le(bytes, std::bit_cast<std::uint64_t>(b));
    return "linear-T" + std::to_string(T) + "-" + sha256_hex(bytes).substr(0, 12);
}

NoiseSchedule schedule_from_betas(std::vector<double> betas) {
    if (betas.empty()) throw ValidationError("noise schedule needs at least one step");
    NoiseSchedule s;
    s.T = static_cast<int>(betas.size());
    double prod = 1.0;
    for (double b : betas) {
        if (!(b > 0.0 && b < 1.0)) {
            throw ValidationError("beta values must lie in (0, 1), got " + std::to_string(b));
        }
        prod *= 1.0 - b;
        s.alphas_cumprod.push_back(prod);
    }
    s.betas = std::move(betas);
    return s;
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ValidationError("schedule length T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw ValidationError("need 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        betas[t] = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / (T - 1);
    }
    return schedule_from_betas(std::move(betas));
}

Vec add_noise_at(const Vec& z0, double alpha_bar, const Vec& eps) {
    if (z0.size() != eps.size()) throw ValidationError("add_noise: latent and noise shapes differ");
    return std::sqrt(alpha_bar) * z0 + std::sqrt(1.0 - alpha_bar) * eps;
}

Vec add_noise(const Vec& z0, int t, const Vec& eps, const NoiseSchedule& schedule) {
    if (t < 0 || t >= schedule.T) {
        throw ValidationError("add_noise: timestep " + std::to_string(t) + " outside [0, " +
                              std::to_string(schedule.T) + ")");
    }
    return add_noise_at(z0, schedule.alphas_cumprod[t], eps);
}

// ---------------------------------------------------------------------------

std::string fingerprint(const Component& component) {
    const auto kind = component.kind();
    const auto params = component.parameters();
    std::vector<std::uint8_t> bytes(kind.begin(), kind.end());
    bytes.push_back(0);
    append_u64_le(bytes, params.size());
    for (double p : params) append_u64_le(bytes, std::bit_cast<std::uint64_t>(p));
    return sha256_hex(bytes);
}

BagOfWordsEncoder::BagOfWordsEncoder(int buckets, int dim, std::uint64_t seed)
    : m_buckets(buckets), m_dim(dim) {
    if (buckets < 1 || dim < 1) throw ValidationError("bag-of-words encoder needs positive sizes");
    std::mt19937_64 rng(mix_seed(seed, 0x7e47));
    m_projection = normal_vector(static_cast<std::size_t>(buckets) * dim, 1.0 / std::sqrt(dim), rng);
}

BagOfWordsEncoder::BagOfWordsEncoder(int buckets, int dim, std::vector<double> projection)
    : m_buckets(buckets), m_dim(dim), m_projection(std::move(projection)) {
    if (buckets < 1 || dim < 1 || m_projection.size() != static_cast<std::size_t>(buckets) * dim) {
        throw ValidationError("bag-of-words projection has the wrong size");
    }
}

json BagOfWordsEncoder::config() const { return {{"buckets", m_buckets}, {"dim", m_dim}}; }

Vec BagOfWordsEncoder::encode(const std::string& text) const {
    Vec out = Vec::Zero(m_dim);
    int n_words = 0;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        const auto row = static_cast<std::size_t>(fnv1a64(word) % static_cast<std::uint64_t>(m_buckets));
        for (int j = 0; j < m_dim; ++j) out[j] += m_projection[row * m_dim + j];
        ++n_words;
        word.clear();
    };
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            word.push_back(static_cast<char>(std::tolower(ch)));
        } else {
            flush();
        }
    }
    flush();
    if (n_words > 0) out /= n_words;
    return out;
}

ScaleAutoencoder::ScaleAutoencoder(int dim) : m_scales(static_cast<std::size_t>(std::max(dim, 0)), 1.0) {
    if (dim < 1) throw ValidationError("autoencoder needs a positive latent size");
}

ScaleAutoencoder::ScaleAutoencoder(std::vector<double> scales) : m_scales(std::move(scales)) {
    if (m_scales.empty()) throw ValidationError("autoencoder needs a positive latent size");
    for (double s : m_scales) {
        if (!(std::isfinite(s) && s != 0.0)) throw ValidationError("autoencoder scales must be finite and nonzero");
    }
}

json ScaleAutoencoder::config() const { return {{"dim", m_scales.size()}}; }

Vec ScaleAutoencoder::encode(const std::vector<double>& pixels) const {
    if (pixels.size() != m_scales.size()) {
        throw ValidationError("autoencoder expects " + std::to_string(m_scales.size()) + " pixels, got " +
                              std::to_string(pixels.size()));
    }
    Vec z(static_cast<Eigen::Index>(pixels.size()));
    for (std::size_t i = 0; i < pixels.size(); ++i) z[static_cast<Eigen::Index>(i)] = pixels[i] * m_scales[i];
    return z;
}

std::vector<double> ScaleAutoencoder::decode(const Vec& latent) const {
    if (static_cast<std::size_t>(latent.size()) != m_scales.size()) {
        throw ValidationError("autoencoder decode: latent has the wrong size");
    }
    std::vector<double> out(m_scales.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = latent[static_cast<Eigen::Index>(i)] / m_scales[i];
    return out;
}

std::size_t MlpShape::parameter_count() const {
    const std::size_t in = input_dim();
    return hidden * in + hidden + latent_dim * hidden + latent_dim;
}

namespace {

struct MlpView {
    Eigen::Map<const Eigen::MatrixXd> W1;
    Eigen::Map<const Vec> b1;
    Eigen::Map<const Eigen::MatrixXd> W2;
    Eigen::Map<const Vec> b2;
};

MlpView view_of(const MlpShape& s, const double* p) {
    const Eigen::Index H = s.hidden, I = s.input_dim(), D = s.latent_dim;
    return {
        Eigen::Map<const Eigen::MatrixXd>(p, H, I),
        Eigen::Map<const Vec>(p + H * I, H),
        Eigen::Map<const Eigen::MatrixXd>(p + H * I + H, D, H),
        Eigen::Map<const Vec>(p + H * I + H + D * H, D),
    };
}

void check_shape(const MlpShape& s) {
    if (s.latent_dim < 1 || s.cond_dim < 0 || s.hidden < 1 || s.time_features < 0 || s.time_features % 2 != 0 ||
        s.T < 1) {
        throw ValidationError("invalid denoiser shape");
    }
}

}  // namespace

MlpDenoiser::MlpDenoiser(const MlpShape& shape, std::uint64_t seed) : m_shape(shape) {
    check_shape(shape);
    std::mt19937_64 rng(mix_seed(seed, 0xd3e0));
    const std::size_t H = shape.hidden, I = shape.input_dim(), D = shape.latent_dim;
    auto w1 = normal_vector(H * I, 1.0 / std::sqrt(static_cast<double>(I)), rng);
    auto w2 = normal_vector(D * H, 0.1 / std::sqrt(static_cast<double>(H)), rng);
    m_params.reserve(shape.parameter_count());
    m_params.insert(m_params.end(), w1.begin(), w1.end());
    m_params.insert(m_params.end(), H, 0.0);
    m_params.insert(m_params.end(), w2.begin(), w2.end());
    m_params.insert(m_params.end(), D, 0.0);
}

MlpDenoiser::MlpDenoiser(const MlpShape& shape, std::vector<double> parameters)
    : m_shape(shape), m_params(std::move(parameters)) {
    check_shape(shape);
    if (m_params.size() != shape.parameter_count()) {
        throw ValidationError("denoiser expects " + std::to_string(shape.parameter_count()) + " parameters, got " +
                              std::to_string(m_params.size()));
    }
}

json MlpDenoiser::config() const {
    return {
        {"latent_dim", m_shape.latent_dim},
        {"cond_dim", m_shape.cond_dim},
        {"hidden", m_shape.hidden},
        {"time_features", m_shape.time_features},
        {"T", m_shape.T},
    };
}

Vec MlpDenoiser::time_embedding(int t) const {
    Vec phi(m_shape.time_features);
    const double s = static_cast<double>(t) / m_shape.T;
    for (int k = 0; k < m_shape.time_features / 2; ++k) {
        const double w = std::numbers::pi * std::ldexp(1.0, k);
        phi[2 * k] = std::sin(w * s);
        phi[2 * k + 1] = std::cos(w * s);
    }
    return phi;
}

Vec MlpDenoiser::input(const Vec& z_t, int t, const Vec& c) const {
    if (z_t.size() != m_shape.latent_dim || c.size() != m_shape.cond_dim) {
        throw ValidationError("denoiser input shape mismatch");
    }
    Vec x(m_shape.input_dim());
    x << z_t, c, time_embedding(t);
    return x;
}

Vec MlpDenoiser::predict(const Vec& z_t, int t, const Vec& c) const {
    const auto m = view_of(m_shape, m_params.data());
    const Vec h = (m.W1 * input(z_t, t, c) + m.b1).array().tanh().matrix();
    return m.W2 * h + m.b2;
}

void MlpDenoiser::backprop(const Vec& z_t, int t, const Vec& c, const Vec& upstream, std::span<double> grad) const {
    if (grad.size() != m_params.size() || upstream.size() != m_shape.latent_dim) {
        throw ValidationError("backprop: gradient buffer or upstream has the wrong size");
    }
    const auto m = view_of(m_shape, m_params.data());
    const Vec x = input(z_t, t, c);
    const Vec h = (m.W1 * x + m.b1).array().tanh().matrix();

    const Eigen::Index H = m_shape.hidden, I = m_shape.input_dim(), D = m_shape.latent_dim;
    double* g = grad.data();
    Eigen::Map<Eigen::MatrixXd> gW1(g, H, I);
    Eigen::Map<Vec> gb1(g + H * I, H);
    Eigen::Map<Eigen::MatrixXd> gW2(g + H * I + H, D, H);
    Eigen::Map<Vec> gb2(g + H * I + H + D * H, D);

    gW2.noalias() += upstream * h.transpose();
    gb2 += upstream;
    const Vec da = ((m.W2.transpose() * upstream).array() * (1.0 - h.array().square())).matrix();
    gW1.noalias() += da * x.transpose();
    gb1 += da;
}

std::unique_ptr<TrainableDenoiser> MlpDenoiser::clone() const { return std::make_unique<MlpDenoiser>(*this); }

void ModelBundle::check_compatible() const {
    if (!text_encoder || !denoiser || !image_autoencoder) {
        throw ValidationError("model bundle is missing a component");
    }
    if (const auto* mlp = dynamic_cast<const MlpDenoiser*>(denoiser.get())) {
        if (mlp->shape().latent_dim != image_autoencoder->latent_dim() ||
            mlp->shape().cond_dim != text_encoder->dim()) {
            throw ValidationError("model bundle components have incompatible shapes");
        }
    }
}

ModelBundle make_toy_bundle(const ToyBundleOptions& o, std::uint64_t seed) {
    MlpShape shape{o.latent_dim, o.cond_dim, o.hidden, o.time_features, o.T};
    ModelBundle b{
        std::make_shared<BagOfWordsEncoder>(o.vocab_buckets, o.cond_dim, seed),
        std::make_shared<MlpDenoiser>(shape, seed),
        std::make_shared<ScaleAutoencoder>(o.latent_dim),
    };
    b.check_compatible();
    return b;
}

// ---------------------------------------------------------------------------

NoiseDraw draw_noise(std::size_t batch, int dim, int T, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_t(0, T - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    NoiseDraw d;
    for (std::size_t i = 0; i < batch; ++i) {
        d.t.push_back(pick_t(rng));
        Vec e(dim);
        for (int j = 0; j < dim; ++j) e[j] = normal(rng);
        d.eps.push_back(std::move(e));
    }
    return d;
}

namespace {

void check_batch(const std::vector<Vec>& z0_batch, const std::vector<std::string>& captions) {
    if (z0_batch.empty()) throw ValidationError("ldm_loss: empty batch");
    if (z0_batch.size() != captions.size()) throw ValidationError("ldm_loss: latents and captions differ in count");
    for (const auto& z : z0_batch) {
        if (z.size() != z0_batch.front().size()) throw ValidationError("ldm_loss: ragged latent batch");
    }
}

}  // namespace

double ldm_loss(const std::vector<Vec>& z0_batch, const std::vector<std::string>& captions,
                const ModelBundle& bundle, const NoiseSchedule& schedule, std::uint64_t rng_seed) {
    check_batch(z0_batch, captions);
    const int dim = static_cast<int>(z0_batch.front().size());
    const auto draw = draw_noise(z0_batch.size(), dim, schedule.T, rng_seed);
    double total = 0.0;
    for (std::size_t i = 0; i < z0_batch.size(); ++i) {
        const Vec c = bundle.text_encoder->encode(captions[i]);
        const Vec z_t = add_noise(z0_batch[i], draw.t[i], draw.eps[i], schedule);
        const Vec pred = bundle.denoiser->predict(z_t, draw.t[i], c);
        if (pred.size() != dim) throw ValidationError("ldm_loss: denoiser output shape differs from latent shape");
        if (!all_finite(pred)) throw RuntimeFailure("ldm_loss: denoiser produced a non-finite output");
        total += (draw.eps[i] - pred).squaredNorm();
    }
    return total / static_cast<double>(z0_batch.size());
}

double ldm_loss_and_gradient(const std::vector<Vec>& z0_batch, const std::vector<std::string>& captions,
                             const TextEncoder& text_encoder, const TrainableDenoiser& denoiser,
                             const NoiseSchedule& schedule, std::uint64_t rng_seed, std::span<double> grad) {
    check_batch(z0_batch, captions);
    std::fill(grad.begin(), grad.end(), 0.0);
    const int dim = static_cast<int>(z0_batch.front().size());
    const auto draw = draw_noise(z0_batch.size(), dim, schedule.T, rng_seed);
    const double inv_b = 1.0 / static_cast<double>(z0_batch.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z0_batch.size(); ++i) {
        const Vec c = text_encoder.encode(captions[i]);
        const Vec z_t = add_noise(z0_batch[i], draw.t[i], draw.eps[i], schedule);
        const Vec pred = denoiser.predict(z_t, draw.t[i], c);
        if (pred.size() != dim) throw ValidationError("ldm_loss: denoiser output shape differs from latent shape");
        if (!all_finite(pred)) throw RuntimeFailure("ldm_loss: denoiser produced a non-finite output");
        const Vec resid = draw.eps[i] - pred;
        total += resid.squaredNorm();
        denoiser.backprop(z_t, draw.t[i], c, (-2.0 * inv_b) * resid, grad);
    }
    return total * inv_b;
}

// ---------------------------------------------------------------------------

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (T < 1) throw ValidationError("T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw ValidationError("need 0 < beta_start <= beta_end < 1");
    }
}

json training_config_to_json(const TrainingConfig& c) {
    return {
        {"learning_rate", c.learning_rate},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"T", c.T},
        {"beta_start", c.beta_start},
        {"beta_end", c.beta_end},
        {"optimizer", c.optimizer == OptimizerKind::sgd ? "sgd" : "adam"},
    };
}

TrainingConfig training_config_from_json(const json& obj) {
    try {
        TrainingConfig c;
        c.learning_rate = obj.at("learning_rate").get<double>();
        c.epochs = obj.at("epochs").get<int>();
        c.batch_size = obj.at("batch_size").get<int>();
        c.seed = obj.at("seed").get<std::uint64_t>();
        c.T = obj.at("T").get<int>();
        c.beta_start = obj.at("beta_start").get<double>();
        c.beta_end = obj.at("beta_end").get<double>();
        const auto opt = obj.at("optimizer").get<std::string>();
        if (opt == "sgd") {
            c.optimizer = OptimizerKind::sgd;
        } else if (opt == "adam") {
            c.optimizer = OptimizerKind::adam;
        } else {
            throw ValidationError("unknown optimizer '" + opt + "'");
        }
        return c;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed training config: ") + e.what());
    }
}

namespace {

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, std::size_t n) : m_kind(kind), m_lr(lr) {
        if (kind == OptimizerKind::adam) {
            m_m.assign(n, 0.0);
            m_v.assign(n, 0.0);
        }
    }

    void step(std::span<double> params, std::span<const double> grad) {
        if (m_kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= m_lr * grad[i];
            return;
        }
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++m_t;
        const double c1 = 1.0 - std::pow(b1, m_t);
        const double c2 = 1.0 - std::pow(b2, m_t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_m[i] = b1 * m_m[i] + (1.0 - b1) * grad[i];
            m_v[i] = b2 * m_v[i] + (1.0 - b2) * grad[i] * grad[i];
            params[i] -= m_lr * (m_m[i] / c1) / (std::sqrt(m_v[i] / c2) + eps);
        }
    }

private:
    OptimizerKind m_kind;
    double m_lr;
    int m_t = 0;
    std::vector<double> m_m, m_v;
};

std::map<std::string, std::string> frozen_fingerprints(const ModelBundle& b) {
    return {
        {"text_encoder", fingerprint(*b.text_encoder)},
        {"image_autoencoder", fingerprint(*b.image_autoencoder)},
    };
}

}  // namespace

TrainingReport fine_tune(const std::vector<CulturalRecord>& records, ModelBundle& bundle,
                         const TrainingConfig& config, const ImageLoader& image_loader) {
    config.validate();
    bundle.check_compatible();
    if (records.empty()) throw ValidationError("fine_tune: no training records");
    auto* denoiser = dynamic_cast<TrainableDenoiser*>(bundle.denoiser.get());
    if (!denoiser) throw ValidationError("fine_tune: denoiser is not trainable");
    if (const auto* mlp = dynamic_cast<const MlpDenoiser*>(denoiser); mlp && mlp->shape().T != config.T) {
        throw ValidationError("fine_tune: denoiser was built for T=" + std::to_string(mlp->shape().T) +
                              ", config has T=" + std::to_string(config.T));
    }

    const auto schedule = make_schedule(config.T, config.beta_start, config.beta_end);
    const std::shared_ptr<const TextEncoder> text_encoder = bundle.text_encoder;
    const std::shared_ptr<const ImageAutoencoder> autoencoder = bundle.image_autoencoder;

    TrainingReport report;
    report.config_echo = config;
    report.fingerprints_before = frozen_fingerprints(bundle);

    std::vector<std::string> captions;
    for (const auto& r : records) captions.push_back(r.caption);

    std::mt19937_64 rng(config.seed);
    Optimizer optimizer(config.optimizer, config.learning_rate, denoiser->parameters().size());
    std::vector<double> grad(denoiser->parameters().size());
    std::vector<std::size_t> order(records.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<Vec> latents;
        latents.reserve(records.size());
        for (const auto& r : records) {
            std::vector<double> pixels;
            try {
                pixels = image_loader(r);
            } catch (const std::exception& e) {
                throw RuntimeFailure("cannot load image for record " + r.id + ": " + e.what());
            }
            latents.push_back(autoencoder->encode(pixels));
        }

        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<Vec> z0;
            std::vector<std::string> caps;
            for (std::size_t k = start; k < end; ++k) {
                z0.push_back(latents[order[k]]);
                caps.push_back(captions[order[k]]);
            }
            const std::uint64_t batch_seed = rng();
            const double loss =
                ldm_loss_and_gradient(z0, caps, *text_encoder, *denoiser, schedule, batch_seed, grad);
            if (!std::isfinite(loss)) {
                throw RuntimeFailure("fine_tune: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                     ", batch starting at " + std::to_string(start));
            }
            optimizer.step(denoiser->mutable_parameters(), grad);
            epoch_sum += loss * static_cast<double>(end - start);
        }
        report.epoch_losses.push_back(epoch_sum / static_cast<double>(records.size()));
    }

    report.fingerprints_after = frozen_fingerprints(bundle);
    return report;
}

std::vector<double> synthetic_image(const CulturalRecord& record, int n_pixels) {
    std::vector<double> out(static_cast<std::size_t>(n_pixels));
    std::mt19937_64 rng(fnv1a64(record.image_hash));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& x : out) x = dist(rng);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

json component_to_json(const Component& c) {
    return {
        {"kind", c.kind()},
        {"config", c.config()},
        {"parameters", std::vector<double>(c.parameters().begin(), c.parameters().end())},
        {"fingerprint", fingerprint(c)},
    };
}

template <class T>
std::shared_ptr<T> verified(std::shared_ptr<T> c, const json& obj) {
    if (fingerprint(*c) != obj.at("fingerprint").get<std::string>()) {
        throw ValidationError("checkpoint component '" + c->kind() + "' fails its fingerprint check");
    }
    return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    ck.bundle.check_compatible();
    json doc = {
        {"format", "ccub-checkpoint"},
        {"version", 1},
        {"text_encoder", component_to_json(*ck.bundle.text_encoder)},
        {"denoiser", component_to_json(*ck.bundle.denoiser)},
        {"image_autoencoder", component_to_json(*ck.bundle.image_autoencoder)},
        {"schedule", {{"betas", ck.schedule.betas}, {"id", ck.schedule.id()}}},
        {"epoch_losses", ck.epoch_losses},
    };
    doc["config"] = ck.config ? training_config_to_json(*ck.config) : json(nullptr);
    write_text_file(path, canonical_dump(doc));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const json doc = parse_json_file(path);
    try {
        if (doc.at("format") != "ccub-checkpoint" || doc.at("version") != 1) {
            throw ValidationError("not a checkpoint file: " + path.string());
        }
        Checkpoint ck;
        const auto& te = doc.at("text_encoder");
        if (te.at("kind") != "bag_of_words") throw ValidationError("unsupported text encoder kind");
        ck.bundle.text_encoder = verified(
            std::make_shared<const BagOfWordsEncoder>(te.at("config").at("buckets").get<int>(),
                                                      te.at("config").at("dim").get<int>(),
                                                      te.at("parameters").get<std::vector<double>>()),
            te);

        const auto& dn = doc.at("denoiser");
        if (dn.at("kind") != "mlp_denoiser") throw ValidationError("unsupported denoiser kind");
        const auto& dc = dn.at("config");
        MlpShape shape{dc.at("latent_dim").get<int>(), dc.at("cond_dim").get<int>(), dc.at("hidden").get<int>(),
                       dc.at("time_features").get<int>(), dc.at("T").get<int>()};
        ck.bundle.denoiser =
            verified(std::make_shared<MlpDenoiser>(shape, dn.at("parameters").get<std::vector<double>>()), dn);

        const auto& ae = doc.at("image_autoencoder");
        if (ae.at("kind") != "scale_autoencoder") throw ValidationError("unsupported autoencoder kind");
        ck.bundle.image_autoencoder =
            verified(std::make_shared<const ScaleAutoencoder>(ae.at("parameters").get<std::vector<double>>()), ae);
        ck.bundle.check_compatible();

        ck.schedule = schedule_from_betas(doc.at("schedule").at("betas").get<std::vector<double>>());
        if (!doc.at("config").is_null()) ck.config = training_config_from_json(doc.at("config"));
        ck.epoch_losses = doc.at("epoch_losses").get<std::vector<double>>();
        return ck;
    } catch (const json::exception& e) {
        throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace ccub
