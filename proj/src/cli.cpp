// SPDX-License-Identifier: Apache-2.0

#include "ccub/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "ccub/augmentation.hpp"
#include "ccub/captions.hpp"
#include "ccub/dataset.hpp"
#include "ccub/diffusion.hpp"
#include "ccub/digest.hpp"
#include "ccub/error.hpp"
#include "ccub/image_io.hpp"
#include "ccub/survey.hpp"
#include "ccub/survey_service.hpp"
#include "ccub/synthesis.hpp"

// After the Eigen-based headers: <resolv.h>, pulled in by httplib, defines _res.
#include <CLI11.hpp>
#include <httplib.h>

namespace ccub::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run configuration

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

std::map<std::string, fs::path> path_map(const json& obj, const fs::path& base, const char* key) {
    if (!obj.is_object()) throw ValidationError(std::string("config: '") + key + "' must be an object");
    std::map<std::string, fs::path> out;
    for (const auto& [k, v] : obj.items()) out[k] = resolve(base, v.get<std::string>());
    return out;
}

}  // namespace

RunConfig run_config_from_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ValidationError("config: expected an object");
    RunConfig c;
    std::vector<Violation> unknown;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "manifest") c.manifest = resolve(base_dir, value.get<std::string>());
            else if (key == "captions_dir") c.captions_dir = resolve(base_dir, value.get<std::string>());
            else if (key == "corpus_dir") c.corpus_dir = resolve(base_dir, value.get<std::string>());
            else if (key == "checkpoint_dir") c.checkpoint_dir = resolve(base_dir, value.get<std::string>());
            else if (key == "output_dir") c.output_dir = resolve(base_dir, value.get<std::string>());
            else if (key == "data_dir") c.data_dir = resolve(base_dir, value.get<std::string>());
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "base_model_seed") c.base_model_seed = value.get<std::uint64_t>();
            else if (key == "checkpoints") c.checkpoints = path_map(value, base_dir, "checkpoints");
            else if (key == "augmentors") c.augmentors = path_map(value, base_dir, "augmentors");
            else unknown.push_back({-1, key, "unknown config key"});
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (!unknown.empty()) throw ValidationError("config has unknown keys", std::move(unknown));
    return c;
}

json run_config_to_json(const RunConfig& c) {
    json doc = {
        {"captions_dir", c.captions_dir.string()},
        {"corpus_dir", c.corpus_dir.string()},
        {"checkpoint_dir", c.checkpoint_dir.string()},
        {"output_dir", c.output_dir.string()},
        {"data_dir", c.data_dir.string()},
        {"seed", c.seed},
        {"base_model_seed", c.base_model_seed},
        {"checkpoints", json::object()},
        {"augmentors", json::object()},
    };
    if (c.manifest) doc["manifest"] = c.manifest->string();
    for (const auto& [k, v] : c.checkpoints) doc["checkpoints"][k] = v.string();
    for (const auto& [k, v] : c.augmentors) doc["augmentors"][k] = v.string();
    return doc;
}

RunConfig load_run_config(const fs::path& path) {
    return run_config_from_json(parse_json_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Context {
    RunConfig config;
    std::ostream& out;
    std::ostream& err;
};

std::string file_key(const std::string& country) {
    std::string s = country;
    std::replace(s.begin(), s.end(), ' ', '_');
    return s;
}

fs::path caption_store_path(const RunConfig& c, const std::string& country) {
    return c.captions_dir / (file_key(country) + ".captions.json");
}

fs::path corpus_path(const RunConfig& c, const std::string& country) {
    if (auto it = c.augmentors.find(country); it != c.augmentors.end()) return it->second;
    return c.corpus_dir / (file_key(country) + ".jsonl");
}

fs::path checkpoint_path(const RunConfig& c, const std::string& country) {
    if (auto it = c.checkpoints.find(country); it != c.checkpoints.end()) return it->second;
    return c.checkpoint_dir / (file_key(country) + ".ckpt.json");
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) throw UsageError(what + " not found: " + path.string());
}

DatasetManifest require_manifest(const RunConfig& c, const std::optional<std::string>& flag) {
    const fs::path path = flag ? fs::path(*flag) : c.manifest.value_or(fs::path());
    if (path.empty()) throw UsageError("no manifest given (use --manifest or set it in the config)");
    require_file(path, "manifest");
    return load_manifest(path);
}

const CulturalRecord* find_record(const DatasetManifest& m, const std::string& id) {
    for (const auto& r : m.records) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

ToyBundleOptions toy_options(int T) {
    ToyBundleOptions o;
    o.T = T;
    return o;
}

// dataset ------------------------------------------------------------------

void add_dataset(CLI::App& app, Context& ctx) {
    struct Options {
        std::string validate_path;
        std::string stats_path;
        std::optional<std::string> stats_country;
        std::string stats_format = "table";
        bool stats_lint = false;
    };
    auto o = std::make_shared<Options>();
    auto* cmd = app.add_subcommand("dataset", "Validate and summarize a dataset manifest");
    cmd->require_subcommand(1);

    auto* validate = cmd->add_subcommand("validate", "Check every record of a manifest");
    validate->add_option("path", o->validate_path, "Manifest file")->required()->check(CLI::ExistingFile);
    validate->callback([&ctx, o] {
        const auto m = load_manifest(o->validate_path);
        ctx.out << "ok: " << m.records.size() << " records\n";
    });

    auto* stats = cmd->add_subcommand("stats", "Count images per country and category");
    stats->add_option("path", o->stats_path, "Manifest file")->required()->check(CLI::ExistingFile);
    stats->add_option("--country", o->stats_country, "Restrict to one country");
    stats->add_option("--format", o->stats_format, "Output format")->check(CLI::IsMember({"table", "csv"}));
    stats->add_flag("--lint", o->stats_lint, "Also report cells outside the 10-20 images guideline");
    stats->callback([&ctx, o] {
        auto m = load_manifest(o->stats_path);
        if (o->stats_country) m.records = filter_records(m, RecordFilter{o->stats_country, std::nullopt, std::nullopt});
        const auto s = compute_stats(m);
        ctx.out << (o->stats_format == "csv" ? format_stats_csv(s) : format_stats_table(s));
        if (o->stats_lint) {
            for (const auto& w : lint_category_balance(s)) ctx.err << w << '\n';
        }
    });
}

// captions -----------------------------------------------------------------

void add_captions(CLI::App& app, Context& ctx) {
    struct Options {
        std::optional<std::string> manifest;
        std::optional<std::string> country;
        std::optional<std::uint64_t> seed;
        std::size_t beam = 2;
        std::size_t nucleus = 2;
        std::string record_id;
        std::string text;
    };
    auto o = std::make_shared<Options>();
    auto* cmd = app.add_subcommand("captions", "Caption candidates, selection and human correction");
    cmd->require_subcommand(1);

    auto* gen = cmd->add_subcommand("generate", "Generate beam and nucleus caption candidates for a country");
    gen->add_option("--country", o->country, "Country whose records are captioned")->required();
    gen->add_option("--manifest", o->manifest, "Manifest file (default: from config)");
    gen->add_option("--seed", o->seed, "Sampling seed (default: config seed)");
    gen->add_option("--beam", o->beam, "Beam-search candidates per image");
    gen->add_option("--nucleus", o->nucleus, "Nucleus-sampling candidates per image");
    gen->callback([&ctx, o] {
        const auto m = require_manifest(ctx.config, o->manifest);
        const auto records = filter_records(m, RecordFilter{o->country, std::nullopt, std::nullopt});
        const auto path = caption_store_path(ctx.config, *o->country);
        auto store = CaptionStore::load_or_empty(path);
        MockCaptioner captioner;
        const std::uint64_t base = o->seed.value_or(ctx.config.seed);
        std::size_t added = 0;
        for (const auto& r : records) {
            if (store.get(r.id)) continue;
            store.put(generate_candidates(r, captioner, mix_seed(base, fnv1a64(r.id)), CaptionProtocol{o->beam, o->nucleus}));
            ++added;
        }
        store.save(path);
        ctx.out << "generated candidates for " << added << " records -> " << path.string() << '\n';
    });

    auto* sel = cmd->add_subcommand("select", "Score candidates and select the best match per image");
    sel->add_option("--country", o->country, "Country whose caption store is scored")->required();
    sel->add_option("--manifest", o->manifest, "Manifest file (default: from config)");
    sel->callback([&ctx, o] {
        const auto m = require_manifest(ctx.config, o->manifest);
        const auto path = caption_store_path(ctx.config, *o->country);
        require_file(path, "caption store");
        auto store = CaptionStore::load(path);
        MockScorer scorer;
        std::size_t selected = 0;
        for (const auto& [id, set] : store.snapshot()) {
            if (set.review_state >= ReviewState::selected) continue;
            const auto* rec = find_record(m, id);
            if (!rec) throw ValidationError("caption store entry '" + id + "' has no manifest record");
            store.put(score_and_select(set, scorer, rec->image_ref));
            ++selected;
        }
        store.save(path);
        ctx.out << "selected captions for " << selected << " records -> " << path.string() << '\n';
    });

    auto* cor = cmd->add_subcommand("correct", "Store the human-corrected, culture-free caption of one record");
    cor->add_option("record_id", o->record_id, "Record id")->required();
    cor->add_option("--text", o->text, "Corrected caption")->required();
    cor->add_option("--country", o->country, "Country of the record (default: looked up in the manifest)");
    cor->add_option("--manifest", o->manifest, "Manifest file (default: from config)");
    cor->callback([&ctx, o] {
        std::string c;
        if (o->country) {
            c = *o->country;
        } else {
            const auto m = require_manifest(ctx.config, o->manifest);
            const auto* rec = find_record(m, o->record_id);
            if (!rec) throw UsageError("record '" + o->record_id + "' is not in the manifest");
            c = rec->country;
        }
        const auto path = caption_store_path(ctx.config, c);
        require_file(path, "caption store");
        auto store = CaptionStore::load(path);
        if (!store.get(o->record_id)) throw UsageError("record '" + o->record_id + "' has no caption candidates");
        store.update(o->record_id, [o](CaptionSet s) { return apply_correction(std::move(s), o->text); });
        store.save(path);
        for (const auto& hit : lint_culture_free(o->text, c)) {
            ctx.err << "warning: corrected caption mentions '" << hit << "'\n";
        }
        ctx.out << "corrected " << o->record_id << '\n';
    });
}

// corpus / augment -----------------------------------------------------------

void add_corpus(CLI::App& app, Context& ctx) {
    struct Options {
        std::string country;
        std::optional<std::string> manifest;
        std::optional<std::string> out;
    };
    auto o = std::make_shared<Options>();
    auto* cmd = app.add_subcommand("corpus", "Build the augmentor fine-tune corpus");
    cmd->require_subcommand(1);
    auto* build = cmd->add_subcommand("build", "Pair each selected caption with the record's cultural caption");
    build->add_option("--country", o->country, "Country")->required();
    build->add_option("--manifest", o->manifest, "Manifest file (default: from config)");
    build->add_option("--out", o->out, "Output JSONL file (default: <corpus_dir>/<country>.jsonl)");
    build->callback([&ctx, o] {
        const auto m = require_manifest(ctx.config, o->manifest);
        const auto store_path = caption_store_path(ctx.config, o->country);
        require_file(store_path, "caption store");
        const auto store = CaptionStore::load(store_path);
        FinetuneCorpus corpus{o->country, {}};
        std::size_t skipped = 0;
        for (const auto& r : filter_records(m, RecordFilter{o->country, std::nullopt, std::nullopt})) {
            const auto set = store.get(r.id);
            if (!set || set->review_state < ReviewState::selected) {
                ++skipped;
                continue;
            }
            corpus.pairs.push_back(build_pair(*set, r));
        }
        if (corpus.pairs.empty()) throw ValidationError("no selected captions for " + o->country);
        const fs::path path = o->out ? fs::path(*o->out) : corpus_path(ctx.config, o->country);
        serialize_corpus(corpus, path);
        ctx.out << corpus.pairs.size() << " pairs -> " << path.string();
        if (skipped) ctx.out << " (" << skipped << " records without a selected caption skipped)";
        ctx.out << '\n';
    });
}

void add_augment(CLI::App& app, Context& ctx) {
    struct Options {
        std::string country;
        std::string prompt;
        std::optional<std::uint64_t> seed;
        double temperature = kDefaultTemperature;
        std::optional<std::string> corpus;
        bool as_json = false;
    };
    auto o = std::make_shared<Options>();
    auto* cmd = app.add_subcommand("augment", "Add culture-specific detail and a country suffix to a prompt");
    cmd->add_option("--country", o->country, "Target country")->required();
    cmd->add_option("--prompt", o->prompt, "Given prompt")->required();
    cmd->add_option("--seed", o->seed, "Sampling seed (default: config seed)");
    cmd->add_option("--temperature", o->temperature, "Sampling temperature")->check(CLI::Range(0.0, 2.0));
    cmd->add_option("--corpus", o->corpus, "Corpus backing the augmentor (default: from config)");
    cmd->add_flag("--json", o->as_json, "Print every prompt part as JSON");
    cmd->callback([&ctx, o] {
        const fs::path path = o->corpus ? fs::path(*o->corpus) : corpus_path(ctx.config, o->country);
        require_file(path, "augmentor corpus");
        CorpusAugmentor augmentor(parse_corpus(path, o->country));
        const auto aug = augment(o->prompt, o->country, augmentor, o->temperature, o->seed.value_or(ctx.config.seed));
        const auto assembled = assemble_prompt(o->prompt, aug, o->country);
        if (o->as_json) {
            ctx.out << json{{"given", assembled.given},
                            {"augmentation", assembled.augmentation},
                            {"country", assembled.country},
                            {"final", assembled.final}}
                           .dump()
                    << '\n';
        } else {
            ctx.out << assembled.final << '\n';
        }
    });
}

// finetune / generate --------------------------------------------------------

void add_finetune(CLI::App& app, Context& ctx) {
    struct Options {
        std::string country;
        std::optional<std::string> manifest;
        TrainingConfig tc;
        std::string optimizer = "sgd";
        std::string images = "synthetic";
        std::optional<std::uint64_t> seed;
        std::optional<std::string> out;
    };
    auto o = std::make_shared<Options>();
    auto* cmd = app.add_subcommand("finetune", "Fine-tune the denoiser on one country's images");
    cmd->add_option("--country", o->country, "Country")->required();
    cmd->add_option("--manifest", o->manifest, "Manifest file (default: from config)");
    cmd->add_option("--epochs", o->tc.epochs, "Training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", o->tc.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--batch", o->tc.batch_size, "Batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o->seed, "Training seed (default: config seed)");
    cmd->add_option("--timesteps", o->tc.T, "Diffusion timesteps T")->check(CLI::PositiveNumber);
    cmd->add_option("--beta-start", o->tc.beta_start, "First beta of the linear schedule");
    cmd->add_option("--beta-end", o->tc.beta_end, "Last beta of the linear schedule");
    cmd->add_option("--optimizer", o->optimizer, "Optimizer")->check(CLI::IsMember({"sgd", "adam"}));
    cmd->add_option("--images", o->images, "Pixel source: hash-seeded synthetic images or the referenced PNG files")
        ->check(CLI::IsMember({"synthetic", "files"}));
    cmd->add_option("--out", o->out, "Checkpoint path (default: <checkpoint_dir>/<country>.ckpt.json)");
    cmd->callback([&ctx, o] {
        const fs::path manifest_path = o->manifest ? fs::path(*o->manifest) : ctx.config.manifest.value_or(fs::path());
        const auto m = require_manifest(ctx.config, o->manifest);
        const auto records = filter_records(m, RecordFilter{o->country, std::nullopt, std::nullopt});
        if (records.empty()) throw ValidationError("no records for " + o->country);

        TrainingConfig config = o->tc;
        config.seed = o->seed.value_or(ctx.config.seed);
        config.optimizer = o->optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
        config.validate();

        auto bundle = make_toy_bundle(toy_options(config.T), ctx.config.base_model_seed);
        const int n_pixels = bundle.image_autoencoder->latent_dim();
        ImageLoader loader;
        if (o->images == "synthetic") {
            loader = [n_pixels](const CulturalRecord& r) { return synthetic_image(r, n_pixels); };
        } else {
            const fs::path root = manifest_path.parent_path();
            loader = [root](const CulturalRecord& r) {
                const auto file = root / r.image_ref;
                const auto bytes = read_text_file(file);
                if (sha256_hex(bytes) != r.image_hash) {
                    throw ValidationError("image " + file.string() + " does not match the hash of record " + r.id);
                }
                return pool_to_grid(read_png(file), 2, 4);
            };
        }
        const auto report = fine_tune(records, bundle, config, loader);
        const fs::path path = o->out ? fs::path(*o->out) : checkpoint_path(ctx.config, o->country);
        save_checkpoint({bundle, make_schedule(config.T, config.beta_start, config.beta_end), config,
                         report.epoch_losses},
                        path);
        json summary = {
            {"country", o->country},
            {"records", records.size()},
            {"epochs", report.epoch_losses.size()},
            {"first_epoch_loss", report.epoch_losses.front()},
            {"final_epoch_loss", report.epoch_losses.back()},
            {"frozen_unchanged", report.fingerprints_before == report.fingerprints_after},
            {"denoiser_fingerprint", fingerprint(*bundle.denoiser)},
            {"checkpoint", path.string()},
        };
        ctx.out << summary.dump(2) << '\n';
    });
}

void add_generate(CLI::App& app, Context& ctx) {
    struct Options {
        std::string country;
        std::string mode_name;
        std::string prompt;
        std::optional<std::uint64_t> seed;
        int steps = 50;
        double temperature = kDefaultTemperature;
        std::optional<std::string> out;
        std::optional<std::string> checkpoint;
        std::optional<std::string> corpus;
        std::optional<double> guidance_scale;
    };
    auto o = std::make_shared<Options>();
    auto* cmd = app.add_subcommand("generate", "Generate one image in a given mode");
    cmd->add_option("--country", o->country, "Target country")->required();
    cmd->add_option("--mode", o->mode_name, "baseline | finetuned | prompt_aug | combined")
        ->required()
        ->check(CLI::IsMember({"baseline", "finetuned", "prompt_aug", "combined"}));
    cmd->add_option("--prompt", o->prompt, "Given prompt")->required();
    cmd->add_option("--seed", o->seed, "Sampling seed (default: config seed)");
    cmd->add_option("--steps", o->steps, "Sampling steps")->check(CLI::PositiveNumber);
    cmd->add_option("--temperature", o->temperature, "Augmentor temperature")->check(CLI::Range(0.0, 2.0));
    cmd->add_option("--out", o->out, "Output directory (default: config output_dir)");
    cmd->add_option("--checkpoint", o->checkpoint, "Fine-tuned checkpoint (default: from config)");
    cmd->add_option("--corpus", o->corpus, "Augmentor corpus (default: from config)");
    cmd->add_option("--guidance-scale", o->guidance_scale, "Classifier-free guidance scale (default: off)")
        ->check(CLI::NonNegativeNumber);
    cmd->callback([&ctx, o] {
        const auto mode = *parse_generation_mode(o->mode_name);
        const fs::path ckpt_path = o->checkpoint ? fs::path(*o->checkpoint) : checkpoint_path(ctx.config, o->country);
        std::optional<Checkpoint> ckpt;
        if (fs::exists(ckpt_path)) {
            ckpt = load_checkpoint(ckpt_path);
        } else if (uses_finetuned_denoiser(mode)) {
            throw UsageError("mode " + o->mode_name + " needs a fine-tuned checkpoint: " + ckpt_path.string());
        }
        NoiseSchedule schedule = ckpt ? ckpt->schedule : make_schedule(1000, 1e-4, 2e-2);
        auto base = make_toy_bundle(toy_options(schedule.T), ctx.config.base_model_seed);
        BundleRegistry bundles(base, schedule);
        if (ckpt) {
            if (fingerprint(*ckpt->bundle.text_encoder) != fingerprint(*base.text_encoder) ||
                fingerprint(*ckpt->bundle.image_autoencoder) != fingerprint(*base.image_autoencoder)) {
                throw ValidationError("checkpoint " + ckpt_path.string() + " was trained from a different base model");
            }
            bundles.add_finetuned(o->country, ckpt->bundle);
        }

        AugmentorRegistry augmentors;
        if (uses_augmented_prompt(mode)) {
            const fs::path path = o->corpus ? fs::path(*o->corpus) : corpus_path(ctx.config, o->country);
            require_file(path, "augmentor corpus");
            augmentors.bind(o->country, std::make_shared<CorpusAugmentor>(parse_corpus(path, o->country)));
        }

        GenerationRequest req;
        req.given_prompt = o->prompt;
        req.country = o->country;
        req.mode = mode;
        req.seed = o->seed.value_or(ctx.config.seed);
        req.steps = o->steps;
        req.temperature = o->temperature;
        req.guidance_scale = o->guidance_scale;
        const auto image = generate(req, bundles, augmentors);
        const fs::path dir = o->out ? fs::path(*o->out) : ctx.config.output_dir;
        const auto stem = file_key(o->country) + "_" + o->mode_name + "_" + std::to_string(req.seed);
        const auto png = write_generated(image, dir, stem);
        ctx.out << png.string() << '\n' << image.metadata.final_prompt << '\n';
    });
}

// survey / serve ---------------------------------------------------------------

void print_table(std::ostream& out, const PreferenceTable& table, const std::string& format) {
    if (format == "csv") out << format_preference_csv(table);
    else if (format == "json") out << canonical_dump(preference_table_to_json(table));
    else out << format_preference_table(table);
}

void add_survey(CLI::App& app, Context& ctx) {
    struct Options {
        std::string pairs_path;
        std::string survey_id;
        std::string kind_name = "standard";
        std::optional<std::uint64_t> seed;
        std::string out;
        std::string survey_path;
        std::string responses_path;
        std::string format = "table";
        bool by_country = false;
    };
    auto o = std::make_shared<Options>();
    auto* cmd = app.add_subcommand("survey", "Build blinded surveys and score responses");
    cmd->require_subcommand(1);

    auto* build = cmd->add_subcommand("build", "Randomize comparison pairs into a blinded survey");
    build->add_option("--pairs", o->pairs_path, "JSON file of comparison pairs")->required()->check(CLI::ExistingFile);
    build->add_option("--id", o->survey_id, "Survey id")->required();
    build->add_option("--kind", o->kind_name, "Survey kind")->check(CLI::IsMember({"standard", "western_bias"}));
    build->add_option("--seed", o->seed, "Randomization seed (default: config seed)");
    build->add_option("--out", o->out, "Survey definition file")->required();
    build->callback([&ctx, o] {
        Survey s;
        s.id = o->survey_id;
        s.kind = *parse_survey_kind(o->kind_name);
        s.questions = build_survey(load_pairs(o->pairs_path), o->seed.value_or(ctx.config.seed), s.kind);
        save_survey(s, o->out);
        ctx.out << s.questions.size() << " questions -> " << o->out << '\n';
    });


    auto* score = cmd->add_subcommand("score", "Candidate-preference percentages per technique and metric");
    score->add_option("--survey", o->survey_path, "Survey definition file")->required()->check(CLI::ExistingFile);
    score->add_option("--responses", o->responses_path, "Response log (JSONL)")->required()->check(CLI::ExistingFile);
    score->add_option("--format", o->format, "Output format")->check(CLI::IsMember({"table", "csv", "json"}));
    score->add_flag("--by-country", o->by_country, "One table per country instead of the pooled table");
    score->callback([&ctx, o] {
        const auto s = load_survey(o->survey_path);
        const auto responses = read_response_log(o->responses_path);
        if (!o->by_country) {
            print_table(ctx.out, compute_preferences(responses, s.questions), o->format);
            return;
        }
        for (const auto& [country, table] : compute_preferences_by_country(responses, s.questions)) {
            ctx.out << "# " << country << '\n';
            print_table(ctx.out, table, o->format);
        }
    });

    auto* wb = cmd->add_subcommand("western-bias", "Share of comparisons where the candidate looked more Western");
    wb->add_option("--survey", o->survey_path, "Survey definition file")->required()->check(CLI::ExistingFile);
    wb->add_option("--responses", o->responses_path, "Response log (JSONL)")->required()->check(CLI::ExistingFile);
    wb->add_option("--format", o->format, "Output format")->check(CLI::IsMember({"table", "json"}));
    wb->callback([&ctx, o] {
        const auto s = load_survey(o->survey_path);
        const auto score = western_bias_score(read_response_log(o->responses_path), s.questions);
        if (o->format == "json") {
            ctx.out << canonical_dump(western_bias_to_json(score));
            return;
        }
        ctx.out << "western_appearance: "
                << (score.percentage ? std::to_string(*score.percentage) + "%" : std::string("undefined")) << " ("
                << score.candidate_chosen << "/" << score.n_comparisons << " comparisons, " << score.n_participants
                << " participants)\n";
    });
}

void add_serve(CLI::App& app, Context& ctx) {
    struct Options {
        std::string survey_path;
        int port = 8080;
        std::string host = "127.0.0.1";
        std::optional<std::string> data_dir;
    };
    auto o = std::make_shared<Options>();
    auto* cmd = app.add_subcommand("serve", "Run the blinded survey API");
    cmd->add_option("--survey", o->survey_path, "Survey definition file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--port", o->port, "TCP port")->check(CLI::Range(1, 65535));
    cmd->add_option("--host", o->host, "Bind address");
    cmd->add_option("--data-dir", o->data_dir, "Service data directory (default: $CCUB_DATA_DIR, then config)");
    cmd->callback([&ctx, o] {
        fs::path dir = ctx.config.data_dir;
        if (const char* env = std::getenv("CCUB_DATA_DIR"); env && *env) dir = env;
        if (o->data_dir) dir = *o->data_dir;
        std::string token;
        if (const char* env = std::getenv("CCUB_ADMIN_TOKEN"); env && *env) {
            token = env;
        } else {
            token = random_token_hex(16);
            ctx.err << "admin token: " << token << '\n';
        }
        SurveyService service(dir, token);
        const auto survey = load_survey(o->survey_path);
        const auto ids = service.survey_ids();
        if (std::find(ids.begin(), ids.end(), survey.id) == ids.end()) service.add_survey(survey);

        httplib::Server server;
        mount_survey_api(server, service);
        ctx.err << "serving survey " << survey.id << " on http://" << o->host << ":" << o->port << '\n';
        if (!server.listen(o->host, o->port)) throw RuntimeFailure("cannot listen on " + o->host + ":" + std::to_string(o->port));
    });
}

void report_error(std::ostream& err, const char* kind, const std::string& message,
                  const std::vector<Violation>& violations = {}) {
    json doc = {{"error", kind}, {"message", message}};
    if (!violations.empty()) {
        doc["violations"] = json::array();
        for (const auto& v : violations) {
            doc["violations"].push_back({{"index", v.index}, {"field", v.field}, {"rule", v.rule}});
        }
    }
    err << doc.dump() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Context ctx{RunConfig{}, out, err};
    try {
        if (const char* env = std::getenv(kConfigEnv); env && *env) ctx.config = load_run_config(env);
    } catch (const ValidationError& e) {
        report_error(err, "validation", e.what(), e.violations());
        return kExitValidation;
    } catch (const std::exception& e) {
        report_error(err, "usage", std::string("cannot load config: ") + e.what());
        return kExitUsage;
    }

    CLI::App app{"Cultural priming toolkit for text-to-image diffusion", "ccub"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough(false);
    add_dataset(app, ctx);
    add_captions(app, ctx);
    add_corpus(app, ctx);
    add_augment(app, ctx);
    add_finetune(app, ctx);
    add_generate(app, ctx);
    add_survey(app, ctx);
    add_serve(app, ctx);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        return kExitOk;
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        report_error(err, "usage", e.what());
        err << app.help();
        return kExitUsage;
    } catch (const UsageError& e) {
        report_error(err, "usage", e.what());
        return kExitUsage;
    } catch (const ValidationError& e) {
        report_error(err, "validation", e.what(), e.violations());
        return kExitValidation;
    } catch (const std::exception& e) {
        report_error(err, "runtime", e.what());
        return kExitRuntime;
    }
}

int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace ccub::cli
