// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. Structured results cross the boundary as JSON text; the
// ccub package decodes them into dicts.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ccub/augmentation.hpp"
#include "ccub/dataset.hpp"
#include "ccub/digest.hpp"
#include "ccub/diffusion.hpp"
#include "ccub/error.hpp"
#include "ccub/image_io.hpp"
#include "ccub/survey.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace ccub;

namespace {

std::string stats_json(const fs::path& manifest) {
    const auto stats = compute_stats(load_manifest(manifest));
    json cells = json::object();
    for (const auto& country : stats.country_order) {
        json row = json::object();
        for (auto c : kAllCategories) row[std::string(to_string(c))] = stats.count(country, c);
        row["total"] = stats.country_total(country);
        cells[country] = std::move(row);
    }
    return json{{"countries", cells}, {"grand_total", stats.grand_total}}.dump();
}

std::vector<std::tuple<long, std::string, std::string>> manifest_violations(const fs::path& manifest) {
    std::vector<std::tuple<long, std::string, std::string>> out;
    try {
        load_manifest(manifest);
    } catch (const ValidationError& e) {
        for (const auto& v : e.violations()) out.emplace_back(v.index, v.field, v.rule);
        if (e.violations().empty()) out.emplace_back(-1, "", e.what());
    }
    return out;
}

FinetuneCorpus corpus_of(const std::string& country, const std::vector<std::pair<std::string, std::string>>& pairs) {
    FinetuneCorpus c{country, {}};
    for (const auto& [base, target] : pairs) c.pairs.push_back({base, target, country});
    return c;
}

std::vector<std::pair<std::string, std::string>> pairs_of(const FinetuneCorpus& c) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : c.pairs) out.emplace_back(p.base_prompt, p.target_prompt);
    return out;
}

/// Fine-tunes the toy bundle on one country's records. With `use_image_files`
/// the PNGs next to the manifest are read (and hash-checked); otherwise
/// deterministic synthetic pixels stand in.
std::string fine_tune_toy(const fs::path& manifest_path, const std::string& country, const std::string& config_json,
                          bool use_image_files, std::uint64_t base_model_seed) {
    const auto manifest = load_manifest(manifest_path);
    const auto records = filter_records(manifest, RecordFilter{country, std::nullopt, std::nullopt});
    const auto config = training_config_from_json(json::parse(config_json));
    ToyBundleOptions options;
    options.T = config.T;
    auto bundle = make_toy_bundle(options, base_model_seed);
    const int n_pixels = bundle.image_autoencoder->latent_dim();
    const fs::path root = manifest_path.parent_path();
    ImageLoader loader = [&](const CulturalRecord& r) {
        if (!use_image_files) return synthetic_image(r, n_pixels);
        const auto bytes = read_text_file(root / r.image_ref);
        if (sha256_hex(bytes) != r.image_hash) throw ValidationError("image hash mismatch for " + r.id);
        return pool_to_grid(read_png(root / r.image_ref), 2, 4);
    };
    TrainingReport report;
    {
        py::gil_scoped_release release;
        report = fine_tune(records, bundle, config, loader);
    }
    return json{{"epoch_losses", report.epoch_losses},
                {"fingerprints_before", report.fingerprints_before},
                {"fingerprints_after", report.fingerprints_after},
                {"config", training_config_to_json(report.config_echo)}}
        .dump();
}

std::string build_survey_json(const std::string& survey_id, const std::string& pairs_json, std::uint64_t seed,
                              const std::string& kind_name) {
    const auto kind = parse_survey_kind(kind_name);
    if (!kind) throw ValidationError("unknown survey kind '" + kind_name + "'");
    auto doc = json::parse(pairs_json);
    if (doc.is_object()) doc = doc.at("pairs");
    std::vector<ComparisonPair> pairs;
    for (const auto& obj : doc) pairs.push_back(comparison_pair_from_json(obj));
    Survey s;
    s.id = survey_id;
    s.kind = *kind;
    s.questions = build_survey(pairs, seed, *kind);
    return survey_to_json(s).dump();
}

std::string score_json(const fs::path& survey_path, const fs::path& responses_path) {
    const auto s = load_survey(survey_path);
    return preference_table_to_json(compute_preferences(read_response_log(responses_path), s.questions)).dump();
}

std::string western_bias_json(const fs::path& survey_path, const fs::path& responses_path) {
    const auto s = load_survey(survey_path);
    return western_bias_to_json(western_bias_score(read_response_log(responses_path), s.questions)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of the ccub toolkit";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<RuntimeFailure>(m, "RuntimeFailure", base.ptr());

    m.attr("SEPARATOR") = std::string(kSeparator);
    m.attr("STOP_TOKEN") = std::string(kStopToken);
    m.attr("DEFAULT_TEMPERATURE") = kDefaultTemperature;

    m.def("_dataset_stats", &stats_json, py::arg("manifest"));
    m.def("manifest_violations", &manifest_violations, py::arg("manifest"),
          "(index, field, rule) per violation; empty when the manifest is valid.");

    m.def(
        "corpus_to_jsonl",
        [](const std::string& country, const std::vector<std::pair<std::string, std::string>>& pairs) {
            return corpus_to_jsonl(corpus_of(country, pairs));
        },
        py::arg("country"), py::arg("pairs"));
    m.def(
        "corpus_from_jsonl",
        [](const std::string& text, const std::string& country) { return pairs_of(corpus_from_jsonl(text, country)); },
        py::arg("text"), py::arg("country"));
    m.def(
        "assemble_prompt",
        [](const std::string& given, const std::string& augmentation, const std::string& country) {
            return assemble_prompt(given, augmentation, country).final;
        },
        py::arg("given"), py::arg("augmentation"), py::arg("country"));
    m.def("baseline_prompt", &baseline_prompt, py::arg("given"), py::arg("country"));

    m.def(
        "alphas_cumprod",
        [](int T, double beta_start, double beta_end) { return make_schedule(T, beta_start, beta_end).alphas_cumprod; },
        py::arg("T"), py::arg("beta_start"), py::arg("beta_end"));
    m.def(
        "add_noise_at", [](const Vec& z0, double alpha_bar, const Vec& eps) { return add_noise_at(z0, alpha_bar, eps); },
        py::arg("z0"), py::arg("alpha_bar"), py::arg("eps"));
    m.def("_fine_tune_toy", &fine_tune_toy, py::arg("manifest"), py::arg("country"), py::arg("config_json"),
          py::arg("use_image_files"), py::arg("base_model_seed"));
    m.def("_default_training_config", [] { return training_config_to_json(TrainingConfig{}).dump(); });

    m.def("percent_half_up", &percent_half_up, py::arg("k"), py::arg("n"));
    m.def("_build_survey", &build_survey_json, py::arg("survey_id"), py::arg("pairs_json"), py::arg("seed"),
          py::arg("kind"));
    m.def("_score", &score_json, py::arg("survey"), py::arg("responses"));
    m.def("_western_bias", &western_bias_json, py::arg("survey"), py::arg("responses"));
}
