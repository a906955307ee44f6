// SPDX-License-Identifier: Apache-2.0

#include "ccub/augmentation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "ccub/digest.hpp"

namespace ccub {

namespace {

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_blank_char(char ch) { return std::isspace(static_cast<unsigned char>(ch)) != 0; }

/// Length of the trailing country suffix of `text`, or 0. A suffix is
/// "[,] [in] {country}" with any whitespace between the parts; it must start
/// at a comma or at the beginning of the text.
std::size_t country_suffix_length(std::string_view text, std::string_view country) {
    const std::string t = lower(text);
    const std::string c = lower(country);
    std::size_t end = t.size();
    while (end > 0 && is_blank_char(t[end - 1])) --end;
    if (c.empty() || end < c.size() || t.compare(end - c.size(), c.size(), c) != 0) return 0;

    auto skip_blanks = [&](std::size_t p) {
        while (p > 0 && is_blank_char(t[p - 1])) --p;
        return p;
    };
    std::size_t p = end - c.size();
    std::size_t q = skip_blanks(p);
    if (q < p && q >= 2 && t.compare(q - 2, 2, "in") == 0 && (q == 2 || is_blank_char(t[q - 3]) || t[q - 3] == ',')) {
        p = q - 2;
    }
    p = skip_blanks(p);
    if (p == 0) return text.size();
    if (t[p - 1] == ',') return text.size() - (p - 1);
    return 0;
}

std::set<std::string> tokens(std::string_view text) {
    std::set<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            out.insert(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.insert(std::move(cur));
    return out;
}

}  // namespace

std::vector<Violation> validate_pair(const AugmentationPair& pair) {
    std::vector<Violation> out;
    auto check = [&](const std::string& text, const char* field) {
        if (trim(text).empty()) out.push_back({-1, field, "must be nonempty"});
        if (text.find(kSeparator) != std::string::npos) out.push_back({-1, field, "contains the separator token"});
        if (text.find(kStopToken) != std::string::npos) out.push_back({-1, field, "contains the stop token"});
    };
    check(pair.base_prompt, "base_prompt");
    check(pair.target_prompt, "target_prompt");
    if (trim(pair.country).empty()) out.push_back({-1, "country", "must be nonempty"});
    return out;
}

AugmentationPair build_pair(const CaptionSet& set, const CulturalRecord& record) {
    if (set.record_id != record.id) {
        throw ValidationError("caption set " + set.record_id + " does not belong to record " + record.id);
    }
    AugmentationPair pair{base_prompt_of(set), record.caption, record.country};
    if (auto v = validate_pair(pair); !v.empty()) {
        throw ValidationError("invalid augmentation pair for record " + record.id, std::move(v));
    }
    return pair;
}

std::string corpus_to_jsonl(const FinetuneCorpus& corpus) {
    std::string out;
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
        const auto& p = corpus.pairs[i];
        if (auto v = validate_pair(p); !v.empty()) {
            for (auto& item : v) item.index = static_cast<long>(i);
            throw ValidationError("invalid corpus", std::move(v));
        }
        if (p.country != corpus.country) {
            throw ValidationError("pair " + std::to_string(i) + " belongs to " + p.country + ", corpus is " +
                                  corpus.country);
        }
        json line = {
            {"prompt", p.base_prompt + std::string(kSeparator)},
            {"completion", " " + p.target_prompt + std::string(kStopToken)},
        };
        try {
            out += line.dump(-1, ' ', false, json::error_handler_t::strict);
        } catch (const json::type_error&) {
            throw ValidationError("pair " + std::to_string(i) + " is not valid UTF-8");
        }
        out += '\n';
    }
    return out;
}

FinetuneCorpus corpus_from_jsonl(std::string_view text, const std::string& country) {
    FinetuneCorpus corpus{country, {}};
    std::istringstream in{std::string(text)};
    std::string line;
    long index = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            ++index;
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError("corpus line " + std::to_string(index + 1) + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("prompt") || !obj.contains("completion") ||
            !obj["prompt"].is_string() || !obj["completion"].is_string()) {
            throw ValidationError("corpus line " + std::to_string(index + 1) + ": needs string prompt and completion");
        }
        const auto prompt = obj["prompt"].get<std::string>();
        const auto completion = obj["completion"].get<std::string>();
        if (!ends_with(prompt, kSeparator)) {
            throw ValidationError("corpus line " + std::to_string(index + 1) + ": prompt lacks separator");
        }
        if (completion.empty() || completion.front() != ' ' || !ends_with(completion, kStopToken)) {
            throw ValidationError("corpus line " + std::to_string(index + 1) + ": completion is not ' ' + text + stop");
        }
        AugmentationPair pair{
            prompt.substr(0, prompt.size() - kSeparator.size()),
            completion.substr(1, completion.size() - 1 - kStopToken.size()),
            country,
        };
        if (auto v = validate_pair(pair); !v.empty()) {
            for (auto& item : v) item.index = index;
            throw ValidationError("invalid corpus", std::move(v));
        }
        corpus.pairs.push_back(std::move(pair));
        ++index;
    }
    return corpus;
}

void serialize_corpus(const FinetuneCorpus& corpus, const std::filesystem::path& path) {
    write_text_file(path, corpus_to_jsonl(corpus));
}

FinetuneCorpus parse_corpus(const std::filesystem::path& path, const std::string& country) {
    return corpus_from_jsonl(read_text_file(path), country);
}

CorpusAugmentor::CorpusAugmentor(FinetuneCorpus corpus) : m_corpus(std::move(corpus)) {
    if (m_corpus.pairs.empty()) {
        throw ValidationError("corpus for " + m_corpus.country + " is empty");
    }
}

std::string CorpusAugmentor::complete(const std::string& prompt, double temperature, std::string_view stop,
                                      std::optional<std::uint64_t> seed) {
    if (!(temperature >= 0.0)) {
        throw UsageError("temperature must be >= 0");
    }
    std::string_view query = prompt;
    if (ends_with(query, kSeparator)) query.remove_suffix(kSeparator.size());
    const auto q = tokens(query);

    std::vector<double> overlap;
    overlap.reserve(m_corpus.pairs.size());
    for (const auto& p : m_corpus.pairs) {
        const auto b = tokens(p.base_prompt);
        std::size_t common = 0;
        for (const auto& t : q) common += b.count(t);
        const std::size_t uni = q.size() + b.size() - common;
        overlap.push_back(uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni));
    }

    std::size_t pick = 0;
    if (temperature == 0.0) {
        pick = static_cast<std::size_t>(std::max_element(overlap.begin(), overlap.end()) - overlap.begin());
    } else {
        const double top = *std::max_element(overlap.begin(), overlap.end());
        std::vector<double> weights;
        for (double o : overlap) weights.push_back(std::exp((o - top) / temperature));
        std::mt19937_64 rng(mix_seed(seed.value_or(0), fnv1a64(query)));
        std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
        pick = dist(rng);
    }
    return " " + m_corpus.pairs[pick].target_prompt + std::string(stop);
}

void AugmentorRegistry::bind(const std::string& country, std::shared_ptr<Augmentor> augmentor) {
    m_models[country] = std::move(augmentor);
}

std::shared_ptr<Augmentor> AugmentorRegistry::find(const std::string& country) const {
    auto it = m_models.find(country);
    return it == m_models.end() ? nullptr : it->second;
}

Augmentor& AugmentorRegistry::at(const std::string& country) const {
    auto model = find(country);
    if (!model) throw ValidationError("no augmentor bound for " + country);
    return *model;
}

std::string augment(const std::string& given, const std::string& country, Augmentor& augmentor,
                    double temperature, std::optional<std::uint64_t> seed) {
    if (trim(given).empty()) throw ValidationError("augment: given prompt is empty");
    if (!(temperature >= 0.0)) throw UsageError("augment: temperature must be >= 0");
    std::string completion;
    try {
        completion = augmentor.complete(given + std::string(kSeparator), temperature, kStopToken, seed);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw RuntimeFailure("augmentor for " + country + " failed: " + e.what());
    }
    if (auto pos = completion.find(kStopToken); pos != std::string::npos) {
        completion.resize(pos);
    }
    completion = trim(completion);
    if (completion.empty()) {
        throw EmptyCompletionError("augmentor for " + country + " returned an empty completion");
    }
    return completion;
}

bool ends_with_country_suffix(std::string_view text, std::string_view country) {
    return country_suffix_length(text, country) > 0;
}

AssembledPrompt assemble_prompt(const std::string& given, const std::string& augmentation,
                                const std::string& country) {
    AssembledPrompt out{given, augmentation, country, {}};

    // Collapse repeated trailing country suffixes down to the outermost one.
    std::string aug = trim(augmentation);
    while (!aug.empty() && (aug.back() == ',')) aug = trim(aug.substr(0, aug.size() - 1));
    std::string kept_suffix;
    while (std::size_t n = country_suffix_length(aug, country)) {
        if (kept_suffix.empty()) kept_suffix = aug.substr(aug.size() - n);
        aug = trim(aug.substr(0, aug.size() - n));
        while (!aug.empty() && aug.back() == ',') aug = trim(aug.substr(0, aug.size() - 1));
    }

    if (aug.empty()) {
        out.final = ends_with_country_suffix(given, country) ? given : given + ", in " + country;
        return out;
    }
    if (kept_suffix.empty()) {
        out.final = given + ", " + aug + ", in " + country;
    } else {
        if (kept_suffix.front() != ',') kept_suffix = ", " + kept_suffix;
        out.final = given + ", " + aug + kept_suffix;
    }
    return out;
}

std::string baseline_prompt(const std::string& given, const std::string& country) {
    if (trim(given).empty()) throw ValidationError("baseline_prompt: given prompt is empty");
    return given + ", " + country;
}

}  // namespace ccub
