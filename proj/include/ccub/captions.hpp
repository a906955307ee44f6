// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ccub/dataset.hpp"
#include "ccub/io.hpp"

namespace ccub {

enum class DecodeStrategy { beam, nucleus };
enum class ReviewState { generated = 0, scored = 1, selected = 2, corrected = 3 };

std::string_view to_string(DecodeStrategy s) noexcept;
std::string_view to_string(ReviewState s) noexcept;

struct CaptionCandidate {
    std::string text;
    DecodeStrategy strategy = DecodeStrategy::beam;
    std::optional<double> score;

    bool operator==(const CaptionCandidate&) const = default;
};

struct CaptionSet {
    std::string record_id;
    std::vector<CaptionCandidate> candidates;
    std::optional<std::size_t> selected;
    ReviewState review_state = ReviewState::generated;
    std::optional<std::string> corrected_text;

    bool operator==(const CaptionSet&) const = default;
};

/// Vision-language captioner. Beam decoding must be deterministic for a fixed
/// image; nucleus sampling is driven by `seed`.
class Captioner {
public:
    virtual ~Captioner() = default;
    virtual std::vector<std::string> caption(const std::string& image_ref, DecodeStrategy strategy,
                                             std::size_t k, std::uint64_t seed) = 0;
};

/// Image-text similarity; higher is a better match. Must be deterministic.
class ImageTextScorer {
public:
    virtual ~ImageTextScorer() = default;
    virtual double score(const std::string& image_ref, const std::string& text) = 0;
};

/// Template captioner with no model behind it, for tests and dry runs.
class MockCaptioner final : public Captioner {
public:
    std::vector<std::string> caption(const std::string& image_ref, DecodeStrategy strategy, std::size_t k,
                                     std::uint64_t seed) override;
};

/// Hash-derived pseudo-similarity in [0, 1).
class MockScorer final : public ImageTextScorer {
public:
    double score(const std::string& image_ref, const std::string& text) override;
};

struct CaptionProtocol {
    std::size_t beam = 2;
    std::size_t nucleus = 2;
};

CaptionSet generate_candidates(const CulturalRecord& record, Captioner& captioner, std::uint64_t seed,
                               const CaptionProtocol& protocol = {});

/// Scores every candidate and selects the argmax; equal scores resolve to the
/// lowest index.
CaptionSet score_and_select(CaptionSet set, ImageTextScorer& scorer, const std::string& image_ref);

CaptionSet apply_correction(CaptionSet set, const std::string& corrected);

std::string base_prompt_of(const CaptionSet& set);

/// Culture-specific words found in `text` for `country` (case-insensitive,
/// whole words). Warn-level only.
std::vector<std::string> lint_culture_free(const std::string& text, const std::string& country);

json caption_set_to_json(const CaptionSet& set);
CaptionSet caption_set_from_json(const json& obj);

/// One file per country mapping record id to its CaptionSet. State changes go
/// through `update`, which serializes them per store.
class CaptionStore {
public:
    CaptionStore() = default;
    explicit CaptionStore(std::map<std::string, CaptionSet> sets) : m_sets(std::move(sets)) {}
    CaptionStore(const CaptionStore& other);
    CaptionStore& operator=(const CaptionStore& other);

    static CaptionStore load(const std::filesystem::path& path);
    /// Returns an empty store when the file does not exist yet.
    static CaptionStore load_or_empty(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::optional<CaptionSet> get(const std::string& record_id) const;
    void put(CaptionSet set);
    CaptionSet update(const std::string& record_id, const std::function<CaptionSet(CaptionSet)>& fn);
    std::map<std::string, CaptionSet> snapshot() const;

private:
    mutable std::mutex m_mutex;
    std::map<std::string, CaptionSet> m_sets;
};

}  // namespace ccub
