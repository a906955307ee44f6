// SPDX-License-Identifier: Apache-2.0
//
// Fixture builders shared by the unit tests and the acceptance binary. Every
// expected number here is computed independently of the library code.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccub/dataset.hpp"
#include "ccub/diffusion.hpp"
#include "ccub/digest.hpp"
#include "ccub/survey.hpp"

namespace ccub::testing {

inline std::filesystem::path fixture_dir() { return CCUB_FIXTURE_DIR; }
inline std::filesystem::path golden_dir() { return CCUB_GOLDEN_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() : m_path(std::filesystem::temp_directory_path() / ("ccub-test-" + random_token_hex(8))) {
        std::filesystem::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return m_path; }
    std::filesystem::path operator/(const std::string& name) const { return m_path / name; }

private:
    std::filesystem::path m_path;
};

// ---------------------------------------------------------------------------
// Dataset

/// Published per-cell image counts, countries in table order, categories in
/// kAllCategories order.
struct CountRow {
    const char* country;
    long counts[9];
    long total;
};

inline constexpr CountRow kPublishedCounts[] = {
    {"Korea", {55, 9, 10, 18, 3, 23, 12, 22, 7}, 159},
    {"Japan", {20, 7, 13, 15, 3, 11, 26, 13, 14}, 122},
    {"China", {25, 18, 6, 12, 7, 13, 20, 23, 10}, 134},
    {"Mexico", {22, 14, 23, 10, 6, 18, 19, 15, 7}, 134},
    {"Nigeria", {16, 19, 12, 11, 8, 19, 12, 31, 5}, 133},
    {"Norway", {24, 11, 7, 14, 5, 20, 18, 20, 13}, 132},
    {"Vietnam", {27, 14, 10, 15, 7, 14, 17, 16, 10}, 130},
    {"United States", {23, 10, 15, 12, 7, 17, 22, 29, 16}, 151},
};
inline constexpr long kPublishedColumnTotals[9] = {212, 102, 96, 107, 46, 135, 146, 169, 82};
inline constexpr long kPublishedGrandTotal = 1095;

inline CulturalRecord sample_record(const std::string& id = "ng-city-001", const std::string& country = "Nigeria") {
    CulturalRecord r;
    r.id = id;
    r.country = country;
    r.category = Category::city;
    r.era = Era::modern;
    r.image_ref = "images/" + id + ".jpg";
    r.image_hash = sha256_hex(id);
    r.caption = "a busy street in Ibadan, Nigeria";
    r.license = License::creative_commons;
    return r;
}

// ---------------------------------------------------------------------------
// Fine-tuning

/// Pinned setting under which the 16-record toy fixture converges.
inline TrainingConfig toy_training_config() {
    TrainingConfig c;
    c.learning_rate = 0.01;
    c.epochs = 150;
    c.batch_size = 4;
    c.seed = 0;
    c.T = 100;
    c.beta_start = 1e-4;
    c.beta_end = 0.2;
    c.optimizer = OptimizerKind::sgd;
    return c;
}

inline ToyBundleOptions toy_bundle_options(int T) {
    ToyBundleOptions o;
    o.T = T;
    return o;
}

// ---------------------------------------------------------------------------
// Preference scoring

/// Smallest k in [0, n] whose percentage 100k/n rounds half up to `target`,
/// found by scanning with the interval test
/// (2*target - 1) * n <= 200k < (2*target + 1) * n.
inline long brute_force_count(int target, long n) {
    for (long k = 0; k <= n; ++k) {
        if ((2L * target - 1) * n <= 200L * k && 200L * k < (2L * target + 1) * n) return k;
    }
    throw std::logic_error("no count rounds to the requested percentage");
}

struct ScoringFixture {
    Survey survey;
    std::vector<Participant> participants;
    std::vector<SurveyResponse> responses;
};

inline constexpr int kPublishedPreferences[3][3] = {
    {66, 67, 33},  // finetuned
    {43, 57, 50},  // prompt_aug
    {57, 71, 36},  // combined
};
inline constexpr long kComparisonsPerTechnique = 748;  // 2244 comparisons over three techniques
inline constexpr int kParticipants = 72;
inline constexpr const char* kSurveyCountries[] = {"China", "Mexico", "Korea", "United States", "Nigeria"};

inline std::vector<Participant> make_participants(int n, std::size_t n_countries) {
    std::vector<Participant> out;
    for (int i = 0; i < n; ++i) {
        out.push_back({"p" + std::to_string(i + 1), kSurveyCountries[static_cast<std::size_t>(i) % n_countries], true});
    }
    return out;
}

/// One response per (comparison, metric). Each comparison is answered by one
/// participant of the matching country. For technique row r and metric m the
/// first `brute_force_count(published[r][m], 748)` comparisons pick the
/// candidate; the rest pick the baseline.
inline ScoringFixture make_preference_fixture(const int (&published)[3][3], std::uint64_t seed) {
    ScoringFixture fx;
    fx.participants = make_participants(kParticipants, std::size(kSurveyCountries));

    std::vector<ComparisonPair> pairs;
    for (int r = 0; r < 3; ++r) {
        for (long j = 0; j < kComparisonsPerTechnique; ++j) {
            const auto& p = fx.participants[static_cast<std::size_t>(pairs.size()) % fx.participants.size()];
            const std::string id = "t" + std::to_string(r) + "-c" + std::to_string(j);
            pairs.push_back({id, "img/" + id + "-a.png", "img/" + id + "-b.png", kAllTechniques[r],
                             "prompt " + std::to_string(j), p.culture_affiliation});
        }
    }
    fx.survey.id = "table3";
    fx.survey.questions = build_survey(pairs, seed);

    // Recover the (technique row, ordinal) of each question from its pair id.
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& q = *std::find_if(fx.survey.questions.begin(), fx.survey.questions.end(),
                                      [&](const ComparisonQuestion& x) { return x.pair_id == pairs[i].id; });
        const int r = static_cast<int>(i / kComparisonsPerTechnique);
        const long j = static_cast<long>(i % kComparisonsPerTechnique);
        const auto& who = fx.participants[i % fx.participants.size()];
        for (int m = 0; m < 3; ++m) {
            const bool pick_candidate = j < brute_force_count(published[r][m], kComparisonsPerTechnique);
            const Side cand = q.left_role == Role::candidate ? Side::left : Side::right;
            const Side other = cand == Side::left ? Side::right : Side::left;
            fx.responses.push_back({who.id, q.id, kStandardMetrics[m], pick_candidate ? cand : other,
                                    static_cast<std::int64_t>(fx.responses.size())});
        }
    }
    return fx;
}

/// 218 western-appearance comparisons by 12 participants; the candidate is
/// picked as more Western in 157 of them.
inline constexpr long kWesternComparisons = 218;
inline constexpr long kWesternParticipants = 12;
inline constexpr long kWesternCandidateChosen = 157;

inline ScoringFixture make_western_bias_fixture(std::uint64_t seed) {
    ScoringFixture fx;
    fx.participants = make_participants(static_cast<int>(kWesternParticipants), std::size(kSurveyCountries));
    std::vector<ComparisonPair> pairs;
    for (long j = 0; j < kWesternComparisons; ++j) {
        const auto& p = fx.participants[static_cast<std::size_t>(j) % fx.participants.size()];
        const std::string id = "w" + std::to_string(j);
        pairs.push_back({id, "img/" + id + "-a.png", "img/" + id + "-b.png", Technique::combined,
                         "prompt " + std::to_string(j), p.culture_affiliation});
    }
    fx.survey.id = "western";
    fx.survey.kind = SurveyKind::western_bias;
    fx.survey.questions = build_survey(pairs, seed, SurveyKind::western_bias);
    for (long j = 0; j < kWesternComparisons; ++j) {
        const auto& q = *std::find_if(fx.survey.questions.begin(), fx.survey.questions.end(),
                                      [&](const ComparisonQuestion& x) { return x.pair_id == pairs[j].id; });
        const Side cand = q.left_role == Role::candidate ? Side::left : Side::right;
        const Side other = cand == Side::left ? Side::right : Side::left;
        fx.responses.push_back({fx.participants[static_cast<std::size_t>(j) % fx.participants.size()].id, q.id,
                                Metric::western_appearance, j < kWesternCandidateChosen ? cand : other, j});
    }
    return fx;
}

/// Mirror image of a survey: every question has its sides swapped and every
/// response its choice flipped. Scores must not change.
inline ScoringFixture relabel_sides(ScoringFixture fx) {
    for (auto& q : fx.survey.questions) {
        std::swap(q.left_image, q.right_image);
        q.left_role = q.left_role == Role::candidate ? Role::baseline : Role::candidate;
    }
    for (auto& r : fx.responses) r.choice = r.choice == Side::left ? Side::right : Side::left;
    return fx;
}

// ---------------------------------------------------------------------------
// Blinding

/// Strings that would reveal which image is which if they reached a participant.
inline std::vector<std::string> assignment_markers(const Survey& survey) {
    std::vector<std::string> markers = {"baseline", "candidate", "finetuned", "fine_tuned", "prompt_aug", "combined",
                                        "technique", "left_role", "role", "assignment", "pair_id"};
    for (const auto& q : survey.questions) {
        markers.push_back(q.pair_id);
        markers.push_back(q.left_image);
        markers.push_back(q.right_image);
    }
    return markers;
}

}  // namespace ccub::testing
