// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ccub/io.hpp"

namespace ccub {

enum class Technique { finetuned, prompt_aug, combined };
enum class Metric { text_image_alignment, cultural_alignment, offensiveness, western_appearance };
enum class Side { left, right };
enum class Role { baseline, candidate };
enum class SurveyKind { standard, western_bias };

inline constexpr Technique kAllTechniques[] = {Technique::finetuned, Technique::prompt_aug, Technique::combined};
/// Asked for every question of a standard survey, in this order.
inline constexpr Metric kStandardMetrics[] = {
    Metric::text_image_alignment, Metric::cultural_alignment, Metric::offensiveness,
};

std::string_view to_string(Technique t) noexcept;
std::string_view to_string(Metric m) noexcept;
std::string_view to_string(Side s) noexcept;
std::string_view to_string(Role r) noexcept;
std::string_view to_string(SurveyKind k) noexcept;
std::optional<Technique> parse_technique(std::string_view s) noexcept;
std::optional<Metric> parse_metric(std::string_view s) noexcept;
std::optional<Side> parse_side(std::string_view s) noexcept;
std::optional<SurveyKind> parse_survey_kind(std::string_view s) noexcept;

/// Metrics asked per question for a survey of this kind.
std::vector<Metric> metrics_for(SurveyKind kind);

/// Question wording shown to participants.
std::string metric_prompt(Metric metric, const std::string& country);

/// One baseline-vs-candidate image pair to be judged.
struct ComparisonPair {
    std::string id;
    std::string baseline_image;
    std::string candidate_image;
    Technique technique = Technique::combined;
    std::string prompt_text;
    std::string country;
};

struct ComparisonQuestion {
    std::string id;
    std::string pair_id;
    std::string prompt_text;
    std::string country;
    std::string left_image;
    std::string right_image;
    /// Hidden assignment: role of the left image; the right image has the other role.
    Role left_role = Role::baseline;
    Technique candidate_technique = Technique::combined;
    SurveyKind kind = SurveyKind::standard;

    Role role_of(Side side) const noexcept;
    Side candidate_side() const noexcept;
    bool operator==(const ComparisonQuestion&) const = default;
};

json comparison_pair_to_json(const ComparisonPair& pair);
ComparisonPair comparison_pair_from_json(const json& obj);
/// Accepts a JSON array of pairs or an object with a "pairs" array.
std::vector<ComparisonPair> load_pairs(const std::filesystem::path& path);

/// Shuffles the pairs and flips a coin per question for left/right placement,
/// all from one mt19937_64(seed) stream.
std::vector<ComparisonQuestion> build_survey(const std::vector<ComparisonPair>& pairs, std::uint64_t seed,
                                             SurveyKind kind = SurveyKind::standard);

struct Survey {
    std::string id;
    SurveyKind kind = SurveyKind::standard;
    std::vector<ComparisonQuestion> questions;
    /// Optional per-participant subsets (participant id -> question ids).
    std::map<std::string, std::vector<std::string>> assignments;

    const ComparisonQuestion* find(const std::string& question_id) const;
};

json survey_to_json(const Survey& survey);
Survey survey_from_json(const json& doc);
Survey load_survey(const std::filesystem::path& path);
void save_survey(const Survey& survey, const std::filesystem::path& path);

struct Participant {
    std::string id;
    std::string culture_affiliation;
    bool consent = false;
};

struct SurveyResponse {
    std::string participant_id;
    std::string question_id;
    Metric metric = Metric::text_image_alignment;
    Side choice = Side::left;
    std::int64_t timestamp = 0;

    bool operator==(const SurveyResponse&) const = default;
};

json response_to_json(const SurveyResponse& r);
SurveyResponse response_from_json(const json& obj);

enum class RejectReason { none, no_consent, culture_mismatch, duplicate, metric_not_asked, invalid_choice, out_of_order };
std::string_view to_string(RejectReason r) noexcept;

struct RecordOutcome {
    bool accepted = false;
    RejectReason reason = RejectReason::none;

    static RecordOutcome ok() { return {true, RejectReason::none}; }
    static RecordOutcome rejected(RejectReason r) { return {false, r}; }
};

/// Append-only response log. With a path, every accepted response is also
/// appended to that file as one JSON line before `record` returns.
class ResponseStore {
public:
    ResponseStore() = default;
    explicit ResponseStore(std::filesystem::path log_path);
    ResponseStore(ResponseStore&& other) noexcept;

    /// Replays an existing log. A torn final line (no trailing newline and not
    /// parseable) is ignored.
    static ResponseStore replay(const std::filesystem::path& log_path);

    bool contains(const std::string& participant_id, const std::string& question_id, Metric metric) const;
    /// Inserts unless the (participant, question, metric) key is present.
    bool append(const SurveyResponse& response);
    std::vector<SurveyResponse> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex m_mutex;
    std::optional<std::filesystem::path> m_log_path;
    std::vector<SurveyResponse> m_responses;
    std::set<std::tuple<std::string, std::string, Metric>> m_keys;
};

/// Read-only view of a response log; a torn final line is skipped.
std::vector<SurveyResponse> read_response_log(const std::filesystem::path& path);

RecordOutcome record_response(const Participant& participant, const ComparisonQuestion& question, Metric metric,
                              Side choice, ResponseStore& store, std::int64_t timestamp = 0);

struct PreferenceTable {
    std::map<std::pair<Technique, Metric>, int> cells;
    std::map<std::pair<Technique, Metric>, long> n_comparisons;
    std::map<std::pair<Technique, Metric>, long> candidate_chosen;

    int percentage(Technique t, Metric m) const;
    long count(Technique t, Metric m) const;
    bool operator==(const PreferenceTable&) const = default;
};

/// 100 * k / n rounded half up; 0 when n == 0.
int percent_half_up(long k, long n);

/// Candidate-preference percentage per (technique, standard metric), pooled
/// over every response. Offensiveness stays raw: lower is better.
PreferenceTable compute_preferences(const std::vector<SurveyResponse>& responses,
                                    const std::vector<ComparisonQuestion>& questions);
std::map<std::string, PreferenceTable> compute_preferences_by_country(
    const std::vector<SurveyResponse>& responses, const std::vector<ComparisonQuestion>& questions);

json preference_table_to_json(const PreferenceTable& table);
std::string format_preference_table(const PreferenceTable& table);
std::string format_preference_csv(const PreferenceTable& table);

struct WesternBiasScore {
    /// Undefined (nullopt) when there are no comparisons.
    std::optional<int> percentage;
    long n_comparisons = 0;
    long n_participants = 0;
    long candidate_chosen = 0;
};

WesternBiasScore western_bias_score(const std::vector<SurveyResponse>& responses,
                                    const std::vector<ComparisonQuestion>& questions);
/// `percentage` is null when undefined.
json western_bias_to_json(const WesternBiasScore& score);

/// Opaque, stable image id for participant-facing payloads.
std::string opaque_image_id(const std::string& survey_id, const std::string& image_ref);

/// Everything a participant may see for one (question, metric).
struct ParticipantView {
    std::string question_id;
    std::string prompt_text;
    std::string left_image;
    std::string right_image;
    Metric metric = Metric::text_image_alignment;
    std::string metric_text;
    std::size_t answered = 0;
    std::size_t total = 0;
};

ParticipantView participant_view(const std::string& survey_id, const ComparisonQuestion& question, Metric metric,
                                  std::size_t answered, std::size_t total);
json participant_view_to_json(const ParticipantView& view);

}  // namespace ccub
