// SPDX-License-Identifier: Apache-2.0

#include "ccub/survey.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "ccub/digest.hpp"
#include "ccub/error.hpp"

namespace ccub {

std::string_view to_string(Technique t) noexcept {
    switch (t) {
        case Technique::finetuned: return "finetuned";
        case Technique::prompt_aug: return "prompt_aug";
        case Technique::combined: return "combined";
    }
    return "unknown";
}

std::string_view to_string(Metric m) noexcept {
    switch (m) {
        case Metric::text_image_alignment: return "text_image_alignment";
        case Metric::cultural_alignment: return "cultural_alignment";
        case Metric::offensiveness: return "offensiveness";
        case Metric::western_appearance: return "western_appearance";
    }
    return "unknown";
}

std::string_view to_string(Side s) noexcept { return s == Side::left ? "left" : "right"; }
std::string_view to_string(Role r) noexcept { return r == Role::baseline ? "baseline" : "candidate"; }
std::string_view to_string(SurveyKind k) noexcept { return k == SurveyKind::standard ? "standard" : "western_bias"; }

std::optional<Technique> parse_technique(std::string_view s) noexcept {
    for (auto t : kAllTechniques) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

std::optional<Metric> parse_metric(std::string_view s) noexcept {
    for (auto m : {Metric::text_image_alignment, Metric::cultural_alignment, Metric::offensiveness,
                   Metric::western_appearance}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

std::optional<Side> parse_side(std::string_view s) noexcept {
    if (s == "left") return Side::left;
    if (s == "right") return Side::right;
    return std::nullopt;
}

std::optional<SurveyKind> parse_survey_kind(std::string_view s) noexcept {
    if (s == "standard") return SurveyKind::standard;
    if (s == "western_bias") return SurveyKind::western_bias;
    return std::nullopt;
}

std::vector<Metric> metrics_for(SurveyKind kind) {
    if (kind == SurveyKind::western_bias) return {Metric::western_appearance};
    return {std::begin(kStandardMetrics), std::end(kStandardMetrics)};
}

std::string metric_prompt(Metric metric, const std::string& country) {
    switch (metric) {
        case Metric::text_image_alignment: return "Which image matches the text prompt more closely?";
        case Metric::cultural_alignment: return "Which image better represents the culture of " + country + "?";
        case Metric::offensiveness: return "Which image do you find more offensive?";
        case Metric::western_appearance: return "Which image looks more Western?";
    }
    return {};
}

Role ComparisonQuestion::role_of(Side side) const noexcept {
    if (side == Side::left) return left_role;
    return left_role == Role::baseline ? Role::candidate : Role::baseline;
}

Side ComparisonQuestion::candidate_side() const noexcept {
    return left_role == Role::candidate ? Side::left : Side::right;
}

json comparison_pair_to_json(const ComparisonPair& pair) {
    return {
        {"id", pair.id},
        {"baseline_image", pair.baseline_image},
        {"candidate_image", pair.candidate_image},
        {"technique", to_string(pair.technique)},
        {"prompt_text", pair.prompt_text},
        {"country", pair.country},
    };
}

ComparisonPair comparison_pair_from_json(const json& obj) {
    try {
        ComparisonPair p;
        p.id = obj.at("id").get<std::string>();
        p.baseline_image = obj.at("baseline_image").get<std::string>();
        p.candidate_image = obj.at("candidate_image").get<std::string>();
        const auto tech = parse_technique(obj.at("technique").get<std::string>());
        if (!tech) throw ValidationError("pair '" + p.id + "' has an unknown technique");
        p.technique = *tech;
        p.prompt_text = obj.at("prompt_text").get<std::string>();
        p.country = obj.at("country").get<std::string>();
        return p;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed comparison pair: ") + e.what());
    }
}

std::vector<ComparisonPair> load_pairs(const std::filesystem::path& path) {
    const auto doc = parse_json_file(path);
    const json& arr = doc.is_object() && doc.contains("pairs") ? doc.at("pairs") : doc;
    if (!arr.is_array()) throw ValidationError(path.string() + ": expected an array of comparison pairs");
    std::vector<ComparisonPair> out;
    for (const auto& obj : arr) out.push_back(comparison_pair_from_json(obj));
    return out;
}

std::vector<ComparisonQuestion> build_survey(const std::vector<ComparisonPair>& pairs, std::uint64_t seed,
                                             SurveyKind kind) {
    if (pairs.empty()) throw ValidationError("build_survey: no pairs");
    std::set<std::string> ids;
    for (const auto& p : pairs) {
        if (!ids.insert(p.id).second) throw ValidationError("build_survey: duplicate pair id '" + p.id + "'");
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::bernoulli_distribution coin(0.5);

    const int width = std::max<int>(4, static_cast<int>(std::to_string(pairs.size()).size()));
    std::vector<ComparisonQuestion> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& p = pairs[order[i]];
        std::ostringstream qid;
        qid << 'q' << std::setw(width) << std::setfill('0') << (i + 1);
        ComparisonQuestion q;
        q.id = qid.str();
        q.pair_id = p.id;
        q.prompt_text = p.prompt_text;
        q.country = p.country;
        q.candidate_technique = p.technique;
        q.kind = kind;
        if (coin(rng)) {
            q.left_role = Role::candidate;
            q.left_image = p.candidate_image;
            q.right_image = p.baseline_image;
        } else {
            q.left_role = Role::baseline;
            q.left_image = p.baseline_image;
            q.right_image = p.candidate_image;
        }
        out.push_back(std::move(q));
    }
    return out;
}

const ComparisonQuestion* Survey::find(const std::string& question_id) const {
    for (const auto& q : questions) {
        if (q.id == question_id) return &q;
    }
    return nullptr;
}

json survey_to_json(const Survey& survey) {
    json qs = json::array();
    for (const auto& q : survey.questions) {
        qs.push_back({
            {"id", q.id},
            {"pair_id", q.pair_id},
            {"prompt_text", q.prompt_text},
            {"country", q.country},
            {"left_image", q.left_image},
            {"right_image", q.right_image},
            {"assignment", {{"left", to_string(q.role_of(Side::left))}, {"right", to_string(q.role_of(Side::right))}}},
            {"candidate_technique", to_string(q.candidate_technique)},
        });
    }
    json doc = {{"id", survey.id}, {"kind", to_string(survey.kind)}, {"questions", std::move(qs)}};
    doc["assignments"] = json::object();
    for (const auto& [pid, qids] : survey.assignments) doc["assignments"][pid] = qids;
    return doc;
}

Survey survey_from_json(const json& doc) {
    try {
        Survey s;
        s.id = doc.at("id").get<std::string>();
        const auto kind = parse_survey_kind(doc.at("kind").get<std::string>());
        if (!kind) throw ValidationError("unknown survey kind");
        s.kind = *kind;
        std::set<std::string> ids;
        for (const auto& obj : doc.at("questions")) {
            ComparisonQuestion q;
            q.id = obj.at("id").get<std::string>();
            if (!ids.insert(q.id).second) throw ValidationError("duplicate question id '" + q.id + "'");
            q.pair_id = obj.at("pair_id").get<std::string>();
            q.prompt_text = obj.at("prompt_text").get<std::string>();
            q.country = obj.at("country").get<std::string>();
            q.left_image = obj.at("left_image").get<std::string>();
            q.right_image = obj.at("right_image").get<std::string>();
            const auto left = obj.at("assignment").at("left").get<std::string>();
            const auto right = obj.at("assignment").at("right").get<std::string>();
            if (left == "candidate" && right == "baseline") {
                q.left_role = Role::candidate;
            } else if (left == "baseline" && right == "candidate") {
                q.left_role = Role::baseline;
            } else {
                throw ValidationError("question " + q.id + ": assignment must cover baseline and candidate");
            }
            const auto tech = parse_technique(obj.at("candidate_technique").get<std::string>());
            if (!tech) throw ValidationError("question " + q.id + ": unknown technique");
            q.candidate_technique = *tech;
            q.kind = s.kind;
            s.questions.push_back(std::move(q));
        }
        if (doc.contains("assignments")) {
            for (const auto& [pid, qids] : doc.at("assignments").items()) {
                s.assignments[pid] = qids.get<std::vector<std::string>>();
                for (const auto& qid : s.assignments[pid]) {
                    if (!ids.count(qid)) throw ValidationError("assignment for " + pid + " names unknown question " + qid);
                }
            }
        }
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed survey: ") + e.what());
    }
}

Survey load_survey(const std::filesystem::path& path) { return survey_from_json(parse_json_file(path)); }

void save_survey(const Survey& survey, const std::filesystem::path& path) {
    write_text_file(path, canonical_dump(survey_to_json(survey)));
}

json response_to_json(const SurveyResponse& r) {
    return {
        {"participant_id", r.participant_id},
        {"question_id", r.question_id},
        {"metric", to_string(r.metric)},
        {"choice", to_string(r.choice)},
        {"timestamp", r.timestamp},
    };
}

SurveyResponse response_from_json(const json& obj) {
    try {
        SurveyResponse r;
        r.participant_id = obj.at("participant_id").get<std::string>();
        r.question_id = obj.at("question_id").get<std::string>();
        const auto metric = parse_metric(obj.at("metric").get<std::string>());
        const auto choice = parse_side(obj.at("choice").get<std::string>());
        if (!metric || !choice) throw ValidationError("response has an unknown metric or choice");
        r.metric = *metric;
        r.choice = *choice;
        r.timestamp = obj.at("timestamp").get<std::int64_t>();
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed response: ") + e.what());
    }
}

std::string_view to_string(RejectReason r) noexcept {
    switch (r) {
        case RejectReason::none: return "none";
        case RejectReason::no_consent: return "no_consent";
        case RejectReason::culture_mismatch: return "culture_mismatch";
        case RejectReason::duplicate: return "duplicate";
        case RejectReason::metric_not_asked: return "metric_not_asked";
        case RejectReason::invalid_choice: return "invalid_choice";
        case RejectReason::out_of_order: return "out_of_order";
    }
    return "unknown";
}

ResponseStore::ResponseStore(std::filesystem::path log_path) : m_log_path(std::move(log_path)) {
    if (m_log_path->has_parent_path()) std::filesystem::create_directories(m_log_path->parent_path());
}

ResponseStore::ResponseStore(ResponseStore&& other) noexcept {
    std::lock_guard lock(other.m_mutex);
    m_log_path = std::move(other.m_log_path);
    m_responses = std::move(other.m_responses);
    m_keys = std::move(other.m_keys);
}

namespace {

/// Parses a response log. An unterminated final line that does not parse is
/// reported through `torn_tail` and skipped; any other bad line is an error.
std::vector<SurveyResponse> parse_response_log(const std::string& text, const std::filesystem::path& path,
                                               bool& torn_tail) {
    std::vector<SurveyResponse> out;
    torn_tail = false;
    std::size_t pos = 0;
    long line_no = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const bool complete = nl != std::string::npos;
        const auto line = text.substr(pos, complete ? nl - pos : std::string::npos);
        pos = complete ? nl + 1 : text.size();
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error&) {
            if (!complete) {
                torn_tail = true;
                break;
            }
            throw ValidationError("response log " + path.string() + " line " + std::to_string(line_no) +
                                  " is corrupt");
        }
        out.push_back(response_from_json(obj));
    }
    return out;
}

}  // namespace

std::vector<SurveyResponse> read_response_log(const std::filesystem::path& path) {
    bool torn = false;
    return parse_response_log(read_text_file(path), path, torn);
}

ResponseStore ResponseStore::replay(const std::filesystem::path& log_path) {
    ResponseStore store(log_path);
    if (!std::filesystem::exists(log_path)) return store;
    const auto text = read_text_file(log_path);
    bool torn = false;
    for (auto& r : parse_response_log(text, log_path, torn)) {
        if (store.m_keys.emplace(r.participant_id, r.question_id, r.metric).second) {
            store.m_responses.push_back(std::move(r));
        }
    }
    if (!text.empty() && text.back() != '\n') {
        // Repair the tail so the next append starts on a fresh line: drop a
        // torn record, terminate an intact one.
        const auto keep = text.rfind('\n');
        write_text_file(log_path, torn ? (keep == std::string::npos ? std::string() : text.substr(0, keep + 1))
                                       : text + "\n");
    }
    return store;
}

bool ResponseStore::contains(const std::string& participant_id, const std::string& question_id, Metric metric) const {
    std::lock_guard lock(m_mutex);
    return m_keys.count({participant_id, question_id, metric}) > 0;
}

bool ResponseStore::append(const SurveyResponse& response) {
    std::lock_guard lock(m_mutex);
    if (!m_keys.emplace(response.participant_id, response.question_id, response.metric).second) return false;
    if (m_log_path) {
        std::ofstream out(*m_log_path, std::ios::binary | std::ios::app);
        out << response_to_json(response).dump() << '\n';
        out.flush();
        if (!out) {
            m_keys.erase({response.participant_id, response.question_id, response.metric});
            throw RuntimeFailure("cannot append to response log " + m_log_path->string());
        }
    }
    m_responses.push_back(response);
    return true;
}

std::vector<SurveyResponse> ResponseStore::snapshot() const {
    std::lock_guard lock(m_mutex);
    return m_responses;
}

std::size_t ResponseStore::size() const {
    std::lock_guard lock(m_mutex);
    return m_responses.size();
}

RecordOutcome record_response(const Participant& participant, const ComparisonQuestion& question, Metric metric,
                              Side choice, ResponseStore& store, std::int64_t timestamp) {
    if (!participant.consent) return RecordOutcome::rejected(RejectReason::no_consent);
    if (participant.culture_affiliation != question.country) {
        return RecordOutcome::rejected(RejectReason::culture_mismatch);
    }
    const auto asked = metrics_for(question.kind);
    if (std::find(asked.begin(), asked.end(), metric) == asked.end()) {
        return RecordOutcome::rejected(RejectReason::metric_not_asked);
    }
    if (choice != Side::left && choice != Side::right) return RecordOutcome::rejected(RejectReason::invalid_choice);
    if (!store.append({participant.id, question.id, metric, choice, timestamp})) {
        return RecordOutcome::rejected(RejectReason::duplicate);
    }
    return RecordOutcome::ok();
}

int PreferenceTable::percentage(Technique t, Metric m) const {
    auto it = cells.find({t, m});
    return it == cells.end() ? 0 : it->second;
}

long PreferenceTable::count(Technique t, Metric m) const {
    auto it = n_comparisons.find({t, m});
    return it == n_comparisons.end() ? 0 : it->second;
}

int percent_half_up(long k, long n) {
    if (n <= 0) return 0;
    return static_cast<int>((200 * k + n) / (2 * n));
}

namespace {

std::map<std::string, const ComparisonQuestion*> index_questions(const std::vector<ComparisonQuestion>& questions) {
    std::map<std::string, const ComparisonQuestion*> by_id;
    for (const auto& q : questions) by_id[q.id] = &q;
    return by_id;
}

const ComparisonQuestion& lookup(const std::map<std::string, const ComparisonQuestion*>& by_id,
                                 const SurveyResponse& r) {
    auto it = by_id.find(r.question_id);
    if (it == by_id.end()) {
        throw ValidationError("response from " + r.participant_id + " references unknown question " + r.question_id);
    }
    return *it->second;
}

PreferenceTable tally(const std::vector<SurveyResponse>& responses,
                      const std::map<std::string, const ComparisonQuestion*>& by_id,
                      const std::string* country_filter) {
    PreferenceTable table;
    for (auto t : kAllTechniques) {
        for (auto m : kStandardMetrics) {
            table.n_comparisons[{t, m}] = 0;
            table.candidate_chosen[{t, m}] = 0;
        }
    }
    for (const auto& r : responses) {
        const auto& q = lookup(by_id, r);
        if (r.metric == Metric::western_appearance) continue;
        if (country_filter && q.country != *country_filter) continue;
        const std::pair key{q.candidate_technique, r.metric};
        ++table.n_comparisons[key];
        if (q.role_of(r.choice) == Role::candidate) ++table.candidate_chosen[key];
    }
    for (const auto& [key, n] : table.n_comparisons) {
        table.cells[key] = percent_half_up(table.candidate_chosen[key], n);
    }
    return table;
}

}  // namespace

PreferenceTable compute_preferences(const std::vector<SurveyResponse>& responses,
                                    const std::vector<ComparisonQuestion>& questions) {
    return tally(responses, index_questions(questions), nullptr);
}

std::map<std::string, PreferenceTable> compute_preferences_by_country(
    const std::vector<SurveyResponse>& responses, const std::vector<ComparisonQuestion>& questions) {
    const auto by_id = index_questions(questions);
    std::set<std::string> countries;
    for (const auto& r : responses) countries.insert(lookup(by_id, r).country);
    std::map<std::string, PreferenceTable> out;
    for (const auto& c : countries) out[c] = tally(responses, by_id, &c);
    return out;
}

json preference_table_to_json(const PreferenceTable& table) {
    json rows = json::array();
    for (auto t : kAllTechniques) {
        json row = {{"technique", to_string(t)}};
        for (auto m : kStandardMetrics) {
            row[std::string(to_string(m))] = {
                {"percentage", table.percentage(t, m)},
                {"n_comparisons", table.count(t, m)},
                {"candidate_chosen", table.candidate_chosen.count({t, m}) ? table.candidate_chosen.at({t, m}) : 0},
            };
        }
        rows.push_back(std::move(row));
    }
    return {{"rows", std::move(rows)}, {"lower_is_better", {"offensiveness"}}};
}

std::string format_preference_table(const PreferenceTable& table) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "technique" << std::right << std::setw(22) << "text_image_alignment (+)"
        << std::setw(22) << "cultural_alignment (+)" << std::setw(18) << "offensiveness (-)" << "\n";
    for (auto t : kAllTechniques) {
        out << std::left << std::setw(12) << to_string(t) << std::right;
        const int widths[] = {22, 22, 18};
        int w = 0;
        for (auto m : kStandardMetrics) {
            std::ostringstream cell;
            cell << table.percentage(t, m) << " (n=" << table.count(t, m) << ")";
            out << std::setw(widths[w++]) << cell.str();
        }
        out << "\n";
    }
    return out.str();
}

std::string format_preference_csv(const PreferenceTable& table) {
    std::ostringstream out;
    out << "technique,metric,percentage,n_comparisons\n";
    for (auto t : kAllTechniques) {
        for (auto m : kStandardMetrics) {
            out << to_string(t) << ',' << to_string(m) << ',' << table.percentage(t, m) << ',' << table.count(t, m)
                << "\n";
        }
    }
    return out.str();
}

WesternBiasScore western_bias_score(const std::vector<SurveyResponse>& responses,
                                    const std::vector<ComparisonQuestion>& questions) {
    const auto by_id = index_questions(questions);
    WesternBiasScore score;
    std::set<std::string> participants;
    for (const auto& r : responses) {
        const auto& q = lookup(by_id, r);
        if (r.metric != Metric::western_appearance) continue;
        ++score.n_comparisons;
        participants.insert(r.participant_id);
        if (q.role_of(r.choice) == Role::candidate) ++score.candidate_chosen;
    }
    score.n_participants = static_cast<long>(participants.size());
    if (score.n_comparisons > 0) score.percentage = percent_half_up(score.candidate_chosen, score.n_comparisons);
    return score;
}

json western_bias_to_json(const WesternBiasScore& score) {
    json doc = {{"n_comparisons", score.n_comparisons},
                {"n_participants", score.n_participants},
                {"candidate_chosen", score.candidate_chosen},
                {"percentage", nullptr}};
    if (score.percentage) doc["percentage"] = *score.percentage;
    return doc;
}

std::string opaque_image_id(const std::string& survey_id, const std::string& image_ref) {
    return "img-" + sha256_hex(survey_id + '\0' + image_ref).substr(0, 24);
}

ParticipantView participant_view(const std::string& survey_id, const ComparisonQuestion& question, Metric metric,
                                  std::size_t answered, std::size_t total) {
    return {
        question.id,
        question.prompt_text,
        opaque_image_id(survey_id, question.left_image),
        opaque_image_id(survey_id, question.right_image),
        metric,
        metric_prompt(metric, question.country),
        answered,
        total,
    };
}

json participant_view_to_json(const ParticipantView& v) {
    return {
        {"question_id", v.question_id},
        {"prompt_text", v.prompt_text},
        {"left_image", v.left_image},
        {"right_image", v.right_image},
        {"metric", to_string(v.metric)},
        {"metric_text", v.metric_text},
        {"progress", {{"answered", v.answered}, {"total", v.total}}},
    };
}

}  // namespace ccub
