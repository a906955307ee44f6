// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ccub/error.hpp"
#include "ccub/survey.hpp"

namespace httplib {
class Server;
}

namespace ccub {

class NotFoundError : public Error {
public:
    using Error::Error;
};

class UnauthorizedError : public Error {
public:
    using Error::Error;
};

/// Participant is not eligible for the survey (no consent, wrong culture).
class ForbiddenError : public Error {
public:
    using Error::Error;
};

struct Session {
    std::string token;
    Participant participant;
    std::string survey_id;
    /// (question, metric) items in presentation order.
    std::vector<std::pair<std::string, Metric>> items;
    std::int64_t created_at = 0;
};

struct SubmitOutcome {
    bool accepted = false;
    RejectReason reason = RejectReason::none;
};

/// Blinded survey sessions over a data directory:
///   <data>/surveys/<id>.json          survey definitions (admin-only)
///   <data>/logs/<id>.responses.jsonl  append-only response log
///   <data>/logs/<id>.sessions.jsonl   append-only session log
///   <data>/logs/<id>.snapshot.json    periodic aggregate snapshot
/// The response log is the source of truth; sessions and cursors are rebuilt
/// from the logs at start-up.
class SurveyService {
public:
    using Clock = std::function<std::int64_t()>;

    SurveyService(std::filesystem::path data_dir, std::string admin_token, Clock clock = {});
    ~SurveyService();

    /// Registers and persists a survey definition.
    void add_survey(const Survey& survey);
    std::vector<std::string> survey_ids() const;

    Session create_session(const Participant& participant, const std::string& survey_id);
    /// nullopt once every item of the session has an accepted response.
    std::optional<ParticipantView> next_question(const std::string& token) const;
    SubmitOutcome submit_response(const std::string& token, const std::string& question_id,
                                  const std::string& metric, const std::string& choice);
    PreferenceTable aggregate(const std::string& survey_id, const std::string& credential) const;
    WesternBiasScore western_bias(const std::string& survey_id, const std::string& credential) const;

    /// File behind an opaque image id, for static serving. Relative image refs
    /// resolve against the data directory.
    std::optional<std::filesystem::path> image_path(const std::string& survey_id, const std::string& image_id) const;

    std::size_t snapshot_interval = 100;

private:
    struct SurveyState;

    SurveyState& state(const std::string& survey_id);
    const SurveyState& state(const std::string& survey_id) const;
    std::size_t cursor_of(const SurveyState& st, const Session& s) const;
    void load_survey_state(const Survey& survey);
    void write_snapshot(const SurveyState& st) const;
    void check_admin(const std::string& credential) const;

    std::filesystem::path m_data_dir;
    std::string m_admin_token;
    Clock m_clock;
    mutable std::mutex m_mutex;
    std::map<std::string, std::unique_ptr<SurveyState>> m_surveys;
    std::map<std::string, Session> m_sessions;
};

/// Binds the JSON API onto `server`:
///   POST /sessions                    {participant_id, culture_affiliation, consent, survey_id}
///   GET  /sessions/{token}/next
///   POST /sessions/{token}/responses  {question_id, metric, choice}
///   GET  /surveys/{id}/aggregate      Authorization: Bearer <admin token>
///   GET  /images/{survey}/{image_id}
void mount_survey_api(httplib::Server& server, SurveyService& service);

}  // namespace ccub
