// SPDX-License-Identifier: Apache-2.0

#include "ccub/survey_service.hpp"

#include <httplib.h>

#include <chrono>
#include <fstream>

#include "ccub/digest.hpp"

namespace ccub {

struct SurveyService::SurveyState {
    Survey survey;
    std::map<std::string, const ComparisonQuestion*> by_id;
    std::map<std::string, std::string> images;  // opaque id -> image ref
    std::unique_ptr<ResponseStore> store;
    std::filesystem::path sessions_log;
    std::filesystem::path snapshot_path;
    std::size_t last_snapshot = 0;
    std::mutex session_mutex;
};

namespace {

std::int64_t wall_clock() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

json session_to_json(const Session& s) {
    return {
        {"token", s.token},
        {"participant_id", s.participant.id},
        {"culture_affiliation", s.participant.culture_affiliation},
        {"consent", s.participant.consent},
        {"survey_id", s.survey_id},
        {"created_at", s.created_at},
    };
}

std::vector<std::pair<std::string, Metric>> session_items(const Survey& survey, const Participant& p) {
    std::vector<const ComparisonQuestion*> chosen;
    if (auto it = survey.assignments.find(p.id); it != survey.assignments.end()) {
        for (const auto& qid : it->second) chosen.push_back(survey.find(qid));
    } else {
        for (const auto& q : survey.questions) chosen.push_back(&q);
    }
    std::vector<std::pair<std::string, Metric>> items;
    for (const auto* q : chosen) {
        if (q->country != p.culture_affiliation) continue;
        for (auto m : metrics_for(survey.kind)) items.emplace_back(q->id, m);
    }
    return items;
}

}  // namespace

SurveyService::SurveyService(std::filesystem::path data_dir, std::string admin_token, Clock clock)
    : m_data_dir(std::move(data_dir)), m_admin_token(std::move(admin_token)), m_clock(std::move(clock)) {
    if (m_admin_token.empty()) throw ValidationError("survey service needs a nonempty admin token");
    if (!m_clock) m_clock = wall_clock;
    std::filesystem::create_directories(m_data_dir / "surveys");
    std::filesystem::create_directories(m_data_dir / "logs");
    for (const auto& entry : std::filesystem::directory_iterator(m_data_dir / "surveys")) {
        if (entry.path().extension() == ".json") load_survey_state(load_survey(entry.path()));
    }
}

SurveyService::~SurveyService() = default;

void SurveyService::load_survey_state(const Survey& survey) {
    auto st = std::make_unique<SurveyState>();
    st->survey = survey;
    for (const auto& q : st->survey.questions) {
        st->by_id[q.id] = &q;
        st->images[opaque_image_id(survey.id, q.left_image)] = q.left_image;
        st->images[opaque_image_id(survey.id, q.right_image)] = q.right_image;
    }
    const auto logs = m_data_dir / "logs";
    st->store = std::make_unique<ResponseStore>(ResponseStore::replay(logs / (survey.id + ".responses.jsonl")));
    st->sessions_log = logs / (survey.id + ".sessions.jsonl");
    st->snapshot_path = logs / (survey.id + ".snapshot.json");
    st->last_snapshot = st->store->size();

    if (std::filesystem::exists(st->sessions_log)) {
        std::ifstream in(st->sessions_log);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::parse_error&) {
                continue;  // torn tail
            }
            Session s;
            s.token = obj.at("token").get<std::string>();
            s.participant = {obj.at("participant_id").get<std::string>(),
                             obj.at("culture_affiliation").get<std::string>(), obj.at("consent").get<bool>()};
            s.survey_id = survey.id;
            s.created_at = obj.at("created_at").get<std::int64_t>();
            s.items = session_items(st->survey, s.participant);
            m_sessions[s.token] = std::move(s);
        }
    }
    m_surveys[survey.id] = std::move(st);
}

void SurveyService::add_survey(const Survey& survey) {
    std::lock_guard lock(m_mutex);
    if (m_surveys.count(survey.id)) throw ValidationError("survey '" + survey.id + "' already exists");
    save_survey(survey, m_data_dir / "surveys" / (survey.id + ".json"));
    load_survey_state(survey);
}

std::vector<std::string> SurveyService::survey_ids() const {
    std::lock_guard lock(m_mutex);
    std::vector<std::string> ids;
    for (const auto& [id, _] : m_surveys) ids.push_back(id);
    return ids;
}

SurveyService::SurveyState& SurveyService::state(const std::string& survey_id) {
    auto it = m_surveys.find(survey_id);
    if (it == m_surveys.end()) throw NotFoundError("unknown survey '" + survey_id + "'");
    return *it->second;
}

const SurveyService::SurveyState& SurveyService::state(const std::string& survey_id) const {
    auto it = m_surveys.find(survey_id);
    if (it == m_surveys.end()) throw NotFoundError("unknown survey '" + survey_id + "'");
    return *it->second;
}

Session SurveyService::create_session(const Participant& participant, const std::string& survey_id) {
    std::lock_guard lock(m_mutex);
    auto& st = state(survey_id);
    if (!participant.consent) throw ForbiddenError("participant has not given consent");
    if (participant.id.empty()) throw ValidationError("participant id is empty");
    Session s;
    s.participant = participant;
    s.survey_id = survey_id;
    s.items = session_items(st.survey, participant);
    if (s.items.empty()) {
        throw ForbiddenError("no questions in survey '" + survey_id + "' for culture '" +
                             participant.culture_affiliation + "'");
    }
    s.token = random_token_hex(16);
    s.created_at = m_clock();
    {
        std::ofstream out(st.sessions_log, std::ios::binary | std::ios::app);
        out << session_to_json(s).dump() << '\n';
        if (!out) throw RuntimeFailure("cannot append to session log");
    }
    m_sessions[s.token] = s;
    return s;
}

std::size_t SurveyService::cursor_of(const SurveyState& st, const Session& s) const {
    std::size_t i = 0;
    while (i < s.items.size() && st.store->contains(s.participant.id, s.items[i].first, s.items[i].second)) ++i;
    return i;
}

std::optional<ParticipantView> SurveyService::next_question(const std::string& token) const {
    std::lock_guard lock(m_mutex);
    auto it = m_sessions.find(token);
    if (it == m_sessions.end()) throw NotFoundError("invalid session token");
    const auto& s = it->second;
    const auto& st = state(s.survey_id);
    const std::size_t cursor = cursor_of(st, s);
    if (cursor >= s.items.size()) return std::nullopt;
    const auto& [qid, metric] = s.items[cursor];
    return participant_view(s.survey_id, *st.by_id.at(qid), metric, cursor, s.items.size());
}

SubmitOutcome SurveyService::submit_response(const std::string& token, const std::string& question_id,
                                             const std::string& metric_name, const std::string& choice_name) {
    std::unique_lock lock(m_mutex);
    auto it = m_sessions.find(token);
    if (it == m_sessions.end()) throw NotFoundError("invalid session token");
    const Session& s = it->second;
    auto& st = state(s.survey_id);

    const auto choice = parse_side(choice_name);
    const auto metric = parse_metric(metric_name);
    if (!choice || !metric) return {false, RejectReason::invalid_choice};

    std::lock_guard session_lock(st.session_mutex);
    if (st.store->contains(s.participant.id, question_id, *metric)) return {false, RejectReason::duplicate};
    const std::size_t cursor = cursor_of(st, s);
    if (cursor >= s.items.size() || s.items[cursor].first != question_id || s.items[cursor].second != *metric) {
        return {false, RejectReason::out_of_order};
    }
    const auto outcome =
        record_response(s.participant, *st.by_id.at(question_id), *metric, *choice, *st.store, m_clock());
    if (outcome.accepted && st.store->size() >= st.last_snapshot + snapshot_interval) {
        write_snapshot(st);
        st.last_snapshot = st.store->size();
    }
    return {outcome.accepted, outcome.reason};
}

void SurveyService::write_snapshot(const SurveyState& st) const {
    const auto responses = st.store->snapshot();
    json doc = {{"survey_id", st.survey.id}, {"n_responses", responses.size()}};
    if (st.survey.kind == SurveyKind::standard) {
        doc["table"] = preference_table_to_json(compute_preferences(responses, st.survey.questions));
    }
    write_text_file(st.snapshot_path, canonical_dump(doc));
}

void SurveyService::check_admin(const std::string& credential) const {
    if (credential != m_admin_token) throw UnauthorizedError("admin credential required");
}

PreferenceTable SurveyService::aggregate(const std::string& survey_id, const std::string& credential) const {
    std::lock_guard lock(m_mutex);
    check_admin(credential);
    const auto& st = state(survey_id);
    return compute_preferences(st.store->snapshot(), st.survey.questions);
}

WesternBiasScore SurveyService::western_bias(const std::string& survey_id, const std::string& credential) const {
    std::lock_guard lock(m_mutex);
    check_admin(credential);
    const auto& st = state(survey_id);
    return western_bias_score(st.store->snapshot(), st.survey.questions);
}

std::optional<std::filesystem::path> SurveyService::image_path(const std::string& survey_id,
                                                               const std::string& image_id) const {
    std::lock_guard lock(m_mutex);
    auto it = m_surveys.find(survey_id);
    if (it == m_surveys.end()) return std::nullopt;
    auto img = it->second->images.find(image_id);
    if (img == it->second->images.end()) return std::nullopt;
    std::filesystem::path ref(img->second);
    return ref.is_absolute() ? ref : m_data_dir / ref;
}

// ---------------------------------------------------------------------------

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, {{"error", message}});
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const NotFoundError& e) {
            reply_error(res, 404, e.what());
        } catch (const UnauthorizedError& e) {
            reply_error(res, 401, e.what());
        } catch (const ForbiddenError& e) {
            reply_error(res, 403, e.what());
        } catch (const ValidationError& e) {
            reply_error(res, 400, e.what());
        } catch (const UsageError& e) {
            reply_error(res, 400, e.what());
        } catch (const json::exception& e) {
            reply_error(res, 400, std::string("malformed request body: ") + e.what());
        } catch (const std::exception& e) {
            reply_error(res, 500, e.what());
        }
    };
}

std::string bearer(const httplib::Request& req) {
    const auto auth = req.get_header_value("Authorization");
    const std::string prefix = "Bearer ";
    return auth.rfind(prefix, 0) == 0 ? auth.substr(prefix.size()) : std::string();
}

}  // namespace

void mount_survey_api(httplib::Server& server, SurveyService& service) {
    server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        Participant p{body.at("participant_id").get<std::string>(), body.at("culture_affiliation").get<std::string>(),
                      body.at("consent").get<bool>()};
        const auto s = service.create_session(p, body.at("survey_id").get<std::string>());
        reply(res, 201, {{"token", s.token}, {"total", s.items.size()}});
    }));

    server.Get(R"(/sessions/([0-9a-f]+)/next)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
        const auto view = service.next_question(req.matches[1]);
        if (!view) {
            reply(res, 200, {{"done", true}});
            return;
        }
        auto body = participant_view_to_json(*view);
        body["done"] = false;
        reply(res, 200, body);
    }));

    server.Post(R"(/sessions/([0-9a-f]+)/responses)",
                guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    const auto body = json::parse(req.body);
                    auto field = [&](const char* name) {
                        auto it = body.find(name);
                        return it != body.end() && it->is_string() ? it->get<std::string>() : std::string();
                    };
                    const auto outcome =
                        service.submit_response(req.matches[1], field("question_id"), field("metric"), field("choice"));
                    if (outcome.accepted) {
                        reply(res, 200, {{"accepted", true}});
                    } else {
                        const int status = outcome.reason == RejectReason::invalid_choice ? 400 : 409;
                        reply(res, status, {{"accepted", false}, {"reason", to_string(outcome.reason)}});
                    }
                }));

    server.Get(R"(/surveys/([^/]+)/aggregate)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
        const std::string survey_id = req.matches[1];
        const auto credential = bearer(req);
        auto body = preference_table_to_json(service.aggregate(survey_id, credential));
        body["western_bias"] = western_bias_to_json(service.western_bias(survey_id, credential));
        reply(res, 200, body);
    }));

    server.Get(R"(/images/([^/]+)/([^/]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
        const auto path = service.image_path(req.matches[1], req.matches[2]);
        if (!path || !std::filesystem::exists(*path)) throw NotFoundError("unknown image");
        res.set_content(read_text_file(*path), path->extension() == ".png" ? "image/png" : "application/octet-stream");
    }));
}

}  // namespace ccub
