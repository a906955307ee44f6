// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cctype>
#include <thread>

#include "ccub/error.hpp"
#include "ccub/survey_service.hpp"
#include "test_support.hpp"

// After the ccub headers: <resolv.h> (pulled in by httplib) defines `_res`,
// which collides with Eigen internals.
#include <httplib.h>

using namespace ccub;
using namespace ccub::testing;

namespace {

const std::string kAdmin = "admin-secret";

Survey fixture_survey(SurveyKind kind = SurveyKind::standard) {
    Survey s;
    s.id = kind == SurveyKind::standard ? "ng-main" : "ng-west";
    s.kind = kind;
    s.questions = build_survey(load_pairs(fixture_dir() / "survey_pairs.json"), 17, kind);
    return s;
}

Participant nigerian(const std::string& id = "p1") { return {id, "Nigeria", true}; }

/// Answers every item of a session with `choice`, returning the number accepted.
std::size_t answer_all(SurveyService& svc, const std::string& token, const std::string& choice) {
    std::size_t n = 0;
    while (auto view = svc.next_question(token)) {
        REQUIRE(svc.submit_response(token, view->question_id, std::string(to_string(view->metric)), choice).accepted);
        ++n;
    }
    return n;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

TEST_CASE("an empty admin token is refused") {
    TempDir dir;
    CHECK_THROWS_AS(SurveyService(dir.path(), ""), ValidationError);
}

TEST_CASE("sessions walk every item in order") {
    TempDir dir;
    SurveyService svc(dir.path(), kAdmin, [] { return 42; });
    svc.add_survey(fixture_survey());
    CHECK(svc.survey_ids() == std::vector<std::string>{"ng-main"});
    CHECK_THROWS_AS(svc.add_survey(fixture_survey()), ValidationError);

    const auto s = svc.create_session(nigerian(), "ng-main");
    CHECK(s.items.size() == 18);
    CHECK(s.token.size() == 32);
    CHECK(s.created_at == 42);

    const auto first = svc.next_question(s.token);
    REQUIRE(first.has_value());
    CHECK(first->answered == 0);
    CHECK(first->total == 18);
    CHECK(first->question_id == s.items[0].first);
    CHECK(first->metric == s.items[0].second);

    CHECK(answer_all(svc, s.token, "left") == 18);
    CHECK_FALSE(svc.next_question(s.token).has_value());
}

TEST_CASE("submissions are checked for order, duplicates and valid choices") {
    TempDir dir;
    SurveyService svc(dir.path(), kAdmin);
    svc.add_survey(fixture_survey());
    const auto s = svc.create_session(nigerian(), "ng-main");
    const auto& [q0, m0] = s.items[0];
    const auto& [q1, m1] = s.items[1];
    const std::string m0s(to_string(m0));
    const std::string m1s(to_string(m1));

    CHECK(svc.submit_response(s.token, q1, m1s, "left").reason == RejectReason::out_of_order);
    CHECK(svc.submit_response(s.token, q0, m0s, "middle").reason == RejectReason::invalid_choice);
    CHECK(svc.submit_response(s.token, q0, "beauty", "left").reason == RejectReason::invalid_choice);
    CHECK(svc.submit_response(s.token, q0, m0s, "right").accepted);
    CHECK(svc.submit_response(s.token, q0, m0s, "left").reason == RejectReason::duplicate);
    CHECK(svc.next_question(s.token)->question_id == q1);
    CHECK_THROWS_AS(svc.submit_response("deadbeef", q0, m0s, "left"), NotFoundError);
    CHECK_THROWS_AS(svc.next_question("deadbeef"), NotFoundError);
}

TEST_CASE("ineligible participants cannot start a session") {
    TempDir dir;
    SurveyService svc(dir.path(), kAdmin);
    svc.add_survey(fixture_survey());
    CHECK_THROWS_AS(svc.create_session({"p1", "Nigeria", false}, "ng-main"), ForbiddenError);
    CHECK_THROWS_AS(svc.create_session({"p2", "Japan", true}, "ng-main"), ForbiddenError);
    CHECK_THROWS_AS(svc.create_session(nigerian(), "nope"), NotFoundError);
}

TEST_CASE("aggregates need the admin credential") {
    TempDir dir;
    SurveyService svc(dir.path(), kAdmin);
    svc.add_survey(fixture_survey());
    CHECK_THROWS_AS(svc.aggregate("ng-main", ""), UnauthorizedError);
    CHECK_THROWS_AS(svc.aggregate("ng-main", "guess"), UnauthorizedError);
    CHECK_THROWS_AS(svc.western_bias("ng-main", "guess"), UnauthorizedError);

    const auto empty = svc.aggregate("ng-main", kAdmin);
    for (auto t : kAllTechniques) {
        for (auto m : kStandardMetrics) CHECK(empty.count(t, m) == 0);
    }

    // Choosing the candidate every time gives 100% wherever comparisons exist.
    const auto s = svc.create_session(nigerian(), "ng-main");
    const auto survey = fixture_survey();
    while (auto view = svc.next_question(s.token)) {
        const auto& q = *survey.find(view->question_id);
        svc.submit_response(s.token, q.id, std::string(to_string(view->metric)),
                            std::string(to_string(q.candidate_side())));
    }
    const auto table = svc.aggregate("ng-main", kAdmin);
    for (auto t : kAllTechniques) {
        for (auto m : kStandardMetrics) {
            CHECK(table.count(t, m) == 2);
            CHECK(table.percentage(t, m) == 100);
        }
    }
}

TEST_CASE("state survives a restart") {
    TempDir dir;
    std::string token;
    {
        SurveyService svc(dir.path(), kAdmin);
        svc.add_survey(fixture_survey());
        token = svc.create_session(nigerian(), "ng-main").token;
        for (int i = 0; i < 5; ++i) {
            const auto v = svc.next_question(token);
            svc.submit_response(token, v->question_id, std::string(to_string(v->metric)), "left");
        }
    }
    SurveyService again(dir.path(), kAdmin);
    CHECK(again.survey_ids() == std::vector<std::string>{"ng-main"});
    const auto v = again.next_question(token);
    REQUIRE(v.has_value());
    CHECK(v->answered == 5);
    CHECK(answer_all(again, token, "right") == 13);
    CHECK(read_response_log(dir / "logs/ng-main.responses.jsonl").size() == 18);
}

TEST_CASE("a crash at any byte of the log loses at most the torn record") {
    TempDir dir;
    std::string token;
    {
        SurveyService svc(dir.path(), kAdmin);
        svc.add_survey(fixture_survey());
        token = svc.create_session(nigerian(), "ng-main").token;
        answer_all(svc, token, "left");
    }
    const auto log = dir / "logs/ng-main.responses.jsonl";
    const auto full = read_text_file(log);
    const auto all = read_response_log(log);
    for (std::size_t cut = 0; cut < full.size(); cut += 7) {
        write_text_file(log, full.substr(0, cut));
        SurveyService svc(dir.path(), kAdmin);
        const auto v = svc.next_question(token);
        const auto kept = read_response_log(log);
        REQUIRE(kept.size() <= all.size());
        for (std::size_t i = 0; i < kept.size(); ++i) CHECK(kept[i] == all[i]);
        REQUIRE(v.has_value());
        CHECK(v->answered == kept.size());
        // The resumed session can finish the survey.
        CHECK(answer_all(svc, token, "left") == 18 - kept.size());
    }
}

TEST_CASE("snapshots are written every interval") {
    TempDir dir;
    SurveyService svc(dir.path(), kAdmin);
    svc.snapshot_interval = 4;
    svc.add_survey(fixture_survey());
    const auto s = svc.create_session(nigerian(), "ng-main");
    answer_all(svc, s.token, "left");
    const auto snap = parse_json_file(dir / "logs/ng-main.snapshot.json");
    CHECK(snap["n_responses"] == 16);
    CHECK(snap.contains("table"));
}

TEST_CASE("participant payloads are blinded") {
    TempDir dir;
    SurveyService svc(dir.path(), kAdmin);
    const auto survey = fixture_survey();
    svc.add_survey(survey);
    const auto s = svc.create_session(nigerian(), "ng-main");
    const auto markers = assignment_markers(survey);
    while (auto view = svc.next_question(s.token)) {
        const auto payload = lower(participant_view_to_json(*view).dump());
        for (const auto& m : markers) CHECK(payload.find(lower(m)) == std::string::npos);
        CHECK(svc.image_path("ng-main", view->left_image).has_value());
        svc.submit_response(s.token, view->question_id, std::string(to_string(view->metric)), "left");
    }
    CHECK_FALSE(svc.image_path("ng-main", "img-000").has_value());
}

TEST_CASE("western-bias surveys ask one metric") {
    TempDir dir;
    SurveyService svc(dir.path(), kAdmin);
    const auto survey = fixture_survey(SurveyKind::western_bias);
    svc.add_survey(survey);
    const auto s = svc.create_session(nigerian(), "ng-west");
    CHECK(s.items.size() == 6);
    while (auto view = svc.next_question(s.token)) {
        CHECK(view->metric == Metric::western_appearance);
        const auto& q = *survey.find(view->question_id);
        svc.submit_response(s.token, q.id, "western_appearance", std::string(to_string(q.candidate_side())));
    }
    const auto score = svc.western_bias("ng-west", kAdmin);
    CHECK(score.percentage == 100);
    CHECK(score.n_comparisons == 6);
    CHECK(score.n_participants == 1);
}

TEST_CASE("HTTP API end to end") {
    TempDir dir;
    const auto survey = fixture_survey();
    // Real files behind the relative image refs.
    std::filesystem::create_directories(dir / "images");
    for (const auto& q : survey.questions) {
        write_text_file(dir.path() / q.left_image, "png:" + q.left_image);
        write_text_file(dir.path() / q.right_image, "png:" + q.right_image);
    }
    SurveyService svc(dir.path(), kAdmin);
    svc.add_survey(survey);

    httplib::Server server;
    mount_survey_api(server, svc);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client cli("127.0.0.1", port);
    auto post = [&](const std::string& path, const json& body) {
        auto res = cli.Post(path, body.dump(), "application/json");
        REQUIRE(res);
        return std::make_pair(res->status, json::parse(res->body));
    };
    auto get = [&](const std::string& path) {
        auto res = cli.Get(path);
        REQUIRE(res);
        return std::make_pair(res->status, json::parse(res->body));
    };

    const json join = {{"participant_id", "p7"}, {"culture_affiliation", "Nigeria"}, {"consent", true},
                       {"survey_id", "ng-main"}};
    auto [st, created] = post("/sessions", join);
    CHECK(st == 201);
    CHECK(created["total"] == 18);
    const std::string token = created["token"];

    CHECK(post("/sessions", {{"participant_id", "p8"}, {"culture_affiliation", "Nigeria"}, {"consent", false},
                             {"survey_id", "ng-main"}})
              .first == 403);
    CHECK(post("/sessions", {{"participant_id", "p8"}}).first == 400);
    CHECK(get("/sessions/abcdef/next").first == 404);

    int answered = 0;
    bool checked_rejections = false;
    const auto markers = assignment_markers(survey);
    for (;;) {
        const auto [code, next] = get("/sessions/" + token + "/next");
        REQUIRE(code == 200);
        if (next["done"] == true) break;
        const auto payload = lower(next.dump());
        for (const auto& m : markers) CHECK(payload.find(lower(m)) == std::string::npos);
        const std::string qid = next["question_id"];
        const std::string metric = next["metric"];

        if (!checked_rejections) {
            CHECK(post("/sessions/" + token + "/responses", {{"question_id", qid}, {"metric", metric}, {"choice", "up"}})
                      .first == 400);
            checked_rejections = true;
        }
        const auto [ok, body] =
            post("/sessions/" + token + "/responses", {{"question_id", qid}, {"metric", metric}, {"choice", "left"}});
        CHECK(ok == 200);
        CHECK(body["accepted"] == true);
        const auto [dup, dbody] =
            post("/sessions/" + token + "/responses", {{"question_id", qid}, {"metric", metric}, {"choice", "left"}});
        CHECK(dup == 409);
        CHECK(dbody["reason"] == "duplicate");

        const std::string left = next["left_image"];
        auto img = cli.Get("/images/ng-main/" + left);
        REQUIRE(img);
        CHECK(img->status == 200);
        CHECK(img->body.rfind("png:images/", 0) == 0);
        ++answered;
    }
    CHECK(answered == 18);

    CHECK(get("/surveys/ng-main/aggregate").first == 401);
    httplib::Headers auth = {{"Authorization", "Bearer " + kAdmin}};
    auto agg = cli.Get("/surveys/ng-main/aggregate", auth);
    REQUIRE(agg);
    CHECK(agg->status == 200);
    const auto table = json::parse(agg->body);
    CHECK(table["rows"].size() == 3);
    CHECK(table["western_bias"]["percentage"].is_null());
    CHECK(get("/images/ng-main/img-unknown").first == 404);

    server.stop();
    worker.join();
}
