// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cctype>
#include <random>
#include <set>

#include "ccub/error.hpp"
#include "ccub/survey.hpp"
#include "test_support.hpp"

using namespace ccub;
using namespace ccub::testing;

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<ComparisonPair> numbered_pairs(int n, const std::string& country = "Nigeria") {
    std::vector<ComparisonPair> pairs;
    for (int i = 0; i < n; ++i) {
        const std::string id = "pair" + std::to_string(i);
        pairs.push_back({id, "base/" + id + ".png", "cand/" + id + ".png", kAllTechniques[i % 3],
                         "a family eating dinner " + std::to_string(i), country});
    }
    return pairs;
}

std::string random_word(std::mt19937_64& rng, std::size_t len) {
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
    return s;
}

ComparisonQuestion single_question(SurveyKind kind = SurveyKind::standard) {
    return build_survey(numbered_pairs(1), 0, kind).front();
}

}  // namespace

TEST_CASE("enum strings round trip") {
    for (auto t : kAllTechniques) CHECK(parse_technique(to_string(t)) == t);
    for (auto m : {Metric::text_image_alignment, Metric::cultural_alignment, Metric::offensiveness,
                   Metric::western_appearance}) {
        CHECK(parse_metric(to_string(m)) == m);
    }
    CHECK(parse_side("left") == Side::left);
    CHECK_FALSE(parse_side("middle").has_value());
    CHECK(metrics_for(SurveyKind::standard).size() == 3);
    CHECK(metrics_for(SurveyKind::western_bias) == std::vector<Metric>{Metric::western_appearance});
}

TEST_CASE("each pair becomes exactly one question") {
    const auto pairs = numbered_pairs(37);
    const auto qs = build_survey(pairs, 9);
    REQUIRE(qs.size() == 37);
    std::multiset<std::string> seen;
    for (const auto& q : qs) {
        seen.insert(q.pair_id);
        const auto& p = *std::find_if(pairs.begin(), pairs.end(), [&](const auto& x) { return x.id == q.pair_id; });
        const auto& cand = q.candidate_side() == Side::left ? q.left_image : q.right_image;
        const auto& base = q.candidate_side() == Side::left ? q.right_image : q.left_image;
        CHECK(cand == p.candidate_image);
        CHECK(base == p.baseline_image);
        CHECK(q.candidate_technique == p.technique);
    }
    for (const auto& p : pairs) CHECK(seen.count(p.id) == 1);
    CHECK(build_survey(pairs, 9) == qs);
    CHECK_THROWS_AS(build_survey({}, 0), ValidationError);
    auto dup = pairs;
    dup.push_back(pairs[0]);
    CHECK_THROWS_AS(build_survey(dup, 0), ValidationError);
}

TEST_CASE("candidate placement is balanced across seeds") {
    const auto pairs = numbered_pairs(30);
    long left = 0;
    long total = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        for (const auto& q : build_survey(pairs, seed)) {
            left += q.candidate_side() == Side::left;
            ++total;
        }
    }
    const double freq = static_cast<double>(left) / static_cast<double>(total);
    CHECK(freq >= 0.40);
    CHECK(freq <= 0.60);
}

TEST_CASE("participant payloads never reveal the hidden assignment") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ComparisonPair> pairs;
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            const std::string id = "pair-" + random_word(rng, 12);
            pairs.push_back({id, "/srv/base/" + random_word(rng, 10) + ".png",
                             "/srv/cand/" + random_word(rng, 10) + ".png", kAllTechniques[rng() % 3],
                             "two people walking down a street", "Korea"});
        }
        Survey s;
        s.id = "s-" + random_word(rng, 6);
        s.kind = trial % 2 ? SurveyKind::standard : SurveyKind::western_bias;
        s.questions = build_survey(pairs, rng(), s.kind);
        const auto markers = assignment_markers(s);
        for (std::size_t i = 0; i < s.questions.size(); ++i) {
            for (auto m : metrics_for(s.kind)) {
                const auto payload =
                    lower(participant_view_to_json(participant_view(s.id, s.questions[i], m, i, s.questions.size()))
                              .dump());
                for (const auto& marker : markers) {
                    INFO("marker " << marker << " in " << payload);
                    CHECK(payload.find(lower(marker)) == std::string::npos);
                }
            }
        }
    }
}

TEST_CASE("opaque ids are stable and distinct") {
    CHECK(opaque_image_id("s1", "a.png") == opaque_image_id("s1", "a.png"));
    CHECK(opaque_image_id("s1", "a.png") != opaque_image_id("s1", "b.png"));
    CHECK(opaque_image_id("s1", "a.png") != opaque_image_id("s2", "a.png"));
}

TEST_CASE("percent_half_up agrees with the interval definition") {
    for (long n = 1; n <= 300; ++n) {
        for (long k = 0; k <= n; ++k) {
            const long t = percent_half_up(k, n);
            CHECK((2 * t - 1) * n <= 200 * k);
            CHECK(200 * k < (2 * t + 1) * n);
        }
    }
    CHECK(percent_half_up(1, 8) == 13);  // 12.5 rounds up
    CHECK(percent_half_up(0, 0) == 0);
}

TEST_CASE("preference fixture reproduces the published table") {
    const auto fx = make_preference_fixture(kPublishedPreferences, 2024);
    REQUIRE(fx.responses.size() == 3 * 3 * kComparisonsPerTechnique);
    const auto table = compute_preferences(fx.responses, fx.survey.questions);
    for (int r = 0; r < 3; ++r) {
        for (int m = 0; m < 3; ++m) {
            INFO(to_string(kAllTechniques[r]) << " / " << to_string(kStandardMetrics[m]));
            CHECK(table.percentage(kAllTechniques[r], kStandardMetrics[m]) == kPublishedPreferences[r][m]);
            CHECK(table.count(kAllTechniques[r], kStandardMetrics[m]) == kComparisonsPerTechnique);
        }
    }
    std::set<std::string> people;
    for (const auto& resp : fx.responses) people.insert(resp.participant_id);
    CHECK(people.size() == static_cast<std::size_t>(kParticipants));

    const auto json_table = preference_table_to_json(table);
    CHECK(json_table.dump().find("66") != std::string::npos);
    CHECK(format_preference_table(table).find("71") != std::string::npos);
    const auto csv = format_preference_csv(table);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);  // header plus one row per cell
}

TEST_CASE("scores are invariant to response order and side relabeling") {
    const auto fx = make_preference_fixture(kPublishedPreferences, 7);
    const auto reference = compute_preferences(fx.responses, fx.survey.questions);
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        auto shuffled = fx.responses;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(compute_preferences(shuffled, fx.survey.questions) == reference);
    }
    const auto mirrored = relabel_sides(fx);
    CHECK(compute_preferences(mirrored.responses, mirrored.survey.questions) == reference);
    // A different placement seed must not change the scores either.
    const auto other = make_preference_fixture(kPublishedPreferences, 8);
    CHECK(compute_preferences(other.responses, other.survey.questions) == reference);
}

TEST_CASE("per-country tables partition the pooled counts") {
    const auto fx = make_preference_fixture(kPublishedPreferences, 3);
    const auto pooled = compute_preferences(fx.responses, fx.survey.questions);
    const auto by_country = compute_preferences_by_country(fx.responses, fx.survey.questions);
    CHECK(by_country.size() == std::size(kSurveyCountries));
    for (auto t : kAllTechniques) {
        for (auto m : kStandardMetrics) {
            long n = 0;
            for (const auto& [country, table] : by_country) n += table.count(t, m);
            CHECK(n == pooled.count(t, m));
        }
    }
}

TEST_CASE("empty responses give an all-zero table") {
    const auto table = compute_preferences({}, build_survey(numbered_pairs(3), 0));
    for (auto t : kAllTechniques) {
        for (auto m : kStandardMetrics) {
            CHECK(table.percentage(t, m) == 0);
            CHECK(table.count(t, m) == 0);
        }
    }
}

TEST_CASE("western bias score") {
    const auto fx = make_western_bias_fixture(5);
    const auto score = western_bias_score(fx.responses, fx.survey.questions);
    CHECK(score.percentage == std::optional<int>(72));
    CHECK(score.n_comparisons == kWesternComparisons);
    CHECK(score.n_participants == kWesternParticipants);
    CHECK(score.candidate_chosen == kWesternCandidateChosen);
    const auto mirrored = relabel_sides(fx);
    CHECK(western_bias_score(mirrored.responses, mirrored.survey.questions).percentage == 72);

    const auto empty = western_bias_score({}, fx.survey.questions);
    CHECK_FALSE(empty.percentage.has_value());
    CHECK(empty.n_comparisons == 0);
}

TEST_CASE("record_response enforces consent, culture and metric") {
    const auto q = single_question();
    ResponseStore store;
    const Participant ok{"p1", "Nigeria", true};
    CHECK(record_response({"p0", "Nigeria", false}, q, Metric::offensiveness, Side::left, store).reason ==
          RejectReason::no_consent);
    CHECK(record_response({"p2", "Japan", true}, q, Metric::offensiveness, Side::left, store).reason ==
          RejectReason::culture_mismatch);
    CHECK(record_response(ok, q, Metric::western_appearance, Side::left, store).reason ==
          RejectReason::metric_not_asked);
    CHECK(record_response(ok, q, Metric::offensiveness, static_cast<Side>(7), store).reason ==
          RejectReason::invalid_choice);
    CHECK(store.size() == 0);
    CHECK(record_response(ok, q, Metric::offensiveness, Side::right, store).accepted);
    CHECK(record_response(ok, q, Metric::offensiveness, Side::left, store).reason == RejectReason::duplicate);
    CHECK(record_response(ok, q, Metric::cultural_alignment, Side::left, store).accepted);
    CHECK(store.size() == 2);
    CHECK(store.snapshot()[0].choice == Side::right);

    const auto wq = single_question(SurveyKind::western_bias);
    CHECK(record_response(ok, wq, Metric::offensiveness, Side::left, store).reason == RejectReason::metric_not_asked);
    CHECK(record_response(ok, wq, Metric::western_appearance, Side::left, store).accepted);
}

TEST_CASE("response log replays after restart") {
    TempDir dir;
    const auto log = dir / "r.jsonl";
    const auto q = single_question();
    {
        ResponseStore store(log);
        for (auto m : kStandardMetrics) record_response({"p1", "Nigeria", true}, q, m, Side::left, store, 5);
    }
    auto replayed = ResponseStore::replay(log);
    CHECK(replayed.size() == 3);
    CHECK(replayed.contains("p1", q.id, Metric::offensiveness));
    CHECK(read_response_log(log) == replayed.snapshot());
    CHECK(ResponseStore::replay(dir / "missing.jsonl").size() == 0);
}

TEST_CASE("torn tails are dropped and intact tails are kept") {
    TempDir dir;
    const auto log = dir / "r.jsonl";
    const auto r1 = response_to_json({"p1", "q1", Metric::offensiveness, Side::left, 1}).dump();
    const auto r2 = response_to_json({"p1", "q2", Metric::offensiveness, Side::right, 2}).dump();

    SUBCASE("every prefix of a two-record log replays to a prefix") {
        const std::string full = r1 + "\n" + r2 + "\n";
        for (std::size_t cut = 0; cut <= full.size(); ++cut) {
            write_text_file(log, full.substr(0, cut));
            const auto seen = read_response_log(log);
            auto store = ResponseStore::replay(log);
            CHECK(store.snapshot() == seen);
            const std::size_t expected = cut >= full.size() - 1 ? 2 : (cut >= r1.size() ? 1 : 0);
            CHECK(seen.size() == expected);
            // The repaired log accepts further appends.
            CHECK(store.append({"p9", "q9", Metric::cultural_alignment, Side::left, 9}));
            CHECK(read_response_log(log).size() == expected + 1);
        }
    }
    SUBCASE("corruption before the tail is an error") {
        write_text_file(log, r1 + "\n{garbage\n" + r2 + "\n");
        CHECK_THROWS_AS(ResponseStore::replay(log), ValidationError);
    }
    SUBCASE("duplicate keys in a log are kept once") {
        write_text_file(log, r1 + "\n" + r1 + "\n");
        CHECK(ResponseStore::replay(log).size() == 1);
    }
}

TEST_CASE("JSON round trips") {
    const SurveyResponse r{"p1", "q0003", Metric::western_appearance, Side::right, 1700000000};
    CHECK(response_from_json(response_to_json(r)) == r);

    const ComparisonPair p{"p01", "b.png", "c.png", Technique::prompt_aug, "a street", "Korea"};
    const auto back = comparison_pair_from_json(comparison_pair_to_json(p));
    CHECK(back.id == p.id);
    CHECK(back.technique == p.technique);
    CHECK(back.candidate_image == p.candidate_image);

    TempDir dir;
    Survey s;
    s.id = "s1";
    s.questions = build_survey(numbered_pairs(4), 2);
    s.assignments["p1"] = {s.questions[0].id, s.questions[2].id};
    save_survey(s, dir / "s1.json");
    const auto loaded = load_survey(dir / "s1.json");
    CHECK(loaded.questions == s.questions);
    CHECK(loaded.assignments == s.assignments);
    CHECK(loaded.find(s.questions[1].id) != nullptr);
    CHECK(loaded.find("nope") == nullptr);

    write_text_file(dir / "pairs.json", json{{"pairs", json::array({comparison_pair_to_json(p)})}}.dump());
    CHECK(load_pairs(dir / "pairs.json").size() == 1);
    CHECK(load_pairs(fixture_dir() / "survey_pairs.json").size() == 6);
}
