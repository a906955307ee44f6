// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "ccub/captions.hpp"
#include "ccub/error.hpp"
#include "test_support.hpp"

using namespace ccub;
using namespace ccub::testing;

namespace {

class FixedCaptioner : public Captioner {
public:
    explicit FixedCaptioner(std::size_t beam_available = 10) : m_beam_available(beam_available) {}
    std::vector<std::string> caption(const std::string&, DecodeStrategy s, std::size_t k, std::uint64_t) override {
        std::vector<std::string> out;
        const std::size_t n = s == DecodeStrategy::beam ? std::min(k, m_beam_available) : k;
        for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(to_string(s)) + " caption " + std::to_string(i));
        return out;
    }

private:
    std::size_t m_beam_available;
};

class ThrowingCaptioner : public Captioner {
public:
    std::vector<std::string> caption(const std::string&, DecodeStrategy, std::size_t, std::uint64_t) override {
        throw std::runtime_error("model offline");
    }
};

/// Scores candidates by position from a fixed list.
class ListScorer : public ImageTextScorer {
public:
    explicit ListScorer(std::vector<double> scores) : m_scores(std::move(scores)) {}
    double score(const std::string&, const std::string& text) override {
        return m_scores.at(static_cast<std::size_t>(std::stoi(text.substr(text.rfind(' ') + 1))) + m_offset(text));
    }

private:
    std::size_t m_offset(const std::string& text) const { return text.rfind("nucleus", 0) == 0 ? 2 : 0; }
    std::vector<double> m_scores;
};

/// Scores arbitrary candidate texts from a map.
class MapScorer : public ImageTextScorer {
public:
    std::map<std::string, double> scores;
    double score(const std::string&, const std::string& text) override { return scores.at(text); }
};

CaptionSet selected_set() {
    FixedCaptioner cap;
    ListScorer scorer({0.2, 0.9, 0.4, 0.1});
    return score_and_select(generate_candidates(sample_record(), cap, 1), scorer, "img");
}

}  // namespace

TEST_CASE("protocol yields two beam then two nucleus candidates") {
    FixedCaptioner cap;
    const auto set = generate_candidates(sample_record(), cap, 5);
    CHECK(set.record_id == "ng-city-001");
    CHECK(set.review_state == ReviewState::generated);
    REQUIRE(set.candidates.size() == 4);
    CHECK(set.candidates[0].strategy == DecodeStrategy::beam);
    CHECK(set.candidates[1].strategy == DecodeStrategy::beam);
    CHECK(set.candidates[2].strategy == DecodeStrategy::nucleus);
    CHECK(set.candidates[3].strategy == DecodeStrategy::nucleus);
    for (const auto& c : set.candidates) CHECK_FALSE(c.score.has_value());
}

TEST_CASE("seeded mock captioner is deterministic") {
    MockCaptioner cap;
    const auto rec = sample_record();
    CHECK(generate_candidates(rec, cap, 42) == generate_candidates(rec, cap, 42));
}

TEST_CASE("captioner arity and failures name the record") {
    FixedCaptioner short_beam(1);
    try {
        generate_candidates(sample_record("rec-7"), short_beam, 0);
        FAIL("expected an arity error");
    } catch (const RuntimeFailure& e) {
        CHECK(std::string(e.what()).find("rec-7") != std::string::npos);
    }
    ThrowingCaptioner broken;
    try {
        generate_candidates(sample_record("rec-8"), broken, 0);
        FAIL("expected a captioner error");
    } catch (const RuntimeFailure& e) {
        CHECK(std::string(e.what()).find("rec-8") != std::string::npos);
        CHECK(std::string(e.what()).find("model offline") != std::string::npos);
    }
}

TEST_CASE("argmax selection with lowest-index ties") {
    FixedCaptioner cap;
    const auto gen = generate_candidates(sample_record(), cap, 1);
    SUBCASE("distinct scores") {
        ListScorer scorer({0.2, 0.9, 0.4, 0.1});
        const auto set = score_and_select(gen, scorer, "img");
        CHECK(set.selected == 1u);
        CHECK(set.review_state == ReviewState::selected);
        for (const auto& c : set.candidates) CHECK(c.score.has_value());
    }
    SUBCASE("tie at the top") {
        ListScorer scorer({0.9, 0.9, 0.1, 0.1});
        CHECK(score_and_select(gen, scorer, "img").selected == 0u);
    }
    SUBCASE("single candidate") {
        FixedCaptioner one;
        const auto single = generate_candidates(sample_record(), one, 1, CaptionProtocol{1, 0});
        ListScorer scorer({0.3});
        CHECK(score_and_select(single, scorer, "img").selected == 0u);
    }
    SUBCASE("non-finite score") {
        ListScorer scorer({0.2, std::numeric_limits<double>::quiet_NaN(), 0.4, 0.1});
        CHECK_THROWS_AS(score_and_select(gen, scorer, "img"), RuntimeFailure);
    }
    SUBCASE("wrong state") {
        ListScorer scorer({0.2, 0.9, 0.4, 0.1});
        const auto once = score_and_select(gen, scorer, "img");
        CHECK_THROWS_AS(score_and_select(once, scorer, "img"), ValidationError);
    }
}

TEST_CASE("selection matches a brute-force argmax over random scores") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> level(0, 3);  // few levels force ties
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 7);
        CaptionSet set;
        set.record_id = "r";
        MapScorer scorer;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string text = "text " + std::to_string(i);
            set.candidates.push_back({text, DecodeStrategy::beam, std::nullopt});
            scorer.scores[text] = level(rng) * 0.25;
        }
        const auto out = score_and_select(set, scorer, "img");
        const std::size_t i = *out.selected;
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(*out.candidates[i].score >= *out.candidates[j].score);
            if (j < i) CHECK(*out.candidates[j].score < *out.candidates[i].score);
        }
    }
}

TEST_CASE("correction and base prompt") {
    const auto sel = selected_set();
    CHECK(base_prompt_of(sel) == sel.candidates[1].text);

    const auto fixed = apply_correction(sel, "two musicians playing drums");
    CHECK(fixed.review_state == ReviewState::corrected);
    CHECK(fixed.corrected_text == std::optional<std::string>("two musicians playing drums"));
    CHECK(fixed.candidates == sel.candidates);
    CHECK(base_prompt_of(fixed) == "two musicians playing drums");

    const auto same = apply_correction(sel, sel.candidates[1].text);
    CHECK(same.review_state == ReviewState::corrected);

    CHECK_THROWS_AS(apply_correction(sel, "   "), ValidationError);
    FixedCaptioner cap;
    const auto gen = generate_candidates(sample_record(), cap, 1);
    CHECK_THROWS_AS(apply_correction(gen, "text"), ValidationError);
    CHECK_THROWS_AS(base_prompt_of(gen), ValidationError);
}

TEST_CASE("random operation sequences never move the state backward") {
    std::mt19937_64 rng(17);
    FixedCaptioner cap;
    for (int trial = 0; trial < 200; ++trial) {
        auto set = generate_candidates(sample_record(), cap, static_cast<std::uint64_t>(trial));
        ListScorer scorer({0.1, 0.2, 0.3, 0.4});
        for (int step = 0; step < 8; ++step) {
            const auto before = set.review_state;
            try {
                switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
                    case 0: set = score_and_select(set, scorer, "img"); break;
                    case 1: set = apply_correction(set, "fixed " + std::to_string(step)); break;
                    default: (void)base_prompt_of(set); break;
                }
            } catch (const ValidationError&) {
                CHECK(set.review_state == before);
            }
            CHECK(set.review_state >= before);
        }
    }
}

TEST_CASE("store rejects backward updates and persists canonically") {
    TempDir dir;
    CaptionStore store;
    const auto sel = selected_set();
    store.put(sel);
    CHECK_THROWS_AS(store.update(sel.record_id,
                                 [](CaptionSet s) {
                                     s.review_state = ReviewState::generated;
                                     return s;
                                 }),
                    ValidationError);
    store.update(sel.record_id, [](CaptionSet s) { return apply_correction(std::move(s), "a street"); });
    store.save(dir / "store.json");
    const auto loaded = CaptionStore::load(dir / "store.json");
    CHECK(loaded.snapshot() == store.snapshot());
    loaded.save(dir / "again.json");
    CHECK(read_text_file(dir / "store.json") == read_text_file(dir / "again.json"));
    CHECK(CaptionStore::load_or_empty(dir / "missing.json").snapshot().empty());
}

TEST_CASE("store serializes concurrent updates per record") {
    CaptionStore store;
    for (int i = 0; i < 8; ++i) {
        CaptionSet s;
        s.record_id = "r" + std::to_string(i);
        s.candidates.push_back({"text", DecodeStrategy::beam, std::nullopt});
        store.put(s);
    }
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w) {
        workers.emplace_back([&store] {
            MockScorer scorer;
            for (int i = 0; i < 8; ++i) {
                try {
                    store.update("r" + std::to_string(i),
                                 [&](CaptionSet s) { return score_and_select(std::move(s), scorer, "img"); });
                } catch (const ValidationError&) {
                    // Another worker got there first.
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    for (const auto& [id, set] : store.snapshot()) CHECK(set.review_state == ReviewState::selected);
}

TEST_CASE("culture-free lint flags country words as whole words") {
    CHECK(lint_culture_free("a busy street", "Nigeria").empty());
    const auto hits = lint_culture_free("A busy street in Lagos, Nigeria", "Nigeria");
    CHECK(std::find(hits.begin(), hits.end(), "nigeria") != hits.end());
    CHECK(std::find(hits.begin(), hits.end(), "lagos") != hits.end());
    CHECK(lint_culture_free("a bowl of phosphorus", "Vietnam").empty());
    CHECK_FALSE(lint_culture_free("a bowl of pho", "Vietnam").empty());
}

TEST_CASE("caption set JSON round trip") {
    const auto fixed = apply_correction(selected_set(), "a street");
    CHECK(caption_set_from_json(caption_set_to_json(fixed)) == fixed);
}
