// SPDX-License-Identifier: Apache-2.0

#include "ccub/captions.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <random>

#include "ccub/digest.hpp"

namespace ccub {

namespace {

constexpr std::array<const char*, 8> kSubjects = {
    "a group of people", "a bowl of food", "a person wearing a dress", "a building",
    "two musicians", "a street with cars", "a painting on a wall", "a view of mountains",
};
constexpr std::array<const char*, 6> kSettings = {
    "standing in front of a building", "on a wooden table", "in a large room",
    "at night", "on a sunny day", "next to a river",
};
constexpr std::array<const char*, 5> kDetails = {
    "with a blue sky", "with many colors", "in the background", "close up", "with lights",
};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

void require_state(const CaptionSet& set, std::initializer_list<ReviewState> allowed, const char* op) {
    if (std::find(allowed.begin(), allowed.end(), set.review_state) == allowed.end()) {
        throw ValidationError(std::string(op) + ": record " + set.record_id + " is in state " +
                              std::string(to_string(set.review_state)));
    }
}

const std::map<std::string, std::vector<std::string>>& culture_keywords() {
    static const std::map<std::string, std::vector<std::string>> words = {
        {"Korea", {"korea", "korean", "seoul", "hanbok"}},
        {"Japan", {"japan", "japanese", "tokyo", "kimono"}},
        {"China", {"china", "chinese", "beijing", "shenzhen"}},
        {"Mexico", {"mexico", "mexican", "tortilla", "tortillas"}},
        {"Nigeria", {"nigeria", "nigerian", "lagos", "ibadan"}},
        {"Norway", {"norway", "norwegian", "oslo", "bunad"}},
        {"Vietnam", {"vietnam", "vietnamese", "hanoi", "pho"}},
        {"United States", {"united states", "american", "usa", "new york"}},
    };
    return words;
}

bool contains_word(const std::string& haystack, const std::string& needle) {
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack[pos - 1]));
        const std::size_t end = pos + needle.size();
        const bool right_ok = end == haystack.size() || !std::isalnum(static_cast<unsigned char>(haystack[end]));
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace

std::string_view to_string(DecodeStrategy s) noexcept { return s == DecodeStrategy::beam ? "beam" : "nucleus"; }

std::string_view to_string(ReviewState s) noexcept {
    switch (s) {
        case ReviewState::generated: return "generated";
        case ReviewState::scored: return "scored";
        case ReviewState::selected: return "selected";
        case ReviewState::corrected: return "corrected";
    }
    return "unknown";
}

std::vector<std::string> MockCaptioner::caption(const std::string& image_ref, DecodeStrategy strategy,
                                                std::size_t k, std::uint64_t seed) {
    const std::uint64_t h = fnv1a64(image_ref);
    const std::string subject = kSubjects[h % kSubjects.size()];
    std::vector<std::string> out;
    if (strategy == DecodeStrategy::beam) {
        for (std::size_t i = 0; i < k; ++i) {
            out.push_back(subject + " " + kSettings[(h / 7 + i) % kSettings.size()]);
        }
    } else {
        std::mt19937_64 rng(mix_seed(seed, h));
        for (std::size_t i = 0; i < k; ++i) {
            out.push_back(subject + " " + kSettings[rng() % kSettings.size()] + " " +
                          kDetails[rng() % kDetails.size()]);
        }
    }
    return out;
}

double MockScorer::score(const std::string& image_ref, const std::string& text) {
    return static_cast<double>(fnv1a64(image_ref + '\x1f' + text) % 1000000) / 1e6;
}

CaptionSet generate_candidates(const CulturalRecord& record, Captioner& captioner, std::uint64_t seed,
                               const CaptionProtocol& protocol) {
    CaptionSet set;
    set.record_id = record.id;
    auto run = [&](DecodeStrategy strategy, std::size_t k) {
        if (k == 0) return;
        std::vector<std::string> texts;
        try {
            texts = captioner.caption(record.image_ref, strategy, k, seed);
        } catch (const std::exception& e) {
            throw RuntimeFailure("captioner failed for record " + record.id + ": " + e.what());
        }
        if (texts.size() < k) {
            throw RuntimeFailure("captioner returned " + std::to_string(texts.size()) + " " +
                                 std::string(to_string(strategy)) + " captions for record " + record.id +
                                 ", expected " + std::to_string(k));
        }
        for (std::size_t i = 0; i < k; ++i) {
            if (texts[i].empty()) {
                throw RuntimeFailure("captioner returned an empty caption for record " + record.id);
            }
            set.candidates.push_back({texts[i], strategy, std::nullopt});
        }
    };
    run(DecodeStrategy::beam, protocol.beam);
    run(DecodeStrategy::nucleus, protocol.nucleus);
    if (set.candidates.empty()) {
        throw ValidationError("caption protocol requests zero candidates");
    }
    return set;
}

CaptionSet score_and_select(CaptionSet set, ImageTextScorer& scorer, const std::string& image_ref) {
    require_state(set, {ReviewState::generated}, "score_and_select");
    if (set.candidates.empty()) {
        throw ValidationError("score_and_select: record " + set.record_id + " has no candidates");
    }
    for (auto& c : set.candidates) {
        double s = 0.0;
        try {
            s = scorer.score(image_ref, c.text);
        } catch (const std::exception& e) {
            throw RuntimeFailure("scorer failed for record " + set.record_id + ": " + e.what());
        }
        if (!std::isfinite(s)) {
            throw RuntimeFailure("scorer returned a non-finite score for record " + set.record_id);
        }
        c.score = s;
    }
    set.review_state = ReviewState::scored;
    std::size_t best = 0;
    for (std::size_t i = 1; i < set.candidates.size(); ++i) {
        if (*set.candidates[i].score > *set.candidates[best].score) best = i;
    }
    set.selected = best;
    set.review_state = ReviewState::selected;
    return set;
}

CaptionSet apply_correction(CaptionSet set, const std::string& corrected) {
    require_state(set, {ReviewState::selected}, "apply_correction");
    if (std::all_of(corrected.begin(), corrected.end(), [](unsigned char c) { return std::isspace(c) != 0; })) {
        throw ValidationError("apply_correction: correction for record " + set.record_id + " is empty");
    }
    set.corrected_text = corrected;
    set.review_state = ReviewState::corrected;
    return set;
}

std::string base_prompt_of(const CaptionSet& set) {
    require_state(set, {ReviewState::selected, ReviewState::corrected}, "base_prompt_of");
    if (set.corrected_text) return *set.corrected_text;
    return set.candidates.at(*set.selected).text;
}

std::vector<std::string> lint_culture_free(const std::string& text, const std::string& country) {
    std::vector<std::string> hits;
    const std::string haystack = lower(text);
    std::vector<std::string> words = {lower(country)};
    if (auto it = culture_keywords().find(country); it != culture_keywords().end()) {
        words.insert(words.end(), it->second.begin(), it->second.end());
    }
    for (const auto& w : words) {
        if (contains_word(haystack, w) && std::find(hits.begin(), hits.end(), w) == hits.end()) {
            hits.push_back(w);
        }
    }
    return hits;
}

json caption_set_to_json(const CaptionSet& set) {
    json cands = json::array();
    for (const auto& c : set.candidates) {
        json obj = {{"text", c.text}, {"strategy", to_string(c.strategy)}};
        obj["score"] = c.score ? json(*c.score) : json(nullptr);
        cands.push_back(std::move(obj));
    }
    json obj = {
        {"record_id", set.record_id},
        {"candidates", std::move(cands)},
        {"review_state", to_string(set.review_state)},
    };
    obj["selected"] = set.selected ? json(*set.selected) : json(nullptr);
    obj["corrected_text"] = set.corrected_text ? json(*set.corrected_text) : json(nullptr);
    return obj;
}

CaptionSet caption_set_from_json(const json& obj) {
    try {
        CaptionSet set;
        set.record_id = obj.at("record_id").get<std::string>();
        for (const auto& c : obj.at("candidates")) {
            CaptionCandidate cand;
            cand.text = c.at("text").get<std::string>();
            const auto strategy = c.at("strategy").get<std::string>();
            if (strategy == "beam") {
                cand.strategy = DecodeStrategy::beam;
            } else if (strategy == "nucleus") {
                cand.strategy = DecodeStrategy::nucleus;
            } else {
                throw ValidationError("unknown strategy '" + strategy + "'");
            }
            if (!c.at("score").is_null()) cand.score = c.at("score").get<double>();
            set.candidates.push_back(std::move(cand));
        }
        const auto state = obj.at("review_state").get<std::string>();
        bool known = false;
        for (auto s : {ReviewState::generated, ReviewState::scored, ReviewState::selected, ReviewState::corrected}) {
            if (to_string(s) == state) {
                set.review_state = s;
                known = true;
            }
        }
        if (!known) throw ValidationError("unknown review_state '" + state + "'");
        if (!obj.at("selected").is_null()) {
            set.selected = obj.at("selected").get<std::size_t>();
            if (*set.selected >= set.candidates.size()) {
                throw ValidationError("selected index out of range for record " + set.record_id);
            }
        }
        if (!obj.at("corrected_text").is_null()) set.corrected_text = obj.at("corrected_text").get<std::string>();
        return set;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed caption set: ") + e.what());
    }
}

CaptionStore::CaptionStore(const CaptionStore& other) : m_sets(other.snapshot()) {}

CaptionStore& CaptionStore::operator=(const CaptionStore& other) {
    if (this != &other) {
        auto sets = other.snapshot();
        std::lock_guard lock(m_mutex);
        m_sets = std::move(sets);
    }
    return *this;
}

CaptionStore CaptionStore::load(const std::filesystem::path& path) {
    const json doc = parse_json_file(path);
    if (!doc.is_object()) throw ValidationError("caption store must be an object: " + path.string());
    std::map<std::string, CaptionSet> sets;
    for (const auto& [id, obj] : doc.items()) {
        auto set = caption_set_from_json(obj);
        if (set.record_id != id) {
            throw ValidationError("caption store key '" + id + "' does not match record_id '" + set.record_id + "'");
        }
        sets.emplace(id, std::move(set));
    }
    return CaptionStore(std::move(sets));
}

CaptionStore CaptionStore::load_or_empty(const std::filesystem::path& path) {
    return std::filesystem::exists(path) ? load(path) : CaptionStore();
}

void CaptionStore::save(const std::filesystem::path& path) const {
    json doc = json::object();
    for (const auto& [id, set] : snapshot()) doc[id] = caption_set_to_json(set);
    write_text_file(path, canonical_dump(doc));
}

std::optional<CaptionSet> CaptionStore::get(const std::string& record_id) const {
    std::lock_guard lock(m_mutex);
    auto it = m_sets.find(record_id);
    if (it == m_sets.end()) return std::nullopt;
    return it->second;
}

void CaptionStore::put(CaptionSet set) {
    std::lock_guard lock(m_mutex);
    auto id = set.record_id;
    m_sets.insert_or_assign(std::move(id), std::move(set));
}

CaptionSet CaptionStore::update(const std::string& record_id, const std::function<CaptionSet(CaptionSet)>& fn) {
    std::lock_guard lock(m_mutex);
    auto it = m_sets.find(record_id);
    if (it == m_sets.end()) throw ValidationError("no caption set for record " + record_id);
    auto next = fn(it->second);
    if (next.record_id != record_id || next.review_state < it->second.review_state) {
        throw ValidationError("caption update for record " + record_id + " moves state backward");
    }
    it->second = next;
    return next;
}

std::map<std::string, CaptionSet> CaptionStore::snapshot() const {
    std::lock_guard lock(m_mutex);
    return m_sets;
}

}  // namespace ccub
