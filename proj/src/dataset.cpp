// SPDX-License-Identifier: Apache-2.0

#include "ccub/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <set>
#include <sstream>

namespace ccub {

namespace {

constexpr std::array<std::string_view, 9> kCategoryNames = {
    "food_drink", "clothing", "artwork", "dance_music", "religion",
    "architecture", "people", "city", "nature",
};

constexpr std::string_view kDefaultCountries[] = {
    "Korea", "Japan", "China", "Mexico", "Nigeria", "Norway", "Vietnam", "United States",
};

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

bool is_sha256_hex(std::string_view s) {
    return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

}  // namespace

std::string_view to_string(Category c) noexcept { return kCategoryNames[static_cast<std::size_t>(c)]; }

std::string_view to_string(Era e) noexcept { return e == Era::traditional ? "traditional" : "modern"; }

std::string_view to_string(License l) noexcept {
    return l == License::creative_commons ? "creative_commons" : "own_photograph";
}

std::optional<Category> parse_category(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (kCategoryNames[i] == s) {
            return static_cast<Category>(i);
        }
    }
    return std::nullopt;
}

std::optional<Era> parse_era(std::string_view s) noexcept {
    if (s == "traditional") return Era::traditional;
    if (s == "modern") return Era::modern;
    return std::nullopt;
}

std::optional<License> parse_license(std::string_view s) noexcept {
    if (s == "creative_commons") return License::creative_commons;
    if (s == "own_photograph") return License::own_photograph;
    return std::nullopt;
}

CountryRegistry::CountryRegistry() : m_countries(std::begin(kDefaultCountries), std::end(kDefaultCountries)) {}

CountryRegistry::CountryRegistry(std::vector<std::string> countries) : m_countries(std::move(countries)) {}

const CountryRegistry& CountryRegistry::defaults() {
    static const CountryRegistry registry;
    return registry;
}

bool CountryRegistry::contains(std::string_view country) const {
    return std::find(m_countries.begin(), m_countries.end(), country) != m_countries.end();
}

void CountryRegistry::add(std::string country) {
    if (!contains(country)) {
        m_countries.push_back(std::move(country));
    }
}

long DatasetStats::count(const std::string& country, Category category) const {
    auto it = counts.find({country, category});
    return it == counts.end() ? 0 : it->second;
}

long DatasetStats::country_total(const std::string& country) const {
    auto it = country_totals.find(country);
    return it == country_totals.end() ? 0 : it->second;
}

long DatasetStats::category_total(Category category) const {
    auto it = category_totals.find(category);
    return it == category_totals.end() ? 0 : it->second;
}

std::vector<Violation> validate_record(const CulturalRecord& record, const CountryRegistry& registry) {
    std::vector<Violation> out;
    if (is_blank(record.id)) {
        out.push_back({-1, "id", "must be nonempty"});
    }
    if (!registry.contains(record.country)) {
        out.push_back({-1, "country", "unknown country '" + record.country + "'"});
    }
    if (is_blank(record.image_ref)) {
        out.push_back({-1, "image_ref", "must be nonempty"});
    }
    if (!is_sha256_hex(record.image_hash)) {
        out.push_back({-1, "image_hash", "must be 64 lowercase hex characters"});
    }
    if (is_blank(record.caption)) {
        out.push_back({-1, "caption", "must be nonempty after trimming"});
    }
    return out;
}

std::optional<CulturalRecord> record_from_json(const json& obj, long index, std::vector<Violation>& violations) {
    if (!obj.is_object()) {
        violations.push_back({index, "record", "must be an object"});
        return std::nullopt;
    }
    bool ok = true;
    auto get_string = [&](const char* field, bool required) -> std::optional<std::string> {
        auto it = obj.find(field);
        if (it == obj.end() || it->is_null()) {
            if (required) {
                violations.push_back({index, field, "missing"});
                ok = false;
            }
            return std::nullopt;
        }
        if (!it->is_string()) {
            violations.push_back({index, field, "must be a string"});
            ok = false;
            return std::nullopt;
        }
        return it->get<std::string>();
    };

    CulturalRecord r;
    r.id = get_string("id", true).value_or("");
    r.country = get_string("country", true).value_or("");
    r.image_ref = get_string("image_ref", true).value_or("");
    r.image_hash = get_string("image_hash", true).value_or("");
    r.caption = get_string("caption", true).value_or("");
    r.source_url = get_string("source_url", false);

    if (auto s = get_string("category", true)) {
        if (auto c = parse_category(*s)) {
            r.category = *c;
        } else {
            violations.push_back({index, "category", "'" + *s + "' is not one of the nine categories"});
            ok = false;
        }
    }
    if (auto s = get_string("era", true)) {
        if (auto e = parse_era(*s)) {
            r.era = *e;
        } else {
            violations.push_back({index, "era", "'" + *s + "' is not traditional or modern"});
            ok = false;
        }
    }
    if (auto s = get_string("license", true)) {
        if (auto l = parse_license(*s)) {
            r.license = *l;
        } else {
            violations.push_back({index, "license", "'" + *s + "' is not creative_commons or own_photograph"});
            ok = false;
        }
    }
    if (!ok) {
        return std::nullopt;
    }
    return r;
}

json record_to_json(const CulturalRecord& r) {
    json obj = {
        {"id", r.id},
        {"country", r.country},
        {"category", to_string(r.category)},
        {"era", to_string(r.era)},
        {"image_ref", r.image_ref},
        {"image_hash", r.image_hash},
        {"caption", r.caption},
        {"license", to_string(r.license)},
    };
    if (r.source_url) {
        obj["source_url"] = *r.source_url;
    }
    return obj;
}

DatasetManifest manifest_from_json(const json& doc, const CountryRegistry& registry) {
    std::vector<Violation> violations;
    DatasetManifest m;
    if (!doc.is_object()) {
        throw ValidationError("manifest must be an object");
    }
    if (auto it = doc.find("schema_version"); it != doc.end() && it->is_string()) {
        m.schema_version = it->get<std::string>();
    } else {
        violations.push_back({-1, "schema_version", "missing or not a string"});
    }
    auto recs = doc.find("records");
    if (recs == doc.end() || !recs->is_array()) {
        violations.push_back({-1, "records", "missing or not an array"});
        throw ValidationError("invalid manifest", std::move(violations));
    }
    std::set<std::string> seen;
    long index = 0;
    for (const auto& obj : *recs) {
        if (auto rec = record_from_json(obj, index, violations)) {
            for (auto v : validate_record(*rec, registry)) {
                v.index = index;
                violations.push_back(std::move(v));
            }
            if (!seen.insert(rec->id).second) {
                violations.push_back({index, "id", "duplicate id '" + rec->id + "'"});
            }
            m.records.push_back(std::move(*rec));
        }
        ++index;
    }
    if (!violations.empty()) {
        throw ValidationError("invalid manifest", std::move(violations));
    }
    return m;
}

json manifest_to_json(const DatasetManifest& manifest) {
    json records = json::array();
    for (const auto& r : manifest.records) {
        records.push_back(record_to_json(r));
    }
    return {{"schema_version", manifest.schema_version}, {"records", std::move(records)}};
}

DatasetManifest load_manifest(const std::filesystem::path& path, const CountryRegistry& registry) {
    return manifest_from_json(parse_json_file(path), registry);
}

void export_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    write_text_file(path, canonical_dump(manifest_to_json(manifest)));
}

DatasetStats compute_stats(const DatasetManifest& manifest) {
    DatasetStats s;
    for (const auto& r : manifest.records) {
        ++s.counts[{r.country, r.category}];
        if (s.country_totals[r.country]++ == 0) {
            s.country_order.push_back(r.country);
        }
        ++s.category_totals[r.category];
        ++s.grand_total;
    }
    return s;
}

std::vector<CulturalRecord> filter_records(const DatasetManifest& manifest, const RecordFilter& filter,
                                           const CountryRegistry& registry) {
    if (filter.country && !registry.contains(*filter.country)) {
        throw UsageError("unknown country '" + *filter.country + "'");
    }
    std::vector<CulturalRecord> out;
    for (const auto& r : manifest.records) {
        if (filter.country && r.country != *filter.country) continue;
        if (filter.category && r.category != *filter.category) continue;
        if (filter.era && r.era != *filter.era) continue;
        out.push_back(r);
    }
    return out;
}

std::vector<std::string> lint_category_balance(const DatasetStats& stats) {
    std::vector<std::string> out;
    for (const auto& country : stats.country_order) {
        for (auto c : kAllCategories) {
            const long n = stats.count(country, c);
            if (n < 10 || n > 20) {
                out.push_back("warning: " + country + "/" + std::string(to_string(c)) + " has " +
                              std::to_string(n) + " records (guideline 10-20)");
            }
        }
    }
    return out;
}

std::string format_stats_table(const DatasetStats& stats) {
    std::size_t name_w = 5;
    for (const auto& c : stats.country_order) name_w = std::max(name_w, c.size());
    std::size_t col_w = 5;
    for (auto c : kAllCategories) col_w = std::max(col_w, to_string(c).size());

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_w)) << "" << std::right;
    for (auto c : kAllCategories) out << "  " << std::setw(static_cast<int>(col_w)) << to_string(c);
    out << "  " << std::setw(static_cast<int>(col_w)) << "total" << "\n";

    auto row = [&](const std::string& label, auto cell, long total) {
        out << std::left << std::setw(static_cast<int>(name_w)) << label << std::right;
        for (auto c : kAllCategories) out << "  " << std::setw(static_cast<int>(col_w)) << cell(c);
        out << "  " << std::setw(static_cast<int>(col_w)) << total << "\n";
    };
    for (const auto& country : stats.country_order) {
        row(country, [&](Category c) { return stats.count(country, c); }, stats.country_total(country));
    }
    row("Total", [&](Category c) { return stats.category_total(c); }, stats.grand_total);
    return out.str();
}

std::string format_stats_csv(const DatasetStats& stats) {
    std::ostringstream out;
    out << "country";
    for (auto c : kAllCategories) out << ',' << to_string(c);
    out << ",total\n";
    auto quote = [](const std::string& s) {
        return s.find_first_of(",\"") == std::string::npos ? s : "\"" + s + "\"";
    };
    for (const auto& country : stats.country_order) {
        out << quote(country);
        for (auto c : kAllCategories) out << ',' << stats.count(country, c);
        out << ',' << stats.country_total(country) << "\n";
    }
    out << "Total";
    for (auto c : kAllCategories) out << ',' << stats.category_total(c);
    out << ',' << stats.grand_total << "\n";
    return out.str();
}

}  // namespace ccub
