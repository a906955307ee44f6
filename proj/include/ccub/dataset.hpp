// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ccub/error.hpp"
#include "ccub/io.hpp"

namespace ccub {

enum class Category {
    food_drink,
    clothing,
    artwork,
    dance_music,
    religion,
    architecture,
    people,
    city,
    nature,
};

inline constexpr std::array<Category, 9> kAllCategories = {
    Category::food_drink, Category::clothing, Category::artwork,
    Category::dance_music, Category::religion, Category::architecture,
    Category::people, Category::city, Category::nature,
};

enum class Era { traditional, modern };
enum class License { creative_commons, own_photograph };

std::string_view to_string(Category c) noexcept;
std::string_view to_string(Era e) noexcept;
std::string_view to_string(License l) noexcept;
std::optional<Category> parse_category(std::string_view s) noexcept;
std::optional<Era> parse_era(std::string_view s) noexcept;
std::optional<License> parse_license(std::string_view s) noexcept;

/// Set of recognised countries. Seeded with the eight dataset cultures and
/// open for extension.
class CountryRegistry {
public:
    CountryRegistry();
    explicit CountryRegistry(std::vector<std::string> countries);

    static const CountryRegistry& defaults();

    bool contains(std::string_view country) const;
    void add(std::string country);
    const std::vector<std::string>& countries() const noexcept { return m_countries; }

private:
    std::vector<std::string> m_countries;
};

struct CulturalRecord {
    std::string id;
    std::string country;
    Category category = Category::food_drink;
    Era era = Era::traditional;
    std::string image_ref;
    std::string image_hash;
    std::string caption;
    License license = License::creative_commons;
    std::optional<std::string> source_url;

    bool operator==(const CulturalRecord&) const = default;
};

struct DatasetManifest {
    std::string schema_version = "1";
    std::vector<CulturalRecord> records;

    bool operator==(const DatasetManifest&) const = default;
};

struct DatasetStats {
    std::map<std::pair<std::string, Category>, long> counts;
    std::map<std::string, long> country_totals;
    std::map<Category, long> category_totals;
    long grand_total = 0;
    /// Countries in order of first appearance, for presentation.
    std::vector<std::string> country_order;

    long count(const std::string& country, Category category) const;
    long country_total(const std::string& country) const;
    long category_total(Category category) const;
};

/// Checks every record invariant; empty result means the record is valid.
std::vector<Violation> validate_record(const CulturalRecord& record,
                                       const CountryRegistry& registry = CountryRegistry::defaults());

/// Parses one record object, collecting violations instead of throwing.
/// Returns nullopt when any field cannot be represented.
std::optional<CulturalRecord> record_from_json(const json& obj, long index,
                                               std::vector<Violation>& violations);
json record_to_json(const CulturalRecord& record);

/// Validates a whole document; throws ValidationError with every violation.
DatasetManifest manifest_from_json(const json& doc,
                                   const CountryRegistry& registry = CountryRegistry::defaults());
json manifest_to_json(const DatasetManifest& manifest);

DatasetManifest load_manifest(const std::filesystem::path& path,
                              const CountryRegistry& registry = CountryRegistry::defaults());
void export_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

DatasetStats compute_stats(const DatasetManifest& manifest);

struct RecordFilter {
    std::optional<std::string> country;
    std::optional<Category> category;
    std::optional<Era> era;
};

/// Order-preserving subset; throws UsageError for a country outside the registry.
std::vector<CulturalRecord> filter_records(const DatasetManifest& manifest, const RecordFilter& filter,
                                           const CountryRegistry& registry = CountryRegistry::defaults());

/// Soft guideline: 10 to 20 images per (country, category) cell. Returns one
/// warning line per cell outside that band; never an error.
std::vector<std::string> lint_category_balance(const DatasetStats& stats);

/// Renders stats as an aligned text table or CSV, one row per country plus a totals row.
std::string format_stats_table(const DatasetStats& stats);
std::string format_stats_csv(const DatasetStats& stats);

}  // namespace ccub
