// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccub/captions.hpp"
#include "ccub/dataset.hpp"

namespace ccub {

/// Appended to every base prompt in the fine-tune corpus, and to the given
/// prompt at inference time.
inline constexpr std::string_view kSeparator = "\n\n###\n\n";
/// Terminates every completion in the fine-tune corpus.
inline constexpr std::string_view kStopToken = "\nEND";
inline constexpr double kDefaultTemperature = 0.7;

struct AugmentationPair {
    std::string base_prompt;
    std::string target_prompt;
    std::string country;

    bool operator==(const AugmentationPair&) const = default;
};

std::vector<Violation> validate_pair(const AugmentationPair& pair);

struct FinetuneCorpus {
    std::string country;
    std::vector<AugmentationPair> pairs;

    bool operator==(const FinetuneCorpus&) const = default;
};

AugmentationPair build_pair(const CaptionSet& set, const CulturalRecord& record);

/// One JSON object per line: prompt = base + separator, completion =
/// " " + target + stop token.
std::string corpus_to_jsonl(const FinetuneCorpus& corpus);
FinetuneCorpus corpus_from_jsonl(std::string_view text, const std::string& country);
void serialize_corpus(const FinetuneCorpus& corpus, const std::filesystem::path& path);
FinetuneCorpus parse_corpus(const std::filesystem::path& path, const std::string& country);

/// Text completion model fine-tuned for one country.
class Augmentor {
public:
    virtual ~Augmentor() = default;
    virtual std::string complete(const std::string& prompt, double temperature, std::string_view stop,
                                 std::optional<std::uint64_t> seed) = 0;
};

/// Offline stand-in for a fine-tuned completion model: answers with the
/// target caption of a corpus pair whose base prompt overlaps the input.
/// Temperature 0 picks the best overlap; higher temperatures sample from a
/// softmax over overlap scores.
class CorpusAugmentor final : public Augmentor {
public:
    explicit CorpusAugmentor(FinetuneCorpus corpus);
    std::string complete(const std::string& prompt, double temperature, std::string_view stop,
                         std::optional<std::uint64_t> seed) override;

private:
    FinetuneCorpus m_corpus;
};

/// Country -> fine-tuned augmentor.
class AugmentorRegistry {
public:
    void bind(const std::string& country, std::shared_ptr<Augmentor> augmentor);
    std::shared_ptr<Augmentor> find(const std::string& country) const;
    Augmentor& at(const std::string& country) const;

private:
    std::map<std::string, std::shared_ptr<Augmentor>> m_models;
};

/// The completion came back empty once the stop token was removed. Callers
/// may retry with another seed.
class EmptyCompletionError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

std::string augment(const std::string& given, const std::string& country, Augmentor& augmentor,
                    double temperature = kDefaultTemperature, std::optional<std::uint64_t> seed = std::nullopt);

struct AssembledPrompt {
    std::string given;
    std::string augmentation;
    std::string country;
    std::string final;
};

/// "{given}, {augmentation}, in {country}", without repeating a country
/// suffix the augmentation already ends with.
AssembledPrompt assemble_prompt(const std::string& given, const std::string& augmentation,
                                const std::string& country);

/// "{given}, {country}"
std::string baseline_prompt(const std::string& given, const std::string& country);

/// True when `text` ends with a country suffix (", in C", ", C", or is just
/// "in C" / "C"), compared case-insensitively.
bool ends_with_country_suffix(std::string_view text, std::string_view country);

}  // namespace ccub
