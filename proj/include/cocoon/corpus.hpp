#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cocoon {

inline constexpr std::size_t kMaxTitleTokens = 20;
inline constexpr std::size_t kMaxAbstractTokens = 50;
inline constexpr std::size_t kMaxHistory = 50;

enum class CategoryLevel { Category, Subcategory };

const char* to_string(CategoryLevel level);
CategoryLevel parse_level(std::string_view text);

struct NewsItem {
    std::string id;
    std::string category;
    std::string subcategory;
    std::vector<std::string> title_tokens;
    std::vector<std::string> abstract_tokens;

    const std::string& label(CategoryLevel level) const {
        return level == CategoryLevel::Category ? category : subcategory;
    }

    bool operator==(const NewsItem&) const = default;
};

struct UserProfile {
    std::string id;
    // Most recent last; never longer than kMaxHistory.
    std::vector<std::string> history;

    bool operator==(const UserProfile&) const = default;
};

struct Impression {
    std::string impression_id;
    std::string user_id;
    std::string timestamp;
    std::vector<std::string> candidates;
    std::vector<std::string> clicks;

    bool operator==(const Impression&) const = default;
};

// Appends items to a history, evicting the oldest entries past kMaxHistory.
void append_capped(std::vector<std::string>& history, std::span<const std::string> items);

// Lowercase, split on whitespace (ASCII and common Unicode spaces) and ASCII punctuation,
// keep at most `cap` tokens.
std::vector<std::string> tokenize(std::string_view text, std::size_t cap);

// News catalog, users and impression logs with referential integrity.
// Insertion order of news and users is preserved and is the canonical iteration order.
class Corpus {
public:
    Corpus() = default;

    // Throws DuplicateIdError / IntegrityError.
    Corpus(std::vector<NewsItem> news, std::vector<UserProfile> users,
           std::vector<Impression> impressions);

    const std::vector<NewsItem>& news() const { return news_; }
    const std::vector<UserProfile>& users() const { return users_; }
    const std::vector<Impression>& impressions() const { return impressions_; }

    std::optional<std::size_t> news_index(std::string_view id) const;
    std::optional<std::size_t> user_index(std::string_view id) const;

    // Throws LookupError for unknown ids.
    const NewsItem& news_item(std::string_view id) const;
    const UserProfile& user(std::string_view id) const;

    std::size_t category_count(CategoryLevel level) const;

    bool operator==(const Corpus& other) const {
        return news_ == other.news_ && users_ == other.users_ && impressions_ == other.impressions_;
    }

private:
    std::vector<NewsItem> news_;
    std::vector<UserProfile> users_;
    std::vector<Impression> impressions_;
    std::unordered_map<std::string, std::size_t> news_by_id_;
    std::unordered_map<std::string, std::size_t> user_by_id_;
};

std::vector<NewsItem> parse_mind_news(std::span<const std::string> lines);

struct BehaviorsParse {
    std::vector<Impression> impressions;
    // First-seen order; the history of a user comes from its last line.
    std::vector<UserProfile> users;
};

BehaviorsParse parse_mind_behaviors(std::span<const std::string> lines);

std::vector<std::string> serialize_mind_news(const Corpus& corpus);
// One line per impression, carrying the user's current history.
std::vector<std::string> serialize_mind_behaviors(const Corpus& corpus);

std::vector<std::string> read_lines(const std::string& path);
Corpus load_mind(const std::string& news_path, const std::string& behaviors_path);
// Writes news.tsv and behaviors.tsv into dir.
void save_mind(const Corpus& corpus, const std::string& dir);

struct SynthConfig {
    std::size_t n_users = 500;
    std::size_t n_news = 1000;
    std::size_t n_categories = 10;
    std::size_t subcats_per_category = 4;
    double preference_concentration = 0.3;
    std::size_t history_len = 10;
    std::uint64_t seed = 42;

    void validate() const;
};

Corpus synth_corpus(const SynthConfig& cfg);

// Table-1 shaped counts.
struct CorpusSummary {
    std::size_t news = 0;
    std::size_t users = 0;
    std::size_t categories = 0;
    std::size_t subcategories = 0;
    std::size_t impressions = 0;
};

CorpusSummary summarize(const Corpus& corpus);

}  // namespace cocoon
