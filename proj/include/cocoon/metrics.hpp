#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cocoon/corpus.hpp"
#include "cocoon/graph.hpp"

namespace cocoon {

// A user's recommendation list with each item's label at the chosen category level.
struct RecList {
    std::string user_id;
    std::vector<std::string> items;
    std::vector<std::string> categories;
};

// Throws LookupError for unknown news.
RecList resolve_list(const Corpus& corpus, const std::string& user_id,
                     std::span<const std::string> items, CategoryLevel level);

struct ClickRecord {
    std::string user_id;
    std::vector<std::string> clicked_categories;
    std::set<std::string> history_categories;
};

ClickRecord resolve_clicks(const Corpus& corpus, const std::string& user_id,
                           std::span<const std::string> clicked, std::span<const std::string> history,
                           CategoryLevel level);

enum class LogBase { Two, E };

// Mean number of distinct labels per nonempty list.
double topic_count(std::span<const RecList> lists);
// Mean Shannon entropy of the label distribution inside each nonempty list.
double category_entropy(std::span<const RecList> lists, LogBase base = LogBase::Two);
// Mean, over users with at least one click, of the share of clicks whose label is
// already among the user's history labels.
double click_repeat_rate(std::span<const ClickRecord> records);

// Mean internal density over communities with users and news on both sides.
double network_density(const CommunityStats& stats);
// |E| / (|U| * |N|) / C over all communities.
double global_average_density(const CommunityStats& stats);
// Mean of (ext - int) / (ext + int) over communities that touch at least one edge.
double community_openness(const CommunityStats& stats);

// Binary-relevance NDCG over the first k ranked items.
double ndcg_at_k(std::span<const std::string> ranked, const std::set<std::string>& relevant, std::size_t k);

enum class DensityMode { PerCommunity, GlobalAverage };

const char* to_string(DensityMode mode);
DensityMode parse_density_mode(std::string_view text);

struct MetricOptions {
    LogBase log_base = LogBase::Two;
    DensityMode density_mode = DensityMode::PerCommunity;
};

struct UserList {
    std::string user_id;
    std::vector<std::string> items;
};

struct UserClicks {
    std::string user_id;
    std::vector<std::string> clicked;
    std::vector<std::string> history;  // history the clicks are compared against
};

// One row of the five indicators. A metric whose input is empty is absent and carries
// the reason in `absent`.
struct MetricReport {
    std::optional<double> n_at_k;
    std::optional<double> h_at_k;
    std::optional<double> repeat_rate;
    std::optional<double> density;
    std::optional<double> openness;
    std::map<std::string, std::string> absent;
    CategoryLevel level = CategoryLevel::Category;
    std::size_t k = 20;
    std::size_t round = 0;

    bool operator==(const MetricReport&) const = default;
};

// Lists are truncated to k before measuring.
MetricReport full_report(const Corpus& corpus, std::span<const UserList> lists,
                         std::span<const UserClicks> clicks, const BipartiteGraph& graph,
                         const Partition& partition, CategoryLevel level, std::size_t k, std::size_t round,
                         const MetricOptions& options = {});

// Raises IntegrityError if a present value lies outside its admissible range.
void check_ranges(const MetricReport& report);

// "round,level,K,N,H,R,D,O"; absent values are empty cells.
std::string report_csv_header();
std::string report_csv_row(const MetricReport& report);
std::string report_json(const MetricReport& report);
// "N H R D O" with 4 decimals, "-" for absent.
std::string format_table_row(const MetricReport& report);

}  // namespace cocoon
