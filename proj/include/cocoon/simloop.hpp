#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cocoon/corpus.hpp"
#include "cocoon/graph.hpp"
#include "cocoon/metrics.hpp"
#include "cocoon/mitigation.hpp"
#include "cocoon/recsys.hpp"

namespace cocoon {

struct ClickModelParams {
    double base_rate = 0.05;
    double affinity_weight = 0.6;
    std::size_t max_clicks_per_round = 5;

    void validate() const;
};

// Clicks on a served list. Each item is clicked independently with probability
// clamp(base_rate + affinity_weight * share of its category in `history`, 0, 1); only the
// max_clicks_per_round highest-ranked clicks are kept. Draws are seeded by (seed, user, round).
std::vector<std::string> click_model(const Corpus& corpus, std::span<const std::string> history,
                                     std::span<const std::string> rec_list, const ClickModelParams& params,
                                     std::uint64_t seed, std::size_t user_index, std::size_t round);

enum class LevelSelection { Category, Subcategory, Both };

const char* to_string(LevelSelection sel);
LevelSelection parse_level_selection(std::string_view text);
std::vector<CategoryLevel> levels_of(LevelSelection sel);

// Which history the repeat rate compares clicks against.
enum class RepeatHistory { PreRound, Initial };

const char* to_string(RepeatHistory mode);
RepeatHistory parse_repeat_history(std::string_view text);

struct SimConfig {
    std::size_t rounds = 30;
    std::size_t k = 20;                   // served list length
    std::vector<std::size_t> report_ks;   // measured depths; empty means {k}
    LevelSelection level = LevelSelection::Category;
    ClickModelParams click_model;
    StrategyConfig strategy;
    ModelSpec recommender;
    std::string checkpoint;               // load instead of training when nonempty
    TrainConfig train;
    std::size_t retrain_every = 0;        // 0 = never
    std::size_t retrain_epochs = 2;
    std::size_t candidate_sample = 0;     // 0 = every unseen item
    std::size_t user_sample = 0;          // 0 = every user
    RepeatHistory repeat_history = RepeatHistory::PreRound;
    MetricOptions metrics;
    LouvainOptions louvain;
    std::uint64_t seed = 42;
    // Worker threads for per-user work; results do not depend on it.
    std::size_t threads = 1;

    void validate() const;
    std::vector<std::size_t> depths() const;
    std::size_t list_depth() const;
};

TrainResult train_model(const Corpus& corpus, const ModelSpec& spec, const TrainConfig& cfg);

// Model for a run: checkpoint, content model, or trained (CDR/LTAO weights routed in).
RecommenderModel prepare_model(const Corpus& corpus, const SimConfig& cfg,
                               std::vector<EpochLoss>* trace = nullptr);

struct UserRound {
    std::string user_id;
    std::vector<std::string> history_before;
    std::vector<std::string> list;    // ranked to list_depth()
    std::vector<std::string> clicks;  // subset of the served prefix
    std::string skipped;              // nonempty when the user got no list this round

    bool operator==(const UserRound&) const = default;
};

struct RoundSnapshot {
    std::size_t round = 0;
    std::vector<UserRound> users;
    std::vector<MetricReport> reports;
    std::size_t community_count = 0;
    BipartiteGraph graph;  // post-round
    Partition partition;
};

struct SimState {
    const Corpus* corpus = nullptr;
    RecommenderModel model;
    std::vector<std::vector<std::string>> histories;  // corpus user order
    std::vector<std::vector<std::string>> initial_histories;
    std::vector<Impression> simulated;
    Partition partition;  // of the current histories

    static SimState start(const Corpus& corpus, RecommenderModel model, const SimConfig& cfg);
};

RoundSnapshot run_round(SimState& state, const SimConfig& cfg, std::size_t round);

// Metrics of a snapshot recomputed from its stored lists, clicks, graph and partition.
// initial_histories is required when cfg.repeat_history is Initial.
std::vector<MetricReport> recompute_reports(const Corpus& corpus, const RoundSnapshot& snap, const SimConfig& cfg,
                                            const std::vector<std::vector<std::string>>* initial_histories = nullptr);

struct SeriesRow {
    MetricReport report;
    std::size_t communities = 0;
};

using MetricValues = std::map<std::string, std::optional<double>>;  // keyed N, H, R, D, O

struct MetricSeries {
    std::vector<SeriesRow> rows;
    // Spearman rank correlation of each metric against the round index, per (level, K).
    std::map<std::pair<CategoryLevel, std::size_t>, MetricValues> spearman;
    // Pearson correlation between category and subcategory series, per K (level = both).
    std::map<std::size_t, MetricValues> pearson;
};

inline constexpr const char* kMetricNames[] = {"N", "H", "R", "D", "O"};

std::optional<double> metric_value(const MetricReport& r, std::string_view metric);

// Null when fewer than two points or a constant series.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

void compute_trends(MetricSeries& series);

// Runs cfg.rounds rounds. With out_dir set, writes config-independent artifacts as it goes:
// rounds/NNN.json, graph/NNN.edges, graph/NNN.parts, series.csv (rewritten every round) and
// trends.json at the end.
MetricSeries simulate(const Corpus& corpus, const SimConfig& cfg, RecommenderModel model,
                      const std::optional<std::string>& out_dir = std::nullopt);

std::string series_csv(const MetricSeries& series);
MetricSeries parse_series_csv(const std::string& text);
std::string trends_json(const MetricSeries& series);
std::string snapshot_json(const RoundSnapshot& snap, StrategyKind strategy);

// Direction-aware relative change in percent: +1 for N, H, O and -1 for R, D. The change is
// taken relative to |baseline| so a positive result always means movement in the desired direction.
std::optional<double> improvement_percent(std::string_view metric, double baseline, double value);

struct LabeledSeries {
    std::string label;
    std::string comparable_config;  // canonical text of the config minus strategy/recommender parts
    MetricSeries series;
};

struct ComparisonRow {
    std::string label;
    CategoryLevel level = CategoryLevel::Category;
    std::size_t k = 0;
    MetricValues final_values;
    MetricValues improvement;
};

// Final-round values of every run and their improvement over the baseline run.
// Throws ConfigError when runs are not comparable.
std::vector<ComparisonRow> compare_runs(std::span<const LabeledSeries> runs, std::string_view baseline_label);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);

}  // namespace cocoon
