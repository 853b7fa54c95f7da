#include "cocoon/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cocoon/errors.hpp"
#include "cocoon/io.hpp"
#include "json.hpp"

namespace cocoon {

RecList resolve_list(const Corpus& corpus, const std::string& user_id, std::span<const std::string> items,
                     CategoryLevel level) {
    RecList out{user_id, {items.begin(), items.end()}, {}};
    out.categories.reserve(items.size());
    for (const auto& id : items) out.categories.push_back(corpus.news_item(id).label(level));
    return out;
}

ClickRecord resolve_clicks(const Corpus& corpus, const std::string& user_id, std::span<const std::string> clicked,
                           std::span<const std::string> history, CategoryLevel level) {
    ClickRecord out{user_id, {}, {}};
    for (const auto& id : clicked) out.clicked_categories.push_back(corpus.news_item(id).label(level));
    for (const auto& id : history) out.history_categories.insert(corpus.news_item(id).label(level));
    return out;
}

double topic_count(std::span<const RecList> lists) {
    double sum = 0.0;
    std::size_t users = 0;
    for (const auto& l : lists) {
        if (l.categories.empty()) continue;
        sum += static_cast<double>(std::set<std::string>(l.categories.begin(), l.categories.end()).size());
        ++users;
    }
    if (users == 0) throw EmptyInputError("topic count needs at least one nonempty list");
    return sum / static_cast<double>(users);
}

double category_entropy(std::span<const RecList> lists, LogBase base) {
    double sum = 0.0;
    std::size_t users = 0;
    for (const auto& l : lists) {
        if (l.categories.empty()) continue;
        std::map<std::string, std::size_t> counts;
        for (const auto& c : l.categories) ++counts[c];
        const double len = static_cast<double>(l.categories.size());
        double h = 0.0;
        for (const auto& [label, n] : counts) {
            const double p = static_cast<double>(n) / len;
            h -= p * (base == LogBase::Two ? std::log2(p) : std::log(p));
        }
        sum += h;
        ++users;
    }
    if (users == 0) throw EmptyInputError("entropy needs at least one nonempty list");
    return sum / static_cast<double>(users);
}

double click_repeat_rate(std::span<const ClickRecord> records) {
    double sum = 0.0;
    std::size_t users = 0;
    for (const auto& r : records) {
        if (r.clicked_categories.empty()) continue;
        std::size_t repeats = 0;
        for (const auto& c : r.clicked_categories) repeats += r.history_categories.count(c);
        sum += static_cast<double>(repeats) / static_cast<double>(r.clicked_categories.size());
        ++users;
    }
    if (users == 0) throw EmptyInputError("repeat rate needs at least one click");
    return sum / static_cast<double>(users);
}

double network_density(const CommunityStats& stats) {
    double sum = 0.0;
    std::size_t eligible = 0;
    for (const auto& c : stats.communities) {
        if (c.users == 0 || c.news == 0) continue;
        sum += static_cast<double>(c.internal_edges) / (static_cast<double>(c.users) * static_cast<double>(c.news));
        ++eligible;
    }
    if (eligible == 0) throw EmptyInputError("no community has both users and news");
    return sum / static_cast<double>(eligible);
}

double global_average_density(const CommunityStats& stats) {
    if (stats.communities.empty() || stats.user_count == 0 || stats.news_count == 0)
        throw EmptyInputError("global density needs users, news and at least one community");
    return static_cast<double>(stats.edge_count) /
           (static_cast<double>(stats.user_count) * static_cast<double>(stats.news_count)) /
           static_cast<double>(stats.communities.size());
}

double community_openness(const CommunityStats& stats) {
    double sum = 0.0;
    std::size_t eligible = 0;
    for (const auto& c : stats.communities) {
        const double in = static_cast<double>(c.internal_edges);
        const double ext = static_cast<double>(c.external_edges);
        if (in + ext == 0.0) continue;
        sum += (ext - in) / (ext + in);
        ++eligible;
    }
    if (eligible == 0) throw EmptyInputError("no community touches an edge");
    return sum / static_cast<double>(eligible);
}

double ndcg_at_k(std::span<const std::string> ranked, const std::set<std::string>& relevant, std::size_t k) {
    const std::size_t n = std::min(k, ranked.size());
    double dcg = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (relevant.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double ideal = 0.0;
    for (std::size_t i = 0; i < std::min(k, relevant.size()); ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return ideal == 0.0 ? 0.0 : dcg / ideal;
}

const char* to_string(DensityMode mode) {
    return mode == DensityMode::PerCommunity ? "per_community" : "global_avg";
}

DensityMode parse_density_mode(std::string_view text) {
    if (text == "per_community") return DensityMode::PerCommunity;
    if (text == "global_avg") return DensityMode::GlobalAverage;
    throw ConfigError("unknown density_mode '" + std::string(text) + "'");
}

namespace {

template <typename F>
void fill(std::optional<double>& slot, std::map<std::string, std::string>& absent, const char* name, F&& compute) {
    try {
        slot = compute();
    } catch (const EmptyInputError& e) {
        slot.reset();
        absent[name] = e.what();
    }
}

}  // namespace

MetricReport full_report(const Corpus& corpus, std::span<const UserList> lists, std::span<const UserClicks> clicks,
                         const BipartiteGraph& graph, const Partition& partition, CategoryLevel level,
                         std::size_t k, std::size_t round, const MetricOptions& options) {
    MetricReport r;
    r.level = level;
    r.k = k;
    r.round = round;

    std::vector<RecList> resolved;
    resolved.reserve(lists.size());
    for (const auto& l : lists) {
        const std::size_t n = std::min(k, l.items.size());
        resolved.push_back(resolve_list(corpus, l.user_id, std::span(l.items).first(n), level));
    }
    std::vector<ClickRecord> records;
    records.reserve(clicks.size());
    for (const auto& c : clicks) records.push_back(resolve_clicks(corpus, c.user_id, c.clicked, c.history, level));

    fill(r.n_at_k, r.absent, "N", [&] { return topic_count(resolved); });
    fill(r.h_at_k, r.absent, "H", [&] { return category_entropy(resolved, options.log_base); });
    fill(r.repeat_rate, r.absent, "R", [&] { return click_repeat_rate(records); });

    if (graph.edges().empty()) {
        r.absent["D"] = "graph has no edges";
        r.absent["O"] = "graph has no edges";
        return r;
    }
    const auto stats = community_stats(graph, partition);
    fill(r.density, r.absent, "D", [&] {
        return options.density_mode == DensityMode::PerCommunity ? network_density(stats)
                                                                 : global_average_density(stats);
    });
    fill(r.openness, r.absent, "O", [&] { return community_openness(stats); });
    return r;
}

void check_ranges(const MetricReport& r) {
    auto in = [](const std::optional<double>& v, double lo, double hi, const char* name) {
        if (v && !(*v >= lo - 1e-12 && *v <= hi + 1e-12))
            throw IntegrityError(std::string(name) + " = " + std::to_string(*v) + " out of range");
    };
    if (r.n_at_k && *r.n_at_k < 1.0 - 1e-12) throw IntegrityError("N below 1");
    in(r.h_at_k, 0.0, INFINITY, "H");
    in(r.repeat_rate, 0.0, 1.0, "R");
    in(r.density, 0.0, 1.0, "D");
    in(r.openness, -1.0, 1.0, "O");
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_fixed(*v, 10) : std::string(); }

}  // namespace

std::string report_csv_header() { return "round,level,K,N,H,R,D,O"; }

std::string report_csv_row(const MetricReport& r) {
    return std::to_string(r.round) + ',' + to_string(r.level) + ',' + std::to_string(r.k) + ',' + cell(r.n_at_k) +
           ',' + cell(r.h_at_k) + ',' + cell(r.repeat_rate) + ',' + cell(r.density) + ',' + cell(r.openness);
}

std::string report_json(const MetricReport& r) {
    auto val = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j{{"round", r.round}, {"level", to_string(r.level)}, {"K", r.k},
                     {"N", val(r.n_at_k)}, {"H", val(r.h_at_k)},        {"R", val(r.repeat_rate)},
                     {"D", val(r.density)}, {"O", val(r.openness)}};
    if (!r.absent.empty()) j["absent"] = r.absent;
    return j.dump();
}

std::string format_table_row(const MetricReport& r) {
    std::string out;
    for (const auto* v : {&r.n_at_k, &r.h_at_k, &r.repeat_rate, &r.density, &r.openness}) {
        if (!out.empty()) out += ' ';
        out += *v ? format_fixed(**v, 4) : "-";
    }
    return out;
}

}  // namespace cocoon
