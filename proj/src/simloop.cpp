#include "cocoon/simloop.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "cocoon/errors.hpp"
#include "cocoon/io.hpp"
#include "cocoon/rng.hpp"
#include "json.hpp"

namespace cocoon {

using nlohmann::json;

void ClickModelParams::validate() const {
    if (!(base_rate >= 0.0 && base_rate <= 1.0)) throw ConfigError("base_rate must lie in [0, 1]");
    if (!(affinity_weight >= 0.0) || !std::isfinite(affinity_weight))
        throw ConfigError("affinity_weight must be finite and >= 0");
    if (max_clicks_per_round < 1) throw ConfigError("max_clicks_per_round must be >= 1");
}

std::vector<std::string> click_model(const Corpus& corpus, std::span<const std::string> history,
                                     std::span<const std::string> rec_list, const ClickModelParams& params,
                                     std::uint64_t seed, std::size_t user_index, std::size_t round) {
    std::map<std::string, std::size_t> counts;
    for (const auto& h : history) ++counts[corpus.news_item(h).category];
    Rng rng = make_rng(seed, {tag(Stream::Clicks), user_index, round});
    std::vector<std::string> clicks;
    for (const auto& id : rec_list) {
        const auto it = counts.find(corpus.news_item(id).category);
        const double share =
            history.empty() || it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(history.size());
        const double p = std::clamp(params.base_rate + params.affinity_weight * share, 0.0, 1.0);
        // Every item consumes one draw so truncation never shifts later draws.
        const bool hit = uniform01(rng) < p;
        if (hit && clicks.size() < params.max_clicks_per_round) clicks.push_back(id);
    }
    return clicks;
}

const char* to_string(LevelSelection sel) {
    switch (sel) {
        case LevelSelection::Category: return "category";
        case LevelSelection::Subcategory: return "subcategory";
        case LevelSelection::Both: return "both";
    }
    return "?";
}

LevelSelection parse_level_selection(std::string_view text) {
    if (text == "category") return LevelSelection::Category;
    if (text == "subcategory") return LevelSelection::Subcategory;
    if (text == "both") return LevelSelection::Both;
    throw ConfigError("unknown level '" + std::string(text) + "'");
}

std::vector<CategoryLevel> levels_of(LevelSelection sel) {
    switch (sel) {
        case LevelSelection::Category: return {CategoryLevel::Category};
        case LevelSelection::Subcategory: return {CategoryLevel::Subcategory};
        case LevelSelection::Both: return {CategoryLevel::Category, CategoryLevel::Subcategory};
    }
    return {};
}

const char* to_string(RepeatHistory mode) { return mode == RepeatHistory::PreRound ? "pre_round" : "initial"; }

RepeatHistory parse_repeat_history(std::string_view text) {
    if (text == "pre_round") return RepeatHistory::PreRound;
    if (text == "initial") return RepeatHistory::Initial;
    throw ConfigError("unknown repeat_history '" + std::string(text) + "'");
}

void SimConfig::validate() const {
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (k < 1) throw ConfigError("K must be >= 1");
    for (std::size_t d : report_ks)
        if (d < 1) throw ConfigError("report depths must be >= 1");
    click_model.validate();
    strategy.validate();
    train.validate();
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!(louvain.resolution > 0.0)) throw ConfigError("louvain resolution must be positive");
}

std::vector<std::size_t> SimConfig::depths() const {
    if (report_ks.empty()) return {k};
    std::vector<std::size_t> d = report_ks;
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
}

std::size_t SimConfig::list_depth() const {
    const auto d = depths();
    return std::max(k, d.back());
}

RecommenderModel prepare_model(const Corpus& corpus, const SimConfig& cfg, std::vector<EpochLoss>* trace) {
    if (!cfg.checkpoint.empty()) return load_checkpoint(cfg.checkpoint);
    if (cfg.recommender.kind == ModelKind::ContentCosine) return {ContentCosine::from_corpus(corpus)};
    TrainConfig train = cfg.train;
    train.seed = derive_seed(cfg.seed, {tag(Stream::TrainInit)});
    if (cfg.strategy.kind == StrategyKind::CDR) train.cdr_lambda = cfg.strategy.lambda;
    if (cfg.strategy.kind == StrategyKind::LTAO) train.ltao_mu = cfg.strategy.mu;
    auto result = train_model(corpus, cfg.recommender, train);
    if (trace) *trace = result.trace;
    return std::move(result.model);
}

namespace {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            try {
                for (std::size_t i = next++; i < n; i = next++) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

Partition singletons(std::size_t n) {
    Partition p;
    p.assignment.resize(n);
    std::iota(p.assignment.begin(), p.assignment.end(), 0);
    return p;
}

std::vector<std::string> news_ids(const Corpus& corpus) {
    std::vector<std::string> ids;
    ids.reserve(corpus.news().size());
    for (const auto& n : corpus.news()) ids.push_back(n.id);
    return ids;
}

std::vector<std::string> user_ids(const Corpus& corpus) {
    std::vector<std::string> ids;
    ids.reserve(corpus.users().size());
    for (const auto& u : corpus.users()) ids.push_back(u.id);
    return ids;
}

Partition detect(const BipartiteGraph& graph, const SimConfig& cfg, std::uint64_t seed) {
    if (graph.edges().empty()) return singletons(graph.node_count());
    return louvain_detailed(graph, seed, cfg.louvain).partition;
}

std::vector<MetricReport> measure(const Corpus& corpus, const std::vector<UserRound>& users,
                                  const BipartiteGraph& graph, const Partition& partition, const SimConfig& cfg,
                                  std::size_t round, const std::vector<std::vector<std::string>>* initial) {
    const bool use_initial = cfg.repeat_history == RepeatHistory::Initial;
    if (use_initial && (!initial || initial->size() != users.size()))
        throw ConfigError("repeat_history=initial needs the initial histories");
    std::vector<UserList> lists;
    std::vector<UserClicks> clicks;
    for (std::size_t i = 0; i < users.size(); ++i) {
        const auto& u = users[i];
        if (!u.skipped.empty()) continue;
        lists.push_back({u.user_id, u.list});
        clicks.push_back({u.user_id, u.clicks, use_initial ? (*initial)[i] : u.history_before});
    }
    std::vector<MetricReport> reports;
    for (CategoryLevel level : levels_of(cfg.level))
        for (std::size_t depth : cfg.depths()) {
            auto r = full_report(corpus, lists, clicks, graph, partition, level, depth, round, cfg.metrics);
            check_ranges(r);
            reports.push_back(std::move(r));
        }
    return reports;
}

}  // namespace

TrainResult train_model(const Corpus& corpus, const ModelSpec& spec, const TrainConfig& cfg) {
    return train(TrainingData::from_corpus(corpus), spec, cfg);
}

SimState SimState::start(const Corpus& corpus, RecommenderModel model, const SimConfig& cfg) {
    SimState s;
    s.corpus = &corpus;
    s.model = std::move(model);
    for (const auto& u : corpus.users()) s.histories.push_back(u.history);
    s.initial_histories = s.histories;
    const auto graph = build_graph(user_ids(corpus), s.histories, news_ids(corpus));
    s.partition = detect(graph, cfg, derive_seed(cfg.seed, {tag(Stream::Louvain), 0}));
    return s;
}

RoundSnapshot run_round(SimState& state, const SimConfig& cfg, std::size_t round) {
    const Corpus& corpus = *state.corpus;
    const auto all_news = news_ids(corpus);
    const auto all_users = user_ids(corpus);
    const std::size_t n_users = all_users.size();
    const std::size_t depth = cfg.list_depth();

    // Pre-round partition drives the community-aware strategies.
    CommunityLookup communities;
    for (std::size_t n = 0; n < all_news.size(); ++n)
        communities.emplace(all_news[n], state.partition.assignment[n_users + n]);

    std::vector<bool> active(n_users, true);
    if (cfg.user_sample > 0 && cfg.user_sample < n_users) {
        std::vector<std::size_t> idx(n_users);
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng = make_rng(cfg.seed, {tag(Stream::UserSample), round});
        for (std::size_t i = 0; i < cfg.user_sample; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n_users - i)]);
        std::fill(active.begin(), active.end(), false);
        for (std::size_t i = 0; i < cfg.user_sample; ++i) active[idx[i]] = true;
    }

    RoundSnapshot snap;
    snap.round = round;
    snap.users.resize(n_users);
    parallel_for(n_users, cfg.threads, [&](std::size_t u) {
        UserRound& out = snap.users[u];
        out.user_id = all_users[u];
        out.history_before = state.histories[u];
        if (!active[u]) {
            out.skipped = "not sampled";
            return;
        }
        const std::unordered_set<std::string> seen(out.history_before.begin(), out.history_before.end());
        std::vector<std::string> candidates;
        for (const auto& id : all_news)
            if (!seen.count(id)) candidates.push_back(id);
        if (cfg.candidate_sample > 0 && cfg.candidate_sample < candidates.size()) {
            Rng rng = make_rng(cfg.seed, {tag(Stream::CandidateSample), u, round});
            for (std::size_t i = 0; i < cfg.candidate_sample; ++i)
                std::swap(candidates[i], candidates[i + uniform_index(rng, candidates.size() - i)]);
            candidates.resize(cfg.candidate_sample);
            std::sort(candidates.begin(), candidates.end());
        }
        if (candidates.empty()) {
            out.skipped = "candidate pool empty";
            return;
        }
        const UserProfile profile{out.user_id, out.history_before};
        try {
            out.list = apply_strategy(cfg.strategy, state.model, profile, candidates, &communities, depth,
                                      derive_seed(cfg.seed, {tag(Stream::Strategy), u, round}));
        } catch (const DomainError& e) {
            out.skipped = e.what();
            out.list.clear();
            return;
        }
        const std::size_t served = std::min(cfg.k, out.list.size());
        out.clicks = click_model(corpus, out.history_before, std::span(out.list).first(served), cfg.click_model,
                                 cfg.seed, u, round);
    });

    std::size_t skipped = 0;
    for (std::size_t u = 0; u < n_users; ++u) {
        auto& ur = snap.users[u];
        if (!ur.skipped.empty()) {
            if (ur.skipped != "not sampled") ++skipped;
            continue;
        }
        append_capped(state.histories[u], ur.clicks);
        const std::size_t served = std::min(cfg.k, ur.list.size());
        state.simulated.push_back(Impression{"sim-" + std::to_string(round) + "-" + ur.user_id, ur.user_id,
                                             "round-" + std::to_string(round),
                                             std::vector<std::string>(ur.list.begin(), ur.list.begin() + static_cast<std::ptrdiff_t>(served)),
                                             ur.clicks});
    }
    if (skipped > 0) std::cerr << "warning: round " << round << ": " << skipped << " user(s) skipped\n";

    snap.graph = build_graph(all_users, state.histories, all_news);
    snap.partition = detect(snap.graph, cfg, derive_seed(cfg.seed, {tag(Stream::Louvain), round + 1}));
    snap.community_count = snap.partition.community_count();

    snap.reports = measure(corpus, snap.users, snap.graph, snap.partition, cfg, round, &state.initial_histories);
    state.partition = snap.partition;

    if (cfg.retrain_every > 0 && (round + 1) % cfg.retrain_every == 0 &&
        state.model.kind() != ModelKind::ContentCosine) {
        TrainingData data;
        data.news_ids = all_news;
        for (std::size_t u = 0; u < n_users; ++u) data.users.push_back({all_users[u], state.histories[u]});
        data.impressions = corpus.impressions();
        data.impressions.insert(data.impressions.end(), state.simulated.begin(), state.simulated.end());
        TrainConfig tc = cfg.train;
        tc.epochs = cfg.retrain_epochs;
        tc.seed = derive_seed(cfg.seed, {tag(Stream::Retrain), round});
        if (cfg.strategy.kind == StrategyKind::CDR) tc.cdr_lambda = cfg.strategy.lambda;
        if (cfg.strategy.kind == StrategyKind::LTAO) tc.ltao_mu = cfg.strategy.mu;
        state.model = fine_tune(std::move(state.model), data, tc).model;
    }
    return snap;
}

std::vector<MetricReport> recompute_reports(const Corpus& corpus, const RoundSnapshot& snap, const SimConfig& cfg,
                                            const std::vector<std::vector<std::string>>* initial_histories) {
    return measure(corpus, snap.users, snap.graph, snap.partition, cfg, snap.round, initial_histories);
}

std::optional<double> metric_value(const MetricReport& r, std::string_view metric) {
    if (metric == "N") return r.n_at_k;
    if (metric == "H") return r.h_at_k;
    if (metric == "R") return r.repeat_rate;
    if (metric == "D") return r.density;
    if (metric == "O") return r.openness;
    throw ConfigError("unknown metric '" + std::string(metric) + "'");
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return std::nullopt;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Average ranks, ties share the mean rank.
std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    return pearson(rx, ry);
}

void compute_trends(MetricSeries& series) {
    series.spearman.clear();
    series.pearson.clear();
    std::map<std::pair<CategoryLevel, std::size_t>, std::vector<const MetricReport*>> groups;
    for (const auto& row : series.rows) groups[{row.report.level, row.report.k}].push_back(&row.report);
    for (const auto& [key, reports] : groups) {
        MetricValues& out = series.spearman[key];
        for (const char* m : kMetricNames) {
            std::vector<double> rounds, values;
            for (const auto* r : reports)
                if (auto v = metric_value(*r, m)) {
                    rounds.push_back(static_cast<double>(r->round));
                    values.push_back(*v);
                }
            out[m] = spearman(rounds, values);
        }
    }
    for (const auto& [key, cat] : groups) {
        if (key.first != CategoryLevel::Category) continue;
        auto it = groups.find({CategoryLevel::Subcategory, key.second});
        if (it == groups.end()) continue;
        MetricValues& out = series.pearson[key.second];
        for (const char* m : kMetricNames) {
            std::map<std::size_t, double> sub;
            for (const auto* r : it->second)
                if (auto v = metric_value(*r, m)) sub[r->round] = *v;
            std::vector<double> x, y;
            for (const auto* r : cat) {
                auto v = metric_value(*r, m);
                auto s = sub.find(r->round);
                if (v && s != sub.end()) {
                    x.push_back(*v);
                    y.push_back(s->second);
                }
            }
            out[m] = pearson(x, y);
        }
    }
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string three_digits(std::size_t n) {
    std::string s = std::to_string(n);
    return s.size() >= 3 ? s : std::string(3 - s.size(), '0') + s;
}

}  // namespace

std::string snapshot_json(const RoundSnapshot& snap, StrategyKind strategy) {
    json users = json::array();
    for (const auto& u : snap.users) {
        json j{{"id", u.user_id}, {"history_before", u.history_before}, {"list", u.list}, {"clicks", u.clicks}};
        if (!u.skipped.empty()) j["skipped"] = u.skipped;
        users.push_back(std::move(j));
    }
    json reports = json::array();
    for (const auto& r : snap.reports) reports.push_back(json::parse(report_json(r)));
    json j{{"round", snap.round},
           {"strategy", to_string(strategy)},
           {"community_count", snap.community_count},
           {"users", std::move(users)},
           {"reports", std::move(reports)}};
    return j.dump(1) + "\n";
}

std::string series_csv(const MetricSeries& series) {
    std::string out = report_csv_header() + ",C\n";
    for (const auto& row : series.rows) out += report_csv_row(row.report) + ',' + std::to_string(row.communities) + '\n';
    return out;
}

MetricSeries parse_series_csv(const std::string& text) {
    MetricSeries s;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line != report_csv_header() + ",C") throw ParseError(lineno, "unexpected series.csv header");
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 9) throw ParseError(lineno, "expected 9 columns");
        SeriesRow row;
        try {
            row.report.round = std::stoul(f[0]);
            row.report.level = parse_level(f[1]);
            row.report.k = std::stoul(f[2]);
            std::optional<double>* slots[] = {&row.report.n_at_k, &row.report.h_at_k, &row.report.repeat_rate,
                                              &row.report.density, &row.report.openness};
            for (std::size_t i = 0; i < 5; ++i)
                if (!f[3 + i].empty()) *slots[i] = std::stod(f[3 + i]);
            row.communities = std::stoul(f[8]);
        } catch (const std::logic_error&) {
            throw ParseError(lineno, "malformed number");
        }
        s.rows.push_back(std::move(row));
    }
    compute_trends(s);
    return s;
}

std::string trends_json(const MetricSeries& series) {
    json sp = json::object();
    for (const auto& [key, values] : series.spearman) {
        json m = json::object();
        for (const auto& [name, v] : values) m[name] = opt_json(v);
        sp[std::string(to_string(key.first)) + "@" + std::to_string(key.second)] = std::move(m);
    }
    json pe = json::object();
    for (const auto& [k, values] : series.pearson) {
        json m = json::object();
        for (const auto& [name, v] : values) m[name] = opt_json(v);
        pe["K" + std::to_string(k)] = std::move(m);
    }
    return json{{"spearman_vs_round", std::move(sp)}, {"pearson_category_subcategory", std::move(pe)}}.dump(1) + "\n";
}

MetricSeries simulate(const Corpus& corpus, const SimConfig& cfg, RecommenderModel model,
                      const std::optional<std::string>& out_dir) {
    cfg.validate();
    if (corpus.users().empty()) throw EmptyInputError("simulation needs at least one user");
    SimState state = SimState::start(corpus, std::move(model), cfg);
    MetricSeries series;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir + "/rounds");
        std::filesystem::create_directories(*out_dir + "/graph");
    }
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        RoundSnapshot snap;
        try {
            snap = run_round(state, cfg, r);
        } catch (...) {
            if (out_dir) write_text_atomic(*out_dir + "/series.csv", series_csv(series));
            throw;
        }
        for (const auto& rep : snap.reports) series.rows.push_back({rep, snap.community_count});
        if (out_dir) {
            const std::string stem = three_digits(r);
            write_text_atomic(*out_dir + "/rounds/" + stem + ".json", snapshot_json(snap, cfg.strategy.kind));
            write_lines_atomic(*out_dir + "/graph/" + stem + ".edges", export_edges(snap.graph));
            write_lines_atomic(*out_dir + "/graph/" + stem + ".parts", export_partition(snap.graph, snap.partition));
            write_text_atomic(*out_dir + "/series.csv", series_csv(series));
        }
    }
    compute_trends(series);
    if (out_dir) write_text_atomic(*out_dir + "/trends.json", trends_json(series));
    return series;
}

std::optional<double> improvement_percent(std::string_view metric, double baseline, double value) {
    if (baseline == 0.0) return std::nullopt;
    const double direction = (metric == "R" || metric == "D") ? -1.0 : 1.0;
    if (metric != "N" && metric != "H" && metric != "O" && metric != "R" && metric != "D")
        throw ConfigError("unknown metric '" + std::string(metric) + "'");
    return direction * (value - baseline) / std::abs(baseline) * 100.0 + 0.0;
}

namespace {

// Final-round report per (level, K).
std::map<std::pair<CategoryLevel, std::size_t>, const MetricReport*> finals(const MetricSeries& s) {
    std::map<std::pair<CategoryLevel, std::size_t>, const MetricReport*> out;
    for (const auto& row : s.rows) {
        auto& slot = out[{row.report.level, row.report.k}];
        if (!slot || row.report.round >= slot->round) slot = &row.report;
    }
    return out;
}

}  // namespace

std::vector<ComparisonRow> compare_runs(std::span<const LabeledSeries> runs, std::string_view baseline_label) {
    const LabeledSeries* base = nullptr;
    for (const auto& r : runs)
        if (r.label == baseline_label) base = &r;
    if (!base) throw ConfigError("baseline '" + std::string(baseline_label) + "' is not among the runs");
    const auto base_final = finals(base->series);
    std::vector<ComparisonRow> rows;
    for (const auto& run : runs) {
        if (run.comparable_config != base->comparable_config)
            throw ConfigError("run '" + run.label + "' is not comparable with baseline '" + base->label +
                              "': configurations differ beyond strategy/recommender");
        const auto fin = finals(run.series);
        if (fin.size() != base_final.size())
            throw ConfigError("run '" + run.label + "' reports different (level, K) combinations");
        for (const auto& [key, rep] : fin) {
            auto b = base_final.find(key);
            if (b == base_final.end() || b->second->round != rep->round)
                throw ConfigError("run '" + run.label + "' does not match the baseline's rounds/depths");
            ComparisonRow row{run.label, key.first, key.second, {}, {}};
            for (const char* m : kMetricNames) {
                const auto v = metric_value(*rep, m);
                const auto bv = metric_value(*b->second, m);
                row.final_values[m] = v;
                row.improvement[m] = v && bv ? improvement_percent(m, *bv, *v) : std::nullopt;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "run,level,K";
    for (const char* m : kMetricNames) out += std::string(",") + m;
    for (const char* m : kMetricNames) out += std::string(",") + m + "_improv_pct";
    out += '\n';
    for (const auto& r : rows) {
        out += r.label + ',' + to_string(r.level) + ',' + std::to_string(r.k);
        for (const char* m : kMetricNames) {
            const auto& v = r.final_values.at(m);
            out += ',' + (v ? format_fixed(*v, 4) : std::string());
        }
        for (const char* m : kMetricNames) {
            const auto& v = r.improvement.at(m);
            out += ',' + (v ? format_fixed(*v, 2) : std::string());
        }
        out += '\n';
    }
    return out;
}

}  // namespace cocoon
