#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cocoon/errors.hpp"
#include "cocoon/simloop.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cocoon;

namespace {

Corpus small_corpus(std::uint64_t seed = 5) {
    SynthConfig s;
    s.n_users = 40;
    s.n_news = 120;
    s.n_categories = 4;
    s.subcats_per_category = 2;
    s.history_len = 5;
    s.seed = seed;
    return synth_corpus(s);
}

SimConfig small_config() {
    SimConfig cfg;
    cfg.rounds = 3;
    cfg.k = 10;
    cfg.report_ks = {5, 10};
    cfg.level = LevelSelection::Both;
    cfg.train.epochs = 3;
    cfg.train.learning_rate = 0.05;
    cfg.recommender.dim = 8;
    cfg.seed = 11;
    cfg.train.seed = 11;
    cfg.click_model.base_rate = 0.2;
    return cfg;
}

std::string run_csv(const Corpus& c, const SimConfig& cfg) {
    return series_csv(simulate(c, cfg, prepare_model(c, cfg)));
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST_CASE("click model extremes and replay") {
    const auto c = small_corpus();
    const auto& user = c.users()[0];
    std::vector<std::string> list;
    for (std::size_t i = 0; i < 20; ++i) list.push_back(c.news()[i].id);

    ClickModelParams all{1.0, 0.0, 100};
    CHECK(click_model(c, user.history, list, all, 1, 0, 0) == list);
    ClickModelParams none{0.0, 0.0, 100};
    CHECK(click_model(c, user.history, list, none, 1, 0, 0).empty());

    ClickModelParams capped{1.0, 0.0, 5};
    const auto first5 = click_model(c, user.history, list, capped, 1, 0, 0);
    CHECK(first5 == std::vector<std::string>(list.begin(), list.begin() + 5));

    ClickModelParams mid{0.3, 0.4, 20};
    const auto a = click_model(c, user.history, list, mid, 9, 3, 2);
    CHECK(a == click_model(c, user.history, list, mid, 9, 3, 2));
    for (const auto& id : a) CHECK(std::find(list.begin(), list.end(), id) != list.end());

    CHECK_THROWS_AS((ClickModelParams{1.5, 0.0, 5}.validate()), ConfigError);
    CHECK_THROWS_AS((ClickModelParams{0.1, -0.1, 5}.validate()), ConfigError);
}

TEST_CASE("click probability follows category affinity") {
    // History entirely in one category: p = base + w for that category, base elsewhere.
    const Corpus c({testing::news("h", "a"), testing::news("x", "a"), testing::news("y", "b")}, {{"u", {"h"}}}, {});
    const std::vector<std::string> hist{"h"};
    ClickModelParams p{0.1, 0.5, 2};
    int hits_a = 0, hits_b = 0;
    const int runs = 4000;
    for (int r = 0; r < runs; ++r) {
        const auto clicks = click_model(c, hist, std::vector<std::string>{"x", "y"}, p, 3, 0, static_cast<std::size_t>(r));
        hits_a += std::count(clicks.begin(), clicks.end(), "x");
        hits_b += std::count(clicks.begin(), clicks.end(), "y");
    }
    CHECK(std::abs(hits_a / double(runs) - 0.6) < 0.03);
    CHECK(std::abs(hits_b / double(runs) - 0.1) < 0.02);
}

TEST_CASE("one round composition") {
    const auto c = small_corpus();
    auto cfg = small_config();
    cfg.rounds = 1;
    auto state = SimState::start(c, prepare_model(c, cfg), cfg);
    const auto before = state.histories;
    const auto snap = run_round(state, cfg, 0);
    REQUIRE(snap.users.size() == c.users().size());
    CHECK(snap.reports.size() == 4);
    std::set<std::pair<CategoryLevel, std::size_t>> keys;
    for (const auto& r : snap.reports) keys.insert({r.level, r.k});
    CHECK(keys.size() == 4);

    for (std::size_t u = 0; u < snap.users.size(); ++u) {
        const auto& ur = snap.users[u];
        CHECK(ur.history_before == before[u]);
        CHECK(ur.list.size() == cfg.list_depth());
        const std::set<std::string> seen(before[u].begin(), before[u].end());
        CHECK(std::set<std::string>(ur.list.begin(), ur.list.end()).size() == ur.list.size());
        for (const auto& id : ur.list) CHECK(!seen.count(id));
        for (const auto& id : ur.clicks)
            CHECK(std::find(ur.list.begin(), ur.list.begin() + static_cast<long>(cfg.k), id) !=
                  ur.list.begin() + static_cast<long>(cfg.k));
        CHECK(ur.clicks.size() <= cfg.click_model.max_clicks_per_round);
        auto expected = before[u];
        append_capped(expected, ur.clicks);
        CHECK(state.histories[u] == expected);
    }
    CHECK(recompute_reports(c, snap, cfg) == snap.reports);
}

TEST_CASE("history growth respects the cap") {
    std::vector<NewsItem> items;
    std::vector<std::string> hist;
    for (int i = 0; i < 80; ++i) {
        items.push_back(testing::news("n" + std::to_string(i), i % 2 ? "a" : "b"));
        if (i < 48) hist.push_back("n" + std::to_string(i));
    }
    const Corpus c(items, {{"u", hist}}, {});
    SimConfig cfg;
    cfg.rounds = 2;
    cfg.k = 5;
    cfg.recommender.kind = ModelKind::ContentCosine;
    cfg.click_model = {1.0, 0.0, 5};
    auto state = SimState::start(c, prepare_model(c, cfg), cfg);
    const auto s0 = run_round(state, cfg, 0);
    CHECK(s0.users[0].clicks.size() == 5);
    CHECK(state.histories[0].size() == kMaxHistory);
    CHECK(state.histories[0].front() == "n3");
    CHECK(state.histories[0].back() == s0.users[0].clicks.back());
}

TEST_CASE("a user who has seen every item is skipped") {
    const Corpus c({testing::news("n1", "a"), testing::news("n2", "b"), testing::news("n3", "a")},
                   {{"full", {"n1", "n2", "n3"}}, {"u", {"n1"}}}, {});
    SimConfig cfg;
    cfg.rounds = 1;
    cfg.k = 2;
    cfg.recommender.kind = ModelKind::ContentCosine;
    auto state = SimState::start(c, prepare_model(c, cfg), cfg);
    const auto snap = run_round(state, cfg, 0);
    CHECK(!snap.users[0].skipped.empty());
    CHECK(snap.users[0].list.empty());
    CHECK(snap.users[1].skipped.empty());
    CHECK(snap.users[1].list.size() == 2);
}

TEST_CASE("simulation is deterministic and thread independent") {
    const auto c = small_corpus();
    auto cfg = small_config();
    const auto a = run_csv(c, cfg);
    CHECK(a == run_csv(c, cfg));
    cfg.threads = 8;
    CHECK(a == run_csv(c, cfg));
    cfg.retrain_every = 1;
    const auto r1 = run_csv(c, cfg);
    cfg.threads = 1;
    CHECK(r1 == run_csv(c, cfg));
}

TEST_CASE("identity strategies match the baseline") {
    const auto c = small_corpus();
    auto cfg = small_config();
    const auto base = run_csv(c, cfg);
    cfg.strategy.kind = StrategyKind::CCR;
    cfg.strategy.gamma = 0.0;
    CHECK(run_csv(c, cfg) == base);
    cfg.strategy.kind = StrategyKind::CPF;
    cfg.strategy.alpha = 0.0;
    CHECK(run_csv(c, cfg) == base);
    cfg.strategy.kind = StrategyKind::CCR;
    cfg.strategy.gamma = 2.0;
    CHECK(run_csv(c, cfg) != base);
}

TEST_CASE("simulate writes artifacts that agree with each other") {
    const auto c = small_corpus();
    auto cfg = small_config();
    const std::filesystem::path dir = testing::temp_dir("simloop_artifacts");
    const auto series = simulate(c, cfg, prepare_model(c, cfg), dir.string());
    CHECK(slurp(dir / "series.csv") == series_csv(series));
    CHECK(std::filesystem::exists(dir / "trends.json"));
    for (const char* f : {"rounds/000.json", "rounds/002.json", "graph/002.edges", "graph/002.parts"})
        CHECK(std::filesystem::exists(dir / f));
    CHECK(series.rows.size() == cfg.rounds * 4);
    for (const auto& row : series.rows) CHECK(row.report.round < cfg.rounds);
}

TEST_CASE("single round has no trend") {
    const auto c = small_corpus();
    auto cfg = small_config();
    cfg.rounds = 1;
    const auto s = simulate(c, cfg, prepare_model(c, cfg));
    for (const auto& [key, values] : s.spearman)
        for (const auto& [name, v] : values) CHECK(!v.has_value());
    const auto j = trends_json(s);
    CHECK(j.find("null") != std::string::npos);
}

TEST_CASE("series csv round trip") {
    const auto c = small_corpus();
    const auto cfg = small_config();
    const auto s = simulate(c, cfg, prepare_model(c, cfg));
    const auto text = series_csv(s);
    const auto parsed = parse_series_csv(text);
    CHECK(series_csv(parsed) == text);
    // Values are stored to 10 decimals, so trends agree up to rounding.
    REQUIRE(parsed.pearson.size() == s.pearson.size());
    for (const auto& [k, values] : s.pearson)
        for (const auto& [name, v] : values) {
            const auto& w = parsed.pearson.at(k).at(name);
            REQUIRE(v.has_value() == w.has_value());
            if (v) CHECK(std::abs(*v - *w) < 1e-6);
        }
    CHECK(parsed.spearman.size() == s.spearman.size());
    CHECK_THROWS_AS(parse_series_csv("bogus\n"), ParseError);
    auto truncated = text.substr(0, text.find('\n') + 1) + "0,category,5,1\n";
    CHECK_THROWS_AS(parse_series_csv(truncated), ParseError);
}

TEST_CASE("correlation oracles") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> up{2, 4, 5, 9, 10};
    const std::vector<double> down{9, 7, 4, 3, 1};
    CHECK(*spearman(x, up) == doctest::Approx(1.0));
    CHECK(*spearman(x, down) == doctest::Approx(-1.0));
    CHECK(!spearman(x, std::vector<double>{3, 3, 3, 3, 3}).has_value());
    CHECK(!pearson(std::vector<double>{1}, std::vector<double>{2}).has_value());
    CHECK(*pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) == doctest::Approx(0.5));
    CHECK(*pearson(x, up) == doctest::Approx(naive_pearson(x, up)).epsilon(1e-12));

    // Ties take the average rank.
    const std::vector<double> tied{1, 2, 2, 3, 7};
    CHECK(*spearman(x, tied) == doctest::Approx(naive_pearson(x, {1, 2.5, 2.5, 4, 5})).epsilon(1e-12));
}

TEST_CASE("improvement formula") {
    const auto o = improvement_percent("O", 0.3428, 0.4229);
    REQUIRE(o);
    CHECK(std::abs(*o - 23.35) <= 0.05);
    const auto r = improvement_percent("R", 0.9845, 0.9843);
    REQUIRE(r);
    CHECK(std::abs(*r - 0.03) <= 0.05);
    CHECK(*r > 0.0);
    CHECK(*improvement_percent("D", 0.5, 0.6) == doctest::Approx(-20.0));
    CHECK(*improvement_percent("H", 2.0, 2.5) == doctest::Approx(25.0));
    CHECK(*improvement_percent("N", 1.0, 1.0) == 0.0);
    CHECK(!improvement_percent("O", 0.0, 0.4).has_value());
    // Negative openness baseline: a less negative value is still an improvement.
    CHECK(*improvement_percent("O", -0.2, -0.1) == doctest::Approx(50.0));
    CHECK(*improvement_percent("O", -0.2, -0.3) == doctest::Approx(-50.0));
}

TEST_CASE("compare runs") {
    const auto c = small_corpus();
    auto cfg = small_config();
    const auto base = simulate(c, cfg, prepare_model(c, cfg));
    const std::vector<LabeledSeries> self{{"a", "cfg", base}, {"b", "cfg", base}};
    const auto rows = compare_runs(self, "a");
    CHECK(rows.size() == 8);
    for (const auto& row : rows)
        for (const auto& [name, v] : row.improvement)
            if (v) CHECK(*v == 0.0);
    const auto csv = comparison_csv(rows);
    CHECK(csv.rfind("run,level,K,N,H,R,D,O,N_improv_pct", 0) == 0);

    const std::vector<LabeledSeries> mismatch{{"a", "cfg", base}, {"b", "other", base}};
    CHECK_THROWS_AS(compare_runs(mismatch, "a"), ConfigError);
    cfg.rounds = 2;
    const auto shorter = simulate(c, cfg, prepare_model(c, cfg));
    const std::vector<LabeledSeries> rounds{{"a", "cfg", base}, {"b", "cfg", shorter}};
    CHECK_THROWS_AS(compare_runs(rounds, "a"), ConfigError);
    CHECK_THROWS_AS(compare_runs(self, "missing"), ConfigError);
}

TEST_CASE("sim config validation") {
    SimConfig cfg;
    cfg.k = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SimConfig{};
    cfg.rounds = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SimConfig{};
    cfg.k = 10;
    cfg.report_ks = {20, 5, 20};
    CHECK(cfg.depths() == std::vector<std::size_t>{5, 20});
    CHECK(cfg.list_depth() == 20);
    CHECK(levels_of(LevelSelection::Both).size() == 2);
    CHECK(parse_level_selection("subcategory") == LevelSelection::Subcategory);
}
