#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cocoon/cli.hpp"
#include "cocoon/corpus.hpp"
#include "cocoon/errors.hpp"
#include "cocoon/graph.hpp"
#include "cocoon/metrics.hpp"
#include "cocoon/mitigation.hpp"
#include "cocoon/recsys_detail.hpp"
#include "cocoon/simloop.hpp"
#include "support.hpp"

using namespace cocoon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 1 -------------------------------------------------------------------------

Outcome metric_exactness() {
    auto list = [](std::vector<std::string> cats) { return RecList{"u", {}, std::move(cats)}; };
    auto stats = [](std::vector<CommunityTally> c) {
        CommunityStats s;
        s.communities = std::move(c);
        return s;
    };
    const double h = category_entropy(std::vector<RecList>{list({"a", "b", "c", "d"})});
    const double d = network_density(stats({{2, 3, 6, 0}}));
    const double o = community_openness(stats({{2, 3, 6, 0}}));
    const double r = click_repeat_rate(std::vector<ClickRecord>{{"a", {"x", "z"}, {"x"}}, {"b", {"y"}, {"y"}}, {"c", {}, {"y"}}});
    const double err = std::max({std::abs(h - 2.0), std::abs(d - 1.0), std::abs(o + 1.0), std::abs(r - 0.75)});
    return {err < 1e-9, "H=" + fmt(h, 12) + " D=" + fmt(d, 12) + " O=" + fmt(o, 12) + " R=" + fmt(r, 12)};
}

// 2 -------------------------------------------------------------------------

double best_modularity(const UndirectedGraph& g) {
    const std::size_t n = g.node_count;
    std::vector<double> degree(n, 0.0);
    double m = 0.0;
    for (const auto& e : g.edges) {
        degree[e.a] += e.weight;
        degree[e.b] += e.weight;
        m += e.weight;
    }
    std::vector<double> in(n), tot(n);
    double best = -1.0;
    testing::for_each_partition(n, [&](const std::vector<std::size_t>& labels) {
        std::fill(in.begin(), in.end(), 0.0);
        std::fill(tot.begin(), tot.end(), 0.0);
        for (const auto& e : g.edges)
            if (labels[e.a] == labels[e.b]) in[labels[e.a]] += e.weight;
        for (std::size_t i = 0; i < n; ++i) tot[labels[i]] += degree[i];
        double q = 0.0;
        for (std::size_t c = 0; c < n; ++c) q += in[c] / m - (tot[c] / (2.0 * m)) * (tot[c] / (2.0 * m));
        best = std::max(best, q);
    });
    return best;
}

// Alternates general graphs and bipartite user/news graphs.
UndirectedGraph random_graph(std::mt19937_64& rng, int trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
    const std::size_t split = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
    std::bernoulli_distribution coin(0.4);
    std::uniform_int_distribution<int> weight(1, 3);
    UndirectedGraph g{n, {}};
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            if (trial % 2 == 1 && ((a < split) == (b < split))) continue;
            if (coin(rng)) g.edges.push_back({a, b, static_cast<double>(weight(rng))});
        }
    if (g.edges.empty()) g.edges.push_back({0, n - 1, 1.0});
    return g;
}

Outcome modularity_oracle() {
    const auto t0 = Clock::now();
    const UndirectedGraph triangles{6, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}, {2, 3, 1}}};
    const double q = modularity(triangles, Partition{{0, 0, 0, 1, 1, 1}});
    const bool fixture = std::abs(q - (6.0 / 7.0 - 0.5)) < 1e-12;

    std::mt19937_64 rng(2024);
    double worst = 1.0;
    int below = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = random_graph(rng, trial);
        const double found = modularity(g, louvain_detailed(g, static_cast<std::uint64_t>(trial)).partition);
        const double best = best_modularity(g);
        if (found < 0.95 * best - 1e-12) ++below;
        if (best > 1e-12) worst = std::min(worst, found / best);
    }
    const double elapsed = seconds_since(t0);
    return {fixture && below == 0 && elapsed < 30.0,
            "two-triangle err=" + fmt(std::abs(q - (6.0 / 7.0 - 0.5)), 15) + " graphs below 0.95x=" +
                std::to_string(below) + "/200 worst ratio=" + fmt(worst) + " time=" + fmt(elapsed, 2) + "s"};
}

// 3 -------------------------------------------------------------------------

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

Outcome gradient_checks() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(77);
    double worst_cdr = 0.0, worst_ltao = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + trial % 5, dim = 3 + trial % 4;
        std::vector<std::vector<double>> e;
        for (std::size_t i = 0; i < n; ++i) e.push_back(random_vec(rng, dim, -1, 1));
        const double lambda = 0.1 + 0.02 * trial;
        const auto g = cdr_penalty_grad(e, lambda);
        for (std::size_t i = 0; i < n; ++i) {
            auto f = [&](const std::vector<double>& x) {
                auto copy = e;
                copy[i] = x;
                return cdr_penalty(copy, lambda);
            };
            for (std::size_t d = 0; d < dim; ++d)
                worst_cdr = std::max(worst_cdr, testing::relative_error(g.grads[i][d], testing::central_diff(f, e[i], d)));
        }
    }
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + trial % 6;
        const auto x = random_vec(rng, n, -2, 2), y = random_vec(rng, n, -2, 2);
        const double mu = 0.05 + 0.03 * trial;
        const auto g = ltao_penalty_logits(x, y, mu);
        auto fx = [&](const std::vector<double>& v) { return ltao_penalty(softmax(v), softmax(y), mu); };
        auto fy = [&](const std::vector<double>& v) { return ltao_penalty(softmax(x), softmax(v), mu); };
        for (std::size_t j = 0; j < n; ++j) {
            worst_ltao = std::max(worst_ltao, testing::relative_error(g.grad_long[j], testing::central_diff(fx, x, j)));
            worst_ltao = std::max(worst_ltao, testing::relative_error(g.grad_short[j], testing::central_diff(fy, y, j)));
        }
    }
    const double elapsed = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf, "max rel err CDR=%.2e LTAO=%.2e time=%.2fs", worst_cdr, worst_ltao, elapsed);
    return {worst_cdr < 1e-4 && worst_ltao < 1e-4 && elapsed < 10.0, buf};
}

// 4, 5, 7 -------------------------------------------------------------------

SynthConfig trend_corpus(std::uint64_t seed) {
    SynthConfig s;
    s.n_users = 500;
    s.n_news = 1000;
    s.n_categories = 10;
    s.subcats_per_category = 4;
    s.preference_concentration = 0.3;
    s.seed = seed;
    return s;
}

SimConfig trend_config(std::uint64_t seed, std::size_t threads) {
    SimConfig cfg;
    cfg.rounds = 20;
    cfg.k = 20;
    cfg.level = LevelSelection::Category;
    cfg.recommender.kind = ModelKind::MatrixFactorization;
    cfg.click_model.base_rate = 0.05;
    cfg.click_model.affinity_weight = 0.6;
    cfg.train.epochs = 30;
    cfg.train.learning_rate = 0.05;
    cfg.train.seed = seed;
    cfg.retrain_every = 1;
    cfg.seed = seed;
    cfg.strategy.seed = seed;
    cfg.threads = threads;
    return cfg;
}

MetricSeries run_trend(const Corpus& corpus, const SimConfig& cfg) {
    return simulate(corpus, cfg, prepare_model(corpus, cfg));
}

Outcome trend_reproduction() {
    const auto t0 = Clock::now();
    const Corpus corpus = synth_corpus(trend_corpus(42));
    const auto series = run_trend(corpus, trend_config(42, 1));
    const double elapsed = seconds_since(t0);
    const auto& rho = series.spearman.at({CategoryLevel::Category, 20});
    auto get = [&](const char* m) { return rho.at(m); };
    const auto h = get("H"), r = get("R"), o = get("O"), d = get("D");
    const bool ok = h && r && o && d && *h <= -0.6 && *r >= 0.6 && *o <= -0.6 && *d >= 0.3 && elapsed < 120.0;
    auto show = [](const std::optional<double>& v) { return v ? fmt(*v, 3) : std::string("null"); };
    return {ok, "rho H=" + show(h) + " R=" + show(r) + " O=" + show(o) + " D=" + show(d) + " time=" + fmt(elapsed, 1) +
                    "s (1 thread)"};
}

Outcome mitigation_signs() {
    const std::size_t threads = worker_threads();
    const std::vector<std::uint64_t> seeds{42, 43, 44};
    int ccr_h = 0, ccr_o = 0, cpf_o = 0, egs_o = 0;
    std::string detail;
    for (std::uint64_t seed : seeds) {
        const Corpus corpus = synth_corpus(trend_corpus(seed));
        std::vector<LabeledSeries> runs;
        const std::vector<std::pair<std::string, StrategyKind>> arms{
            {"none", StrategyKind::None}, {"ccr", StrategyKind::CCR}, {"cpf", StrategyKind::CPF}, {"egs", StrategyKind::EGS}};
        for (const auto& [label, kind] : arms) {
            SimConfig cfg = trend_config(seed, threads);
            cfg.strategy.kind = kind;
            cfg.strategy.gamma = 0.5;
            cfg.strategy.alpha = 0.3;
            cfg.strategy.epsilon = 0.1;
            runs.push_back({label, "trend", run_trend(corpus, cfg)});
        }
        std::map<std::string, MetricValues> imp;
        for (const auto& row : compare_runs(runs, "none")) imp[row.label] = row.improvement;
        auto positive = [&](const char* arm, const char* m) {
            const auto v = imp[arm][m];
            return v && *v > 0.0;
        };
        ccr_h += positive("ccr", "H");
        ccr_o += positive("ccr", "O");
        cpf_o += positive("cpf", "O");
        egs_o += positive("egs", "O");
        auto pct = [&](const char* arm, const char* m) {
            const auto v = imp[arm][m];
            return v ? fmt(*v, 2) + "%" : std::string("null");
        };
        detail += " seed" + std::to_string(seed) + "[CCR H " + pct("ccr", "H") + " O " + pct("ccr", "O") + ", CPF O " +
                  pct("cpf", "O") + ", EGS O " + pct("egs", "O") + "]";
    }
    const int need = static_cast<int>(seeds.size() / 2 + 1);
    const bool ok = ccr_h >= need && ccr_o >= need && cpf_o >= need && egs_o >= need;
    return {ok, "positive seeds CCR(H)=" + std::to_string(ccr_h) + "/3 CCR(O)=" + std::to_string(ccr_o) +
                    "/3 CPF(O)=" + std::to_string(cpf_o) + "/3 EGS(O)=" + std::to_string(egs_o) + "/3;" + detail};
}

Outcome identity_equivalence() {
    const Corpus corpus = synth_corpus(trend_corpus(42));
    const std::size_t threads = worker_threads();
    const fs::path root = testing::temp_dir("acceptance_identity");
    std::vector<std::string> csv;
    for (StrategyKind kind : {StrategyKind::None, StrategyKind::CCR, StrategyKind::CPF}) {
        SimConfig cfg = trend_config(42, threads);
        cfg.strategy.kind = kind;
        cfg.strategy.gamma = 0.0;
        cfg.strategy.alpha = 0.0;
        const fs::path dir = root / to_string(kind);
        simulate(corpus, cfg, prepare_model(corpus, cfg), dir.string());
        csv.push_back(slurp(dir / "series.csv"));
    }
    const bool ok = !csv[0].empty() && csv[0] == csv[1] && csv[0] == csv[2];
    return {ok, std::string("series.csv none==ccr(0): ") + (csv[0] == csv[1] ? "yes" : "no") +
                    " none==cpf(0): " + (csv[0] == csv[2] ? "yes" : "no") + " (" + std::to_string(csv[0].size()) +
                    " bytes)"};
}

// 6 -------------------------------------------------------------------------

Outcome improvement_fixture() {
    const auto o = improvement_percent("O", 0.3428, 0.4229);
    const auto r = improvement_percent("R", 0.9845, 0.9843);
    const bool ok = o && r && std::abs(*o - 23.35) <= 0.05 && std::abs(*r - 0.03) <= 0.05;
    return {ok, "O " + (o ? fmt(*o, 3) : std::string("null")) + "% (published 23.35%), R " +
                    (r ? fmt(*r, 3) : std::string("null")) + "% (published 0.03%)"};
}

// 8 -------------------------------------------------------------------------

std::vector<fs::path> artifact_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir));
    std::sort(files.begin(), files.end());
    return files;
}

Outcome determinism() {
    const char* bin = std::getenv("COCOONBENCH_BIN");
    if (!bin) return {false, "COCOONBENCH_BIN is not set"};
    const fs::path root = testing::temp_dir("acceptance_determinism");
    {
        std::ofstream(root / "config.json") << R"({
  "seed": 42,
  "out": "unused",
  "corpus": {"source": "synthetic", "users": 500, "news": 1000, "categories": 10, "subcategories": 4,
             "concentration": 0.3},
  "model": {"kind": "mf"},
  "train": {"epochs": 30, "learning_rate": 0.05},
  "strategy": {"kind": "egs", "epsilon": 0.1},
  "simulation": {"rounds": 6, "k": 20, "report_ks": [10, 20], "level": "both", "retrain_every": 2}
})";
    }
    std::vector<std::pair<std::string, fs::path>> runs{{"1", root / "t1a"}, {"1", root / "t1b"}, {"8", root / "t8"}};
    for (const auto& [threads, dir] : runs) {
        const std::string cmd = "COCOONBENCH_THREADS=" + threads + " " + bin + " --config " + (root / "config.json").string() +
                                " --out " + dir.string() + " simulate";
        if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
    }
    const auto files = artifact_files(runs[0].second);
    std::size_t compared = 0, differing = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        if (artifact_files(runs[i].second) != files) return {false, "artifact file sets differ"};
        for (const auto& f : files) {
            if (f == "config.json") continue;  // records its own out path
            ++compared;
            differing += slurp(runs[0].second / f) != slurp(runs[i].second / f);
        }
    }
    return {differing == 0 && compared > 0,
            std::to_string(compared) + " artifact comparisons (repeat and THREADS=1 vs 8), " + std::to_string(differing) +
                " differing"};
}

// 9 -------------------------------------------------------------------------

Outcome parser_fixtures() {
    std::vector<std::string> news, behaviors;
    for (int i = 0; i < 50; ++i)
        news.push_back("N" + std::to_string(i) + "\tcat" + std::to_string(i % 7) + "\tsub" + std::to_string(i % 13) +
                       "\tHeadline " + std::to_string(i) + ": what's new?\tSummary, item " + std::to_string(i) +
                       ".\thttps://example.org/" + std::to_string(i) + "\t[]\t[]");
    std::map<int, std::string> hist;
    for (int i = 0; i < 50; ++i) {
        const int u = i % 11;
        hist[u] += (hist[u].empty() ? "N" : " N") + std::to_string((i * 7) % 50);
        behaviors.push_back("I" + std::to_string(i) + "\tU" + std::to_string(u) + "\t11/1" + std::to_string(i % 10) +
                            "/2019 8:00:00 AM\t" + hist[u] + "\tN" + std::to_string((i * 3) % 50) + "-1 N" +
                            std::to_string((i * 3 + 1) % 50) + "-0");
    }
    const fs::path dir = testing::temp_dir("acceptance_parser");
    auto write = [](const fs::path& p, const std::vector<std::string>& lines) {
        std::ofstream out(p);
        for (const auto& l : lines) out << l << '\n';
    };
    write(dir / "news.tsv", news);
    write(dir / "behaviors.tsv", behaviors);
    const Corpus first = load_mind((dir / "news.tsv").string(), (dir / "behaviors.tsv").string());
    save_mind(first, (dir / "out").string());
    const Corpus second = load_mind((dir / "out" / "news.tsv").string(), (dir / "out" / "behaviors.tsv").string());
    const bool round_trip = first == second && first.news().size() == 50 && first.impressions().size() == 50;

    struct Bad {
        bool news;
        std::vector<std::string> lines;
        std::size_t line;
    };
    const std::vector<Bad> bad{
        {true, {"N1\tc\ts\tT\tA", "N2\tc\ts"}, 2},
        {true, {"N1\tc\ts\tT\tA", "", "N2"}, 3},
        {false, {"I1\tU1\tt\t\tN1-1", "I2\tU1\tt\t\tN1-2"}, 2},
        {false, {"I1\tU1\tt\t\tN1-1", "", "I2\tU1\tt\tN1"}, 3},
        {false, {"I1\tU1\tt\t\tN1"}, 1},
    };
    std::size_t matched = 0;
    for (const auto& b : bad) {
        try {
            if (b.news)
                parse_mind_news(b.lines);
            else
                parse_mind_behaviors(b.lines);
        } catch (const ParseError& e) {
            matched += e.line() == b.line;
        }
    }
    return {round_trip && matched == bad.size(),
            std::string("100-line round trip ") + (round_trip ? "equal" : "DIFFERENT") + ", malformed fixtures with correct line " +
                std::to_string(matched) + "/" + std::to_string(bad.size())};
}

// 10 ------------------------------------------------------------------------

Outcome statistical_fixtures() {
    std::vector<ScoredCandidate> five;
    for (int i = 0; i < 5; ++i) five.push_back({"i" + std::to_string(i), static_cast<double>(i), 0});
    std::map<std::string, int> counts;
    const int draws = 10000;
    for (int r = 0; r < draws; ++r) ++counts[egs_select(five, 1.0, 1, static_cast<std::uint64_t>(r))[0]];
    double chi2 = 0.0;
    for (const auto& [id, c] : counts) chi2 += (c - draws / 5.0) * (c - draws / 5.0) / (draws / 5.0);
    chi2 += (5.0 - static_cast<double>(counts.size())) * (draws / 5.0);
    const double p = testing::chi_square_sf_even(chi2, 4);

    int worst_spread = 0;
    for (std::size_t k = 2; k <= 20; ++k) {
        std::vector<ScoredCandidate> equal;
        for (std::size_t i = 0; i < 40; ++i) equal.push_back({"c" + std::to_string(i), 1.0, i % 4});
        std::map<std::size_t, int> per;
        for (const auto& id : ccr_rerank(equal, 0.5, k)) ++per[std::stoul(id.substr(1)) % 4];
        int lo = draws, hi = 0;
        for (std::size_t c = 0; c < 4; ++c) {
            lo = std::min(lo, per[c]);
            hi = std::max(hi, per[c]);
        }
        worst_spread = std::max(worst_spread, hi - lo);
    }

    const std::vector<ScoredCandidate> one{{"x", 0.83, 2}};
    const std::vector<std::size_t> list{2, 2, 2, 2};
    const double suppressed = cpf_adjust(one, 1.0, list, list.size())[0];

    return {p > 0.01 && worst_spread <= 1 && suppressed == 0.0,
            "EGS chi2=" + fmt(chi2, 3) + " p=" + fmt(p, 4) + ", CCR max count diff=" + std::to_string(worst_spread) +
                ", CPF suppressed score=" + fmt(suppressed, 1)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"metric exactness", metric_exactness},
        {"modularity oracle", modularity_oracle},
        {"gradient checks", gradient_checks},
        {"directional trends", trend_reproduction},
        {"mitigation signs", mitigation_signs},
        {"improvement formula", improvement_fixture},
        {"identity strategies", identity_equivalence},
        {"determinism", determinism},
        {"parser fixtures", parser_fixtures},
        {"statistical fixtures", statistical_fixtures},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << "): " << o.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
