#include "cocoon/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "cocoon/chart.hpp"
#include "cocoon/config.hpp"
#include "cocoon/errors.hpp"
#include "cocoon/io.hpp"
#include "json.hpp"

namespace cocoon {

std::size_t worker_threads() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("COCOONBENCH_THREADS")) {
        char* end = nullptr;
        const long long cap = std::strtoll(env, &end, 10);
        if (end == env || *end != '\0' || cap < 1)
            throw ConfigError("COCOONBENCH_THREADS must be a positive integer, got '" + std::string(env) + "'");
        n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
    }
    return n;
}

namespace {

struct GlobalFlags {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::string level;
    std::vector<std::size_t> ks;
};

struct SimFlags {
    std::size_t rounds = 0;
    std::string strategy, model, checkpoint;
    double epsilon = 0, lambda = 0, mu = 0, gamma = 0, alpha = 0, learning_rate = 0;
    std::size_t retrain_every = 0, epochs = 0, candidate_sample = 0, user_sample = 0;
};

struct SynthFlags {
    std::size_t users = 0, news = 0, categories = 0, subcategories = 0, history_len = 0;
    double concentration = 0;
};

bool given(const CLI::App& app, const std::string& name) {
    // Options may live on the subcommand or, for global flags, on its parent.
    for (const CLI::App* a = &app; a != nullptr; a = a->get_parent()) {
        const CLI::Option* opt = nullptr;
        try {
            opt = a->get_option(name);
        } catch (const CLI::OptionNotFound&) {
            continue;
        }
        if (opt->count() > 0) return true;
    }
    return false;
}

void print_summary(std::ostream& out, const CorpusSummary& s) {
    out << "News\tUsers\tCategory\tSubcategory\tImpression\n";
    out << s.news << '\t' << s.users << '\t' << s.categories << '\t' << s.subcategories << '\t' << s.impressions << '\n';
}

std::string basename_of(std::string dir) {
    while (dir.size() > 1 && dir.back() == '/') dir.pop_back();
    return std::filesystem::path(dir).filename().string();
}

RunConfig base_config(const CLI::App& sub, const GlobalFlags& g) {
    RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
    if (given(sub, "--seed")) cfg.seed = g.seed;
    if (given(sub, "--out")) cfg.out = g.out;
    if (given(sub, "--level")) cfg.sim.level = parse_level_selection(g.level);
    if (given(sub, "--k")) {
        cfg.sim.k = g.ks.front();
        cfg.sim.report_ks = g.ks;
        if (g.ks.size() == 1) cfg.sim.report_ks.clear();
    }
    return cfg;
}

void apply_synth_flags(const CLI::App& sub, const SynthFlags& f, RunConfig& cfg) {
    auto& s = cfg.corpus.synth;
    bool any = false;
    auto set = [&](const char* name, auto& field, auto value) {
        if (given(sub, name)) {
            field = value;
            any = true;
        }
    };
    set("--users", s.n_users, f.users);
    set("--news", s.n_news, f.news);
    set("--categories", s.n_categories, f.categories);
    set("--subcategories", s.subcats_per_category, f.subcategories);
    set("--concentration", s.preference_concentration, f.concentration);
    set("--history-len", s.history_len, f.history_len);
    if (any) cfg.corpus.kind = CorpusSource::Kind::Synthetic;
}

void apply_sim_flags(const CLI::App& sub, const SimFlags& f, RunConfig& cfg) {
    SimConfig& s = cfg.sim;
    if (given(sub, "--rounds")) s.rounds = f.rounds;
    if (given(sub, "--strategy")) s.strategy.kind = parse_strategy_kind(f.strategy);
    if (given(sub, "--epsilon")) s.strategy.epsilon = f.epsilon;
    if (given(sub, "--lambda")) s.strategy.lambda = f.lambda;
    if (given(sub, "--mu")) s.strategy.mu = f.mu;
    if (given(sub, "--gamma")) s.strategy.gamma = f.gamma;
    if (given(sub, "--alpha")) s.strategy.alpha = f.alpha;
    if (given(sub, "--model")) s.recommender.kind = parse_model_kind(f.model);
    if (given(sub, "--checkpoint")) s.checkpoint = f.checkpoint;
    if (given(sub, "--retrain-every")) s.retrain_every = f.retrain_every;
    if (given(sub, "--epochs")) s.train.epochs = f.epochs;
    if (given(sub, "--learning-rate")) s.train.learning_rate = f.learning_rate;
    if (given(sub, "--candidate-sample")) s.candidate_sample = f.candidate_sample;
    if (given(sub, "--user-sample")) s.user_sample = f.user_sample;
}

std::string require_out(const RunConfig& cfg, const char* command) {
    if (cfg.out.empty()) throw ConfigError(std::string(command) + " needs an output directory (--out or config \"out\")");
    return cfg.out;
}

int cmd_ingest(const std::string& news, const std::string& behaviors, const std::string& out_dir, std::ostream& out) {
    const Corpus corpus = load_mind(news, behaviors);
    save_mind(corpus, out_dir);
    print_summary(out, summarize(corpus));
    return 0;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
    const std::string dir = require_out(cfg, "synth");
    const Corpus corpus = synth_corpus(cfg.resolved_synth());
    save_mind(corpus, dir);
    print_summary(out, summarize(corpus));
    return 0;
}

std::string loss_csv(const std::vector<EpochLoss>& trace) {
    std::string s = "epoch,bpr,l2,cdr,ltao,total\n";
    for (std::size_t e = 0; e < trace.size(); ++e) {
        const auto& l = trace[e];
        s += std::to_string(e) + ',' + format_fixed(l.bpr, 10) + ',' + format_fixed(l.l2, 10) + ',' +
             format_fixed(l.cdr, 10) + ',' + format_fixed(l.ltao, 10) + ',' + format_fixed(l.total(), 10) + '\n';
    }
    return s;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const std::string dir = require_out(cfg, "train");
    const Corpus corpus = load_corpus(cfg);
    SimConfig sim = cfg.resolved_sim();
    sim.checkpoint.clear();
    if (sim.recommender.kind == ModelKind::ContentCosine) throw ConfigError("content_cosine has no trainable parameters");
    std::vector<EpochLoss> trace;
    const RecommenderModel model = prepare_model(corpus, sim, &trace);
    save_checkpoint(model, dir + "/model.json");
    write_text_atomic(dir + "/loss.csv", loss_csv(trace));
    out << loss_csv(trace);
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    const std::string dir = require_out(cfg, "simulate");
    SimConfig sim = cfg.resolved_sim();
    sim.threads = worker_threads();
    sim.validate();
    const Corpus corpus = load_corpus(cfg);
    write_text_atomic(dir + "/config.json", run_config_json(cfg));
    RecommenderModel model = prepare_model(corpus, sim);
    simulate(corpus, sim, std::move(model), dir);
    return 0;
}

LabeledSeries load_run(const std::string& dir) {
    LabeledSeries run;
    run.label = basename_of(dir);
    run.comparable_config = comparable_config_text(read_text(dir + "/config.json"));
    try {
        run.series = parse_series_csv(read_text(dir + "/series.csv"));
    } catch (const ParseError& e) {
        throw Error(dir + "/series.csv: " + e.what());
    }
    return run;
}

int cmd_compare(const std::vector<std::string>& dirs, std::string baseline, const std::string& out_dir, bool svg,
                std::ostream& out) {
    if (dirs.size() < 2) throw ConfigError("compare needs at least two run directories");
    std::vector<LabeledSeries> runs;
    std::map<std::string, std::size_t> seen;
    for (const auto& d : dirs) {
        runs.push_back(load_run(d));
        if (seen[runs.back().label]++) throw ConfigError("duplicate run label '" + runs.back().label + "'");
    }
    if (baseline.empty()) baseline = runs.front().label;
    const auto rows = compare_runs(runs, baseline);
    const std::string csv = comparison_csv(rows);
    out << csv;
    if (!out_dir.empty()) {
        write_text_atomic(out_dir + "/comparison.csv", csv);
        if (svg) {
            std::map<std::pair<CategoryLevel, std::size_t>, bool> keys;
            for (const auto& row : runs.front().series.rows) keys[{row.report.level, row.report.k}] = true;
            for (const auto& [key, unused] : keys)
                for (const char* m : kMetricNames) {
                    std::vector<ChartSeries> lines;
                    for (const auto& run : runs) {
                        ChartSeries line{run.label, {}};
                        for (const auto& row : run.series.rows)
                            if (row.report.level == key.first && row.report.k == key.second)
                                if (auto v = metric_value(row.report, m))
                                    line.points.emplace_back(static_cast<double>(row.report.round), *v);
                        lines.push_back(std::move(line));
                    }
                    const std::string name = std::string(m) + "_" + to_string(key.first) + "_K" + std::to_string(key.second);
                    write_text_atomic(out_dir + "/" + name + ".svg",
                                      svg_line_chart(std::string(m) + " (" + to_string(key.first) + ", K=" +
                                                         std::to_string(key.second) + ")",
                                                     "round", m, lines));
                }
        }
    }
    return 0;
}

std::string opt_text(const std::optional<double>& v) { return v ? format_fixed(*v, 4) : std::string("null"); }

int cmd_report(const std::string& dir, const std::string& format, std::ostream& out) {
    const MetricSeries series = parse_series_csv(read_text(dir + "/series.csv"));
    std::map<std::pair<CategoryLevel, std::size_t>, const SeriesRow*> finals;
    for (const auto& row : series.rows) {
        auto& slot = finals[{row.report.level, row.report.k}];
        if (!slot || row.report.round >= slot->report.round) slot = &row;
    }
    if (format == "csv") {
        out << report_csv_header() << ",C\n";
        for (const auto& [key, row] : finals) out << report_csv_row(row->report) << ',' << row->communities << '\n';
    } else if (format == "json") {
        out << trends_json(series);
    } else {
        out << "level\tK\tround\tN H R D O\tC\n";
        for (const auto& [key, row] : finals)
            out << to_string(key.first) << '\t' << key.second << '\t' << row->report.round << '\t'
                << format_table_row(row->report) << '\t' << row->communities << '\n';
        out << "spearman vs round\n";
        for (const auto& [key, values] : series.spearman) {
            out << to_string(key.first) << '\t' << key.second;
            for (const auto& [name, v] : values) out << '\t' << name << '=' << opt_text(v);
            out << '\n';
        }
        for (const auto& [k, values] : series.pearson) {
            out << "pearson category/subcategory\tK=" << k;
            for (const auto& [name, v] : values) out << '\t' << name << '=' << opt_text(v);
            out << '\n';
        }
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Information-cocoon simulation and measurement toolkit", "cocoonbench"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    app.add_option("--config", g.config, "Run configuration JSON");
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--level", g.level, "category, subcategory or both");
    app.add_option("--k", g.ks, "List depth; repeat for several report depths, the first is served")
        ->check(CLI::PositiveNumber);

    std::string news_path, behaviors_path;
    auto* ingest = app.add_subcommand("ingest", "Parse MIND-format files and persist the corpus");
    ingest->add_option("--news", news_path, "news.tsv")->required();
    ingest->add_option("--behaviors", behaviors_path, "behaviors.tsv")->required();

    SynthFlags sf;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth->add_option("--users", sf.users);
    synth->add_option("--news", sf.news);
    synth->add_option("--categories", sf.categories);
    synth->add_option("--subcategories", sf.subcategories);
    synth->add_option("--concentration", sf.concentration);
    synth->add_option("--history-len", sf.history_len);

    SimFlags tf;
    auto* train_cmd = app.add_subcommand("train", "Train a recommender and write model.json and loss.csv");
    train_cmd->add_option("--model", tf.model, "mf or dual_attention");
    train_cmd->add_option("--epochs", tf.epochs);
    train_cmd->add_option("--learning-rate", tf.learning_rate);
    train_cmd->add_option("--strategy", tf.strategy, "cdr or ltao route their weight into training");
    train_cmd->add_option("--lambda", tf.lambda);
    train_cmd->add_option("--mu", tf.mu);

    SimFlags simf;
    auto* sim = app.add_subcommand("simulate", "Run the multi-round feedback loop");
    sim->add_option("--rounds", simf.rounds);
    sim->add_option("--strategy", simf.strategy, "none, egs, cdr, ltao, ccr or cpf");
    sim->add_option("--epsilon", simf.epsilon);
    sim->add_option("--lambda", simf.lambda);
    sim->add_option("--mu", simf.mu);
    sim->add_option("--gamma", simf.gamma);
    sim->add_option("--alpha", simf.alpha);
    sim->add_option("--model", simf.model, "content_cosine, mf or dual_attention");
    sim->add_option("--checkpoint", simf.checkpoint, "Model checkpoint to load instead of training");
    sim->add_option("--retrain-every", simf.retrain_every, "Retrain every N rounds, 0 = never");
    sim->add_option("--epochs", simf.epochs);
    sim->add_option("--learning-rate", simf.learning_rate);
    sim->add_option("--candidate-sample", simf.candidate_sample);
    sim->add_option("--user-sample", simf.user_sample);

    std::vector<std::string> run_dirs;
    std::string baseline;
    bool svg = false;
    auto* compare = app.add_subcommand("compare", "Compare run directories against a baseline");
    compare->add_option("runs", run_dirs, "Run directories")->required()->expected(2, -1);
    compare->add_option("--baseline", baseline, "Baseline run label (directory name); default first run");
    compare->add_flag("--svg", svg, "Write one line chart per metric into --out");

    std::string report_dir, format = "table";
    auto* report = app.add_subcommand("report", "Summarize a run directory");
    report->add_option("run", report_dir, "Run directory")->required();
    report->add_option("--format", format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (ingest->parsed()) {
            if (g.out.empty()) throw ConfigError("ingest needs --out");
            return cmd_ingest(news_path, behaviors_path, g.out, out);
        }
        if (synth->parsed()) {
            RunConfig cfg = base_config(*synth, g);
            apply_synth_flags(*synth, sf, cfg);
            return cmd_synth(cfg, out);
        }
        if (train_cmd->parsed()) {
            RunConfig cfg = base_config(*train_cmd, g);
            apply_sim_flags(*train_cmd, tf, cfg);
            cfg.resolved_sim().validate();
            return cmd_train(cfg, out);
        }
        if (sim->parsed()) {
            RunConfig cfg = base_config(*sim, g);
            apply_sim_flags(*sim, simf, cfg);
            return cmd_simulate(cfg);
        }
        if (compare->parsed()) return cmd_compare(run_dirs, baseline, g.out, svg, out);
        if (report->parsed()) return cmd_report(report_dir, format, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace cocoon
