#include "cocoon/config.hpp"

#include <set>

#include "cocoon/errors.hpp"
#include "cocoon/io.hpp"
#include "json.hpp"

namespace cocoon {

using nlohmann::json;

namespace {

// Reads typed keys out of one JSON object and rejects whatever it did not consume.
class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
    }

    void count(const char* key, std::size_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(where(key) + " must be a non-negative integer");
            out = v->get<std::size_t>();
        }
    }

    void seed(const char* key, std::uint64_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(where(key) + " must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void real(const char* key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) throw ConfigError(where(key) + " must be a number");
            out = v->get<double>();
        }
    }

    void flag(const char* key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) throw ConfigError(where(key) + " must be a boolean");
            out = v->get<bool>();
        }
    }

    bool text(const char* key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) throw ConfigError(where(key) + " must be a string");
            out = v->get<std::string>();
            return true;
        }
        return false;
    }

    void counts(const char* key, std::vector<std::size_t>& out) {
        if (const json* v = take(key)) {
            if (!v->is_array()) throw ConfigError(where(key) + " must be an array");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number_unsigned()) throw ConfigError(where(key) + " entries must be non-negative integers");
                out.push_back(e.get<std::size_t>());
            }
        }
    }

    template <typename F>
    void object(const char* key, F&& f) {
        if (const json* v = take(key)) {
            Reader sub(*v, where(key));
            f(sub);
            sub.finish();
        }
    }

    template <typename Parse, typename T>
    void choice(const char* key, T& out, Parse parse) {
        std::string s;
        if (text(key, s)) {
            try {
                out = parse(s);
            } catch (const ConfigError& e) {
                throw ConfigError(where(key) + ": " + e.what());
            }
        }
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items())
            if (!used_.count(key)) throw ConfigError("unknown key " + where(key.c_str()));
    }

private:
    const json* take(const char* key) {
        used_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }
    std::string where(const char* key = nullptr) const {
        std::string p = path_.empty() ? std::string("config") : path_;
        return key ? p + "." + key : p;
    }

    const json& obj_;
    std::string path_;
    std::set<std::string> used_;
};

LogBase parse_log_base(const std::string& s) {
    if (s == "2") return LogBase::Two;
    if (s == "e") return LogBase::E;
    throw ConfigError("log_base must be \"2\" or \"e\"");
}

const char* to_string(CorpusSource::Kind kind) {
    switch (kind) {
        case CorpusSource::Kind::Synthetic: return "synthetic";
        case CorpusSource::Kind::Mind: return "mind";
        case CorpusSource::Kind::Directory: return "dir";
    }
    return "?";
}

json to_json(const RunConfig& c) {
    const SimConfig& s = c.sim;
    json corpus{{"source", to_string(c.corpus.kind)}};
    switch (c.corpus.kind) {
        case CorpusSource::Kind::Synthetic:
            corpus["users"] = c.corpus.synth.n_users;
            corpus["news"] = c.corpus.synth.n_news;
            corpus["categories"] = c.corpus.synth.n_categories;
            corpus["subcategories"] = c.corpus.synth.subcats_per_category;
            corpus["concentration"] = c.corpus.synth.preference_concentration;
            corpus["history_len"] = c.corpus.synth.history_len;
            break;
        case CorpusSource::Kind::Mind:
            corpus["news"] = c.corpus.news_path;
            corpus["behaviors"] = c.corpus.behaviors_path;
            break;
        case CorpusSource::Kind::Directory:
            corpus["path"] = c.corpus.directory;
            break;
    }
    return json{
        {"seed", c.seed},
        {"out", c.out},
        {"corpus", corpus},
        {"model",
         {{"kind", to_string(s.recommender.kind)},
          {"dim", s.recommender.dim},
          {"init_scale", s.recommender.init_scale},
          {"short_window", s.recommender.short_window},
          {"temperature", s.recommender.temperature},
          {"checkpoint", s.checkpoint}}},
        {"train",
         {{"epochs", s.train.epochs},
          {"batch_size", s.train.batch_size},
          {"learning_rate", s.train.learning_rate},
          {"l2", s.train.l2},
          {"negatives_per_positive", s.train.negatives_per_positive},
          {"cdr_top_k", s.train.cdr_top_k}}},
        {"strategy",
         {{"kind", to_string(s.strategy.kind)},
          {"epsilon", s.strategy.epsilon},
          {"lambda", s.strategy.lambda},
          {"mu", s.strategy.mu},
          {"gamma", s.strategy.gamma},
          {"alpha", s.strategy.alpha},
          {"temperature", s.strategy.temperature},
          {"rerank_depth", s.strategy.rerank_depth}}},
        {"simulation",
         {{"rounds", s.rounds},
          {"k", s.k},
          {"report_ks", s.report_ks},
          {"level", to_string(s.level)},
          {"retrain_every", s.retrain_every},
          {"retrain_epochs", s.retrain_epochs},
          {"candidate_sample", s.candidate_sample},
          {"user_sample", s.user_sample},
          {"repeat_history", to_string(s.repeat_history)},
          {"click_model",
           {{"base_rate", s.click_model.base_rate},
            {"affinity_weight", s.click_model.affinity_weight},
            {"max_clicks_per_round", s.click_model.max_clicks_per_round}}},
          {"metrics",
           {{"log_base", s.metrics.log_base == LogBase::Two ? "2" : "e"},
            {"density_mode", to_string(s.metrics.density_mode)}}},
          {"louvain", {{"resolution", s.louvain.resolution}, {"weighted", s.louvain.weighted}}}}},
    };
}

}  // namespace

SimConfig RunConfig::resolved_sim() const {
    SimConfig s = sim;
    s.seed = seed;
    s.strategy.seed = seed;
    s.train.seed = seed;
    return s;
}

SynthConfig RunConfig::resolved_synth() const {
    SynthConfig s = corpus.synth;
    s.seed = seed;
    return s;
}

RunConfig parse_run_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    SimConfig& s = c.sim;
    Reader root(doc, "");
    root.seed("seed", c.seed);
    root.text("out", c.out);
    root.object("corpus", [&](Reader& r) {
        std::string source = "synthetic";
        r.text("source", source);
        if (source == "synthetic") {
            c.corpus.kind = CorpusSource::Kind::Synthetic;
            r.count("users", c.corpus.synth.n_users);
            r.count("news", c.corpus.synth.n_news);
            r.count("categories", c.corpus.synth.n_categories);
            r.count("subcategories", c.corpus.synth.subcats_per_category);
            r.real("concentration", c.corpus.synth.preference_concentration);
            r.count("history_len", c.corpus.synth.history_len);
        } else if (source == "mind") {
            c.corpus.kind = CorpusSource::Kind::Mind;
            if (!r.text("news", c.corpus.news_path) || !r.text("behaviors", c.corpus.behaviors_path))
                throw ConfigError("config.corpus: source \"mind\" needs news and behaviors paths");
        } else if (source == "dir") {
            c.corpus.kind = CorpusSource::Kind::Directory;
            if (!r.text("path", c.corpus.directory)) throw ConfigError("config.corpus: source \"dir\" needs path");
        } else {
            throw ConfigError("config.corpus.source must be synthetic, mind or dir");
        }
    });
    root.object("model", [&](Reader& r) {
        r.choice("kind", s.recommender.kind, parse_model_kind);
        r.count("dim", s.recommender.dim);
        r.real("init_scale", s.recommender.init_scale);
        r.count("short_window", s.recommender.short_window);
        r.real("temperature", s.recommender.temperature);
        r.text("checkpoint", s.checkpoint);
    });
    root.object("train", [&](Reader& r) {
        r.count("epochs", s.train.epochs);
        r.count("batch_size", s.train.batch_size);
        r.real("learning_rate", s.train.learning_rate);
        r.real("l2", s.train.l2);
        r.count("negatives_per_positive", s.train.negatives_per_positive);
        r.count("cdr_top_k", s.train.cdr_top_k);
    });
    root.object("strategy", [&](Reader& r) {
        r.choice("kind", s.strategy.kind, parse_strategy_kind);
        r.real("epsilon", s.strategy.epsilon);
        r.real("lambda", s.strategy.lambda);
        r.real("mu", s.strategy.mu);
        r.real("gamma", s.strategy.gamma);
        r.real("alpha", s.strategy.alpha);
        r.real("temperature", s.strategy.temperature);
        r.count("rerank_depth", s.strategy.rerank_depth);
    });
    root.object("simulation", [&](Reader& r) {
        r.count("rounds", s.rounds);
        r.count("k", s.k);
        r.counts("report_ks", s.report_ks);
        r.choice("level", s.level, parse_level_selection);
        r.count("retrain_every", s.retrain_every);
        r.count("retrain_epochs", s.retrain_epochs);
        r.count("candidate_sample", s.candidate_sample);
        r.count("user_sample", s.user_sample);
        r.choice("repeat_history", s.repeat_history, parse_repeat_history);
        r.object("click_model", [&](Reader& cm) {
            cm.real("base_rate", s.click_model.base_rate);
            cm.real("affinity_weight", s.click_model.affinity_weight);
            cm.count("max_clicks_per_round", s.click_model.max_clicks_per_round);
        });
        r.object("metrics", [&](Reader& m) {
            m.choice("log_base", s.metrics.log_base, parse_log_base);
            m.choice("density_mode", s.metrics.density_mode, parse_density_mode);
        });
        r.object("louvain", [&](Reader& l) {
            l.real("resolution", s.louvain.resolution);
            l.flag("weighted", s.louvain.weighted);
        });
    });
    root.finish();
    c.resolved_sim().validate();
    if (c.corpus.kind == CorpusSource::Kind::Synthetic) c.resolved_synth().validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    try {
        return parse_run_config(read_text(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string run_config_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string comparable_config_text(const std::string& json_text) {
    json doc = to_json(parse_run_config(json_text));
    for (const char* key : {"out", "model", "train", "strategy"}) doc.erase(key);
    return doc.dump();
}

std::string comparable_config(const RunConfig& cfg) { return comparable_config_text(run_config_json(cfg)); }

Corpus load_corpus(const RunConfig& cfg) {
    switch (cfg.corpus.kind) {
        case CorpusSource::Kind::Synthetic: return synth_corpus(cfg.resolved_synth());
        case CorpusSource::Kind::Mind: return load_mind(cfg.corpus.news_path, cfg.corpus.behaviors_path);
        case CorpusSource::Kind::Directory:
            return load_mind(cfg.corpus.directory + "/news.tsv", cfg.corpus.directory + "/behaviors.tsv");
    }
    throw ConfigError("unknown corpus source");
}

}  // namespace cocoon
