#include "cocoon/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cocoon/errors.hpp"
#include "cocoon/io.hpp"
#include "cocoon/rng.hpp"

namespace cocoon {

const char* to_string(CategoryLevel level) {
    return level == CategoryLevel::Category ? "category" : "subcategory";
}

CategoryLevel parse_level(std::string_view text) {
    if (text == "category") return CategoryLevel::Category;
    if (text == "subcategory") return CategoryLevel::Subcategory;
    throw ConfigError("unknown category level '" + std::string(text) + "'");
}

void append_capped(std::vector<std::string>& history, std::span<const std::string> items) {
    history.insert(history.end(), items.begin(), items.end());
    if (history.size() > kMaxHistory)
        history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(kMaxHistory));
}

namespace {

// Byte length of a Unicode space sequence starting at text[i], or 0.
std::size_t unicode_space_len(std::string_view text, std::size_t i) {
    const auto b = [&](std::size_t k) { return static_cast<unsigned char>(text[i + k]); };
    const std::size_t left = text.size() - i;
    if (left >= 2 && b(0) == 0xC2 && (b(1) == 0xA0 || b(1) == 0x85)) return 2;
    if (left >= 3 && b(0) == 0xE1 && b(1) == 0x9A && b(2) == 0x80) return 3;
    if (left >= 3 && b(0) == 0xE2 && b(1) == 0x80 &&
        ((b(2) >= 0x80 && b(2) <= 0x8A) || b(2) == 0xA8 || b(2) == 0xA9 || b(2) == 0xAF))
        return 3;
    if (left >= 3 && b(0) == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) return 3;
    if (left >= 3 && b(0) == 0xE3 && b(1) == 0x80 && b(2) == 0x80) return 3;
    return 0;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// Space-separated ids; empty fields yield an empty list.
std::vector<std::string> split_ids(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, std::size_t cap) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && tokens.size() < cap) tokens.push_back(cur);
        cur.clear();
    };
    std::size_t i = 0;
    while (i < text.size() && tokens.size() < cap) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c < 0x80) {
            if (std::isspace(c) || std::ispunct(c))
                flush();
            else
                cur += static_cast<char>(std::tolower(c));
            ++i;
            continue;
        }
        if (const std::size_t n = unicode_space_len(text, i); n > 0) {
            flush();
            i += n;
            continue;
        }
        cur += static_cast<char>(c);
        ++i;
    }
    flush();
    return tokens;
}

Corpus::Corpus(std::vector<NewsItem> news, std::vector<UserProfile> users,
               std::vector<Impression> impressions)
    : news_(std::move(news)), users_(std::move(users)), impressions_(std::move(impressions)) {
    for (std::size_t i = 0; i < news_.size(); ++i) {
        if (news_[i].id.empty()) throw IntegrityError("news item with empty id");
        if (news_[i].category.empty())
            throw IntegrityError("news item '" + news_[i].id + "' has empty category");
        if (!news_by_id_.emplace(news_[i].id, i).second)
            throw DuplicateIdError("duplicate news id '" + news_[i].id + "'");
    }
    for (std::size_t i = 0; i < users_.size(); ++i) {
        auto& u = users_[i];
        if (u.id.empty()) throw IntegrityError("user with empty id");
        if (!user_by_id_.emplace(u.id, i).second)
            throw DuplicateIdError("duplicate user id '" + u.id + "'");
        if (u.history.size() > kMaxHistory)
            u.history.erase(u.history.begin(),
                            u.history.end() - static_cast<std::ptrdiff_t>(kMaxHistory));
        for (const auto& h : u.history)
            if (!news_by_id_.count(h))
                throw IntegrityError("user '" + u.id + "' history references unknown news '" + h +
                                     "'");
    }
    for (const auto& imp : impressions_) {
        if (!user_by_id_.count(imp.user_id))
            throw IntegrityError("impression '" + imp.impression_id + "' references unknown user '" +
                                 imp.user_id + "'");
        if (imp.candidates.empty())
            throw IntegrityError("impression '" + imp.impression_id + "' has no candidates");
        for (const auto& c : imp.candidates)
            if (!news_by_id_.count(c))
                throw IntegrityError("impression '" + imp.impression_id +
                                     "' references unknown news '" + c + "'");
        for (const auto& c : imp.clicks)
            if (std::find(imp.candidates.begin(), imp.candidates.end(), c) == imp.candidates.end())
                throw IntegrityError("impression '" + imp.impression_id + "' click '" + c +
                                     "' is not a candidate");
    }
}

std::optional<std::size_t> Corpus::news_index(std::string_view id) const {
    auto it = news_by_id_.find(std::string(id));
    if (it == news_by_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Corpus::user_index(std::string_view id) const {
    auto it = user_by_id_.find(std::string(id));
    if (it == user_by_id_.end()) return std::nullopt;
    return it->second;
}

const NewsItem& Corpus::news_item(std::string_view id) const {
    auto idx = news_index(id);
    if (!idx) throw LookupError("unknown news id '" + std::string(id) + "'");
    return news_[*idx];
}

const UserProfile& Corpus::user(std::string_view id) const {
    auto idx = user_index(id);
    if (!idx) throw LookupError("unknown user id '" + std::string(id) + "'");
    return users_[*idx];
}

std::size_t Corpus::category_count(CategoryLevel level) const {
    std::set<std::string> labels;
    for (const auto& n : news_) labels.insert(n.label(level));
    return labels.size();
}

std::vector<NewsItem> parse_mind_news(std::span<const std::string> lines) {
    std::vector<NewsItem> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = strip_cr(lines[i]);
        if (line.empty()) continue;
        const auto fields = split(line, '\t');
        if (fields.size() < 5)
            throw ParseError(i + 1, "expected at least 5 tab-separated fields, got " +
                                        std::to_string(fields.size()));
        if (fields[0].empty()) throw ParseError(i + 1, "empty news id");
        if (!seen.insert(fields[0]).second)
            throw DuplicateIdError("line " + std::to_string(i + 1) + ": duplicate news id '" +
                                   fields[0] + "'");
        out.push_back(NewsItem{fields[0], fields[1], fields[2],
                               tokenize(fields[3], kMaxTitleTokens),
                               tokenize(fields[4], kMaxAbstractTokens)});
    }
    return out;
}

BehaviorsParse parse_mind_behaviors(std::span<const std::string> lines) {
    BehaviorsParse out;
    std::unordered_map<std::string, std::size_t> user_slot;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = strip_cr(lines[i]);
        if (line.empty()) continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 5)
            throw ParseError(i + 1, "expected 5 tab-separated fields, got " +
                                        std::to_string(fields.size()));
        Impression imp{fields[0], fields[1], fields[2], {}, {}};
        if (imp.user_id.empty()) throw ParseError(i + 1, "empty user id");
        for (const auto& pair : split_ids(fields[4])) {
            const auto dash = pair.rfind('-');
            if (dash == std::string::npos || dash == 0)
                throw ParseError(i + 1, "impression entry '" + pair + "' lacks a -0/-1 label");
            const auto label = pair.substr(dash);
            if (label != "-0" && label != "-1")
                throw ParseError(i + 1, "impression entry '" + pair + "' has label '" + label +
                                            "', expected -0 or -1");
            imp.candidates.push_back(pair.substr(0, dash));
            if (label == "-1") imp.clicks.push_back(imp.candidates.back());
        }
        if (imp.candidates.empty()) throw ParseError(i + 1, "impression has no candidates");

        auto history = split_ids(fields[3]);
        if (history.size() > kMaxHistory)
            history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(kMaxHistory));
        auto [it, inserted] = user_slot.emplace(imp.user_id, out.users.size());
        if (inserted)
            out.users.push_back(UserProfile{imp.user_id, std::move(history)});
        else
            out.users[it->second].history = std::move(history);
        out.impressions.push_back(std::move(imp));
    }
    return out;
}

std::vector<std::string> serialize_mind_news(const Corpus& corpus) {
    std::vector<std::string> lines;
    lines.reserve(corpus.news().size());
    for (const auto& n : corpus.news())
        lines.push_back(n.id + '\t' + n.category + '\t' + n.subcategory + '\t' +
                        join(n.title_tokens, ' ') + '\t' + join(n.abstract_tokens, ' '));
    return lines;
}

std::vector<std::string> serialize_mind_behaviors(const Corpus& corpus) {
    std::vector<std::string> lines;
    lines.reserve(corpus.impressions().size());
    for (const auto& imp : corpus.impressions()) {
        std::vector<std::string> labeled;
        labeled.reserve(imp.candidates.size());
        for (const auto& c : imp.candidates) {
            const bool clicked =
                std::find(imp.clicks.begin(), imp.clicks.end(), c) != imp.clicks.end();
            labeled.push_back(c + (clicked ? "-1" : "-0"));
        }
        lines.push_back(imp.impression_id + '\t' + imp.user_id + '\t' + imp.timestamp + '\t' +
                        join(corpus.user(imp.user_id).history, ' ') + '\t' + join(labeled, ' '));
    }
    return lines;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

Corpus load_mind(const std::string& news_path, const std::string& behaviors_path) {
    auto with_file = [](const std::string& path, auto&& fn) {
        try {
            return fn(read_lines(path));
        } catch (const ParseError& e) {
            std::string detail = e.what();
            const std::string prefix = "line " + std::to_string(e.line()) + ": ";
            if (detail.rfind(prefix, 0) == 0) detail.erase(0, prefix.size());
            throw Error(path + ":" + std::to_string(e.line()) + ": " + detail);
        } catch (const DuplicateIdError& e) {
            throw DuplicateIdError(path + ": " + e.what());
        }
    };
    auto news = with_file(news_path, [](const std::vector<std::string>& l) { return parse_mind_news(l); });
    auto behaviors =
        with_file(behaviors_path, [](const std::vector<std::string>& l) { return parse_mind_behaviors(l); });
    return Corpus(std::move(news), std::move(behaviors.users), std::move(behaviors.impressions));
}

void save_mind(const Corpus& corpus, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_lines_atomic(dir + "/news.tsv", serialize_mind_news(corpus));
    write_lines_atomic(dir + "/behaviors.tsv", serialize_mind_behaviors(corpus));
}

void SynthConfig::validate() const {
    if (n_users < 1 || n_news < 1 || n_categories < 1 || subcats_per_category < 1)
        throw ConfigError("synthetic corpus counts must all be >= 1");
    if (!(preference_concentration > 0.0) || !std::isfinite(preference_concentration))
        throw ConfigError("preference_concentration must be a positive finite number");
    if (history_len < 1 || history_len > kMaxHistory)
        throw ConfigError("history_len must lie in [1, 50]");
    if (n_news < n_categories) throw ConfigError("n_news must be >= n_categories");
}

namespace {

// Dirichlet(alpha, ..., alpha) in log space so tiny concentrations do not underflow.
std::vector<double> sample_dirichlet(Rng& rng, std::size_t k, double alpha) {
    std::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
    std::vector<double> logs(k);
    for (auto& l : logs) {
        const double u = 1.0 - uniform01(rng);  // (0, 1]
        l = std::log(gamma(rng)) + std::log(u) / alpha;
    }
    const double mx = *std::max_element(logs.begin(), logs.end());
    double sum = 0.0;
    for (auto& l : logs) sum += (l = std::exp(l - mx));
    for (auto& l : logs) l /= sum;
    return logs;
}

std::size_t sample_discrete(Rng& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double r = uniform01(rng) * total;
    std::size_t last = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last = i;
        if (r < weights[i]) return i;
        r -= weights[i];
    }
    return last;
}

std::vector<std::string> synth_words(Rng& rng, std::size_t category, std::size_t count) {
    constexpr std::size_t kTopicVocab = 40;
    constexpr std::size_t kSharedVocab = 300;
    std::vector<std::string> words;
    words.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (uniform01(rng) < 0.6)
            words.push_back("t" + std::to_string(category) + "w" +
                            std::to_string(uniform_index(rng, kTopicVocab)));
        else
            words.push_back("w" + std::to_string(uniform_index(rng, kSharedVocab)));
    }
    return words;
}

}  // namespace

Corpus synth_corpus(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t n_cat = cfg.n_categories;

    std::vector<NewsItem> news;
    news.reserve(cfg.n_news);
    std::vector<std::vector<std::size_t>> by_category(n_cat);
    Rng news_rng = make_rng(cfg.seed, {tag(Stream::SynthNews)});
    for (std::size_t i = 0; i < cfg.n_news; ++i) {
        const std::size_t c = uniform_index(news_rng, n_cat);
        const std::size_t s = uniform_index(news_rng, cfg.subcats_per_category);
        NewsItem item;
        item.id = "N" + std::to_string(i + 1);
        item.category = "cat" + std::to_string(c);
        item.subcategory = item.category + "_sub" + std::to_string(s);
        item.title_tokens = synth_words(news_rng, c, 8);
        item.abstract_tokens = synth_words(news_rng, c, 16);
        by_category[c].push_back(i);
        news.push_back(std::move(item));
    }

    std::vector<UserProfile> users;
    std::vector<Impression> impressions;
    users.reserve(cfg.n_users);
    Rng user_rng = make_rng(cfg.seed, {tag(Stream::SynthUsers)});
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
        const auto pref = sample_dirichlet(user_rng, n_cat, cfg.preference_concentration);
        std::vector<std::vector<std::size_t>> remaining = by_category;
        auto draw = [&]() -> std::optional<std::size_t> {
            std::vector<double> w(n_cat);
            bool any = false;
            for (std::size_t c = 0; c < n_cat; ++c) {
                w[c] = remaining[c].empty() ? 0.0 : pref[c];
                any = any || w[c] > 0.0;
            }
            if (!any) {
                // Preferred categories are exhausted: fall back to any remaining item.
                for (std::size_t c = 0; c < n_cat; ++c) w[c] = remaining[c].empty() ? 0.0 : 1.0;
                if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; }))
                    return std::nullopt;
            }
            auto& pool = remaining[sample_discrete(user_rng, w)];
            const std::size_t k = uniform_index(user_rng, pool.size());
            const std::size_t item = pool[k];
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
            return item;
        };

        UserProfile profile{"U" + std::to_string(u + 1), {}};
        for (std::size_t h = 0; h < cfg.history_len; ++h) {
            auto item = draw();
            if (!item) break;
            profile.history.push_back(news[*item].id);
        }

        // One impression: a preference-drawn click among uniformly drawn non-clicks.
        Impression imp;
        imp.impression_id = std::to_string(u + 1);
        imp.user_id = profile.id;
        imp.timestamp = "2019-11-15T00:00:" + std::to_string(10 + u % 50);
        std::set<std::size_t> used;
        if (auto pos = draw()) {
            imp.candidates.push_back(news[*pos].id);
            imp.clicks.push_back(news[*pos].id);
            used.insert(*pos);
        }
        for (std::size_t attempt = 0; imp.candidates.size() < 5 && attempt < 50; ++attempt) {
            const std::size_t j = uniform_index(user_rng, cfg.n_news);
            if (!used.insert(j).second) continue;
            if (std::find(profile.history.begin(), profile.history.end(), news[j].id) !=
                profile.history.end())
                continue;
            imp.candidates.push_back(news[j].id);
        }
        if (imp.candidates.empty()) imp.candidates.push_back(news[uniform_index(user_rng, cfg.n_news)].id);
        users.push_back(std::move(profile));
        impressions.push_back(std::move(imp));
    }
    return Corpus(std::move(news), std::move(users), std::move(impressions));
}

CorpusSummary summarize(const Corpus& corpus) {
    return CorpusSummary{corpus.news().size(), corpus.users().size(),
                         corpus.category_count(CategoryLevel::Category),
                         corpus.category_count(CategoryLevel::Subcategory),
                         corpus.impressions().size()};
}

}  // namespace cocoon
