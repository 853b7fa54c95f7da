#include <algorithm>
#include <fstream>
#include <map>

#include "cocoon/corpus.hpp"
#include "cocoon/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cocoon;

namespace {

std::vector<std::string> news_lines(std::initializer_list<const char*> lines) { return {lines.begin(), lines.end()}; }

std::string words(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
    return s;
}

}  // namespace

TEST_CASE("news line maps onto NewsItem fields") {
    const auto items = parse_mind_news(news_lines({"N1\tsports\tsoccer\tBig Match Tonight\tA preview."}));
    REQUIRE(items.size() == 1);
    CHECK(items[0] == NewsItem{"N1", "sports", "soccer", {"big", "match", "tonight"}, {"a", "preview"}});
}

TEST_CASE("empty abstract gives no abstract tokens") {
    const auto items = parse_mind_news(news_lines({"N1\tsports\tsoccer\tTitle\t"}));
    CHECK(items[0].abstract_tokens.empty());
}

TEST_CASE("title and abstract token caps") {
    const std::string line = "N1\tc\ts\t" + words(25) + "\t" + words(70);
    const auto items = parse_mind_news(std::vector<std::string>{line});
    CHECK(items[0].title_tokens.size() == 20);
    CHECK(items[0].abstract_tokens.size() == 50);
    CHECK(items[0].title_tokens.front() == "w0");
    CHECK(items[0].title_tokens.back() == "w19");
}

TEST_CASE("surplus news columns are ignored") {
    const auto items = parse_mind_news(news_lines({"N1\tc\ts\tT\tA\thttp://x\t[]\t[]"}));
    CHECK(items[0].id == "N1");
    CHECK(items[0].title_tokens == std::vector<std::string>{"t"});
}

TEST_CASE("tokenize lowercases and splits on whitespace and punctuation") {
    CHECK(tokenize("Hello,World!  It's\tfine", 10) == std::vector<std::string>{"hello", "world", "it", "s", "fine"});
    CHECK(tokenize("a\xC2\xA0" "b\xE2\x80\x83" "c", 10) == std::vector<std::string>{"a", "b", "c"});
    CHECK(tokenize("caf\xC3\xA9 ok", 10) == std::vector<std::string>{"caf\xC3\xA9", "ok"});
    CHECK(tokenize("", 5).empty());
    CHECK(tokenize("a b c", 2) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("short news line is a parse error with its line number") {
    try {
        parse_mind_news(news_lines({"N1\tc\ts\tT\tA", "N2\tc\ts"}));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("duplicate news id is rejected") {
    CHECK_THROWS_AS(parse_mind_news(news_lines({"N1\tc\ts\tT\tA", "N1\tc\ts\tT\tA"})), DuplicateIdError);
}

TEST_CASE("behaviors suffix rule and history column") {
    const auto parsed = parse_mind_behaviors(std::vector<std::string>{"I1\tU1\t11/15/2019 8:00:00 AM\tN3 N4\tN1-1 N2-0"});
    REQUIRE(parsed.impressions.size() == 1);
    CHECK(parsed.impressions[0].candidates == std::vector<std::string>{"N1", "N2"});
    CHECK(parsed.impressions[0].clicks == std::vector<std::string>{"N1"});
    REQUIRE(parsed.users.size() == 1);
    CHECK(parsed.users[0].history == std::vector<std::string>{"N3", "N4"});
}

TEST_CASE("empty history column is an empty history") {
    const auto parsed = parse_mind_behaviors(std::vector<std::string>{"I1\tU1\tt\t\tN1-0"});
    CHECK(parsed.users[0].history.empty());
}

TEST_CASE("long history keeps the most recent 50") {
    std::string hist;
    for (int i = 0; i < 60; ++i) hist += (i ? " N" : "N") + std::to_string(i);
    const auto parsed = parse_mind_behaviors(std::vector<std::string>{"I1\tU1\tt\t" + hist + "\tN1-1"});
    const auto& h = parsed.users[0].history;
    REQUIRE(h.size() == 50);
    CHECK(h.front() == "N10");
    CHECK(h.back() == "N59");
}

TEST_CASE("malformed behaviors lines carry line numbers") {
    auto line_of = [](std::vector<std::string> lines) {
        try {
            parse_mind_behaviors(lines);
        } catch (const ParseError& e) {
            return e.line();
        }
        return std::size_t{0};
    };
    CHECK(line_of({"I1\tU1\tt\t\tN1-1", "I2\tU1\tt\t\tN1-2"}) == 2);
    CHECK(line_of({"I1\tU1\tt\t\tN1-1", "", "I2\tU1\tt\tN1"}) == 3);
    CHECK(line_of({"I1\tU1\tt\t\tN1"}) == 1);
    CHECK(line_of({"I1\tU1\tt\t\t"}) == 1);
    CHECK(line_of({"I1\tU1\tt\t\tN1-1\textra"}) == 1);
}

TEST_CASE("corpus integrity checks") {
    const std::vector<NewsItem> n{testing::news("N1", "a"), testing::news("N2", "b")};
    CHECK_NOTHROW(Corpus(n, {{"U1", {"N1"}}}, {}));
    CHECK_THROWS_AS(Corpus(n, {{"U1", {"N9"}}}, {}), IntegrityError);
    CHECK_THROWS_AS(Corpus(n, {{"U1", {}}, {"U1", {}}}, {}), DuplicateIdError);
    CHECK_THROWS_AS(Corpus({testing::news("N1", "a"), testing::news("N1", "b")}, {}, {}), DuplicateIdError);
    CHECK_THROWS_AS(Corpus(n, {{"U1", {}}}, {{"I1", "U1", "t", {"N1"}, {"N2"}}}), IntegrityError);
    CHECK_THROWS_AS(Corpus(n, {{"U1", {}}}, {{"I1", "U9", "t", {"N1"}, {}}}), IntegrityError);
    CHECK_THROWS_AS(Corpus(n, {{"U1", {}}}, {{"I1", "U1", "t", {}, {}}}), IntegrityError);
    CHECK_THROWS_AS(Corpus(n, {}, {}).news_item("N3"), LookupError);
}

TEST_CASE("append_capped evicts the oldest entries") {
    std::vector<std::string> h;
    for (int i = 0; i < 50; ++i) h.push_back("N" + std::to_string(i));
    const std::vector<std::string> clicks{"X1", "X2"};
    append_capped(h, clicks);
    CHECK(h.size() == 50);
    CHECK(h.front() == "N2");
    CHECK(h.back() == "X2");
}

TEST_CASE("MIND round trip on a 100-line fixture") {
    // 50 news lines and 50 behaviors lines with repeated users, growing histories and
    // punctuation in the text.
    std::vector<std::string> news, behaviors;
    for (int i = 0; i < 50; ++i)
        news.push_back("N" + std::to_string(i) + "\tcat" + std::to_string(i % 7) + "\tsub" + std::to_string(i % 13) +
                       "\tStory #" + std::to_string(i) + ": What's Next?\tAbstract, part " + std::to_string(i) + ".");
    std::map<int, std::string> hist;
    for (int i = 0; i < 50; ++i) {
        const int u = i % 12;
        hist[u] += (hist[u].empty() ? "N" : " N") + std::to_string((i * 7) % 50);
        behaviors.push_back("I" + std::to_string(i) + "\tU" + std::to_string(u) + "\t11/1" + std::to_string(i % 10) +
                            "/2019 9:00:00 AM\t" + hist[u] + "\tN" + std::to_string((i * 3) % 50) + "-1 N" +
                            std::to_string((i * 3 + 1) % 50) + "-0");
    }
    const auto dir = testing::temp_dir("roundtrip");
    auto write = [](const std::string& path, const std::vector<std::string>& lines) {
        std::ofstream out(path);
        for (const auto& l : lines) out << l << '\n';
    };
    write(dir + "/news_in.tsv", news);
    write(dir + "/behaviors_in.tsv", behaviors);

    const Corpus first = load_mind(dir + "/news_in.tsv", dir + "/behaviors_in.tsv");
    CHECK(first.news().size() == 50);
    CHECK(first.impressions().size() == 50);
    CHECK(first.users().size() == 12);
    save_mind(first, dir + "/out");
    const Corpus second = load_mind(dir + "/out/news.tsv", dir + "/out/behaviors.tsv");
    CHECK(first == second);
}

TEST_CASE("load_mind reports file and line") {
    const auto dir = testing::temp_dir("badfile");
    {
        std::ofstream(dir + "/news.tsv") << "N1\tc\ts\tT\tA\nN2\tc\n";
        std::ofstream(dir + "/behaviors.tsv") << "";
    }
    try {
        load_mind(dir + "/news.tsv", dir + "/behaviors.tsv");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("news.tsv:2:") != std::string::npos);
    }
    CHECK_THROWS_AS(load_mind(dir + "/missing.tsv", dir + "/behaviors.tsv"), Error);
}

TEST_CASE("synthetic corpus is deterministic and sized") {
    SynthConfig cfg;
    cfg.n_users = 10;
    cfg.n_news = 50;
    cfg.seed = 7;
    const Corpus a = synth_corpus(cfg);
    const Corpus b = synth_corpus(cfg);
    CHECK(a == b);
    CHECK(a.users().size() == 10);
    CHECK(a.news().size() == 50);
    cfg.seed = 8;
    CHECK_FALSE(synth_corpus(cfg) == a);
}

TEST_CASE("synthetic corpus invariants") {
    SynthConfig cfg;
    cfg.n_users = 40;
    cfg.n_news = 120;
    cfg.n_categories = 6;
    cfg.subcats_per_category = 3;
    const Corpus c = synth_corpus(cfg);
    for (const auto& n : c.news()) {
        CHECK(n.subcategory.rfind(n.category + "_", 0) == 0);
        CHECK(n.title_tokens.size() <= kMaxTitleTokens);
        CHECK(n.abstract_tokens.size() <= kMaxAbstractTokens);
    }
    for (const auto& u : c.users()) {
        CHECK(u.history.size() == cfg.history_len);
        auto sorted = u.history;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    }
    for (const auto& imp : c.impressions()) CHECK(imp.clicks.size() >= 1);
}

TEST_CASE("low concentration makes histories single-topic") {
    SynthConfig cfg;
    cfg.n_users = 100;
    cfg.n_news = 1000;
    cfg.n_categories = 10;
    cfg.preference_concentration = 0.01;
    cfg.history_len = 10;
    const Corpus c = synth_corpus(cfg);
    std::size_t modal = 0, total = 0;
    for (const auto& u : c.users()) {
        std::map<std::string, std::size_t> counts;
        for (const auto& h : u.history) ++counts[c.news_item(h).category];
        std::size_t best = 0;
        for (const auto& [cat, n] : counts) best = std::max(best, n);
        modal += best;
        total += u.history.size();
    }
    CHECK(static_cast<double>(modal) / static_cast<double>(total) >= 0.9);
}

TEST_CASE("synth config validation") {
    SynthConfig cfg;
    cfg.n_news = 5;
    cfg.n_categories = 10;
    CHECK_THROWS_AS(synth_corpus(cfg), ConfigError);
    cfg = SynthConfig{};
    cfg.preference_concentration = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SynthConfig{};
    cfg.history_len = 51;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("summary counts follow the corpus") {
    const Corpus c({testing::news("N1", "a", "a1"), testing::news("N2", "a", "a2"), testing::news("N3", "b", "b1")},
                   {{"U1", {"N1"}}, {"U2", {}}}, {{"I1", "U1", "t", {"N2", "N3"}, {"N2"}}});
    const auto s = summarize(c);
    CHECK(s.news == 3);
    CHECK(s.users == 2);
    CHECK(s.categories == 2);
    CHECK(s.subcategories == 3);
    CHECK(s.impressions == 1);
}
