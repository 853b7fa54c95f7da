#include <random>
#include <set>

#include "cocoon/errors.hpp"
#include "cocoon/graph.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cocoon;

namespace {

BipartiteGraph biclique(std::size_t users, std::size_t news) {
    std::vector<std::string> u, n;
    std::vector<Edge> e;
    for (std::size_t i = 0; i < users; ++i) u.push_back("U" + std::to_string(i));
    for (std::size_t j = 0; j < news; ++j) n.push_back("N" + std::to_string(j));
    for (std::size_t i = 0; i < users; ++i)
        for (std::size_t j = 0; j < news; ++j) e.push_back({i, j, 1});
    return BipartiteGraph(u, n, e);
}

// Random bipartite graph with at most max_nodes nodes and at least one edge.
BipartiteGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes) {
    std::uniform_int_distribution<std::size_t> total(2, max_nodes);
    const std::size_t n = total(rng);
    const std::size_t users = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
    const std::size_t news = n - users;
    std::bernoulli_distribution coin(0.45);
    std::uniform_int_distribution<std::uint32_t> weight(1, 3);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < users; ++i)
        for (std::size_t j = 0; j < news; ++j)
            if (coin(rng)) edges.push_back({i, j, weight(rng)});
    if (edges.empty()) edges.push_back({0, 0, 1});
    std::vector<std::string> u, nn;
    for (std::size_t i = 0; i < users; ++i) u.push_back("U" + std::to_string(i));
    for (std::size_t j = 0; j < news; ++j) nn.push_back("N" + std::to_string(j));
    return BipartiteGraph(u, nn, edges);
}

std::vector<std::set<std::size_t>> components(const BipartiteGraph& g) {
    std::vector<std::size_t> parent(g.node_count());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (const auto& e : g.edges()) parent[find(e.user)] = find(g.news_node(e.news));
    std::map<std::size_t, std::set<std::size_t>> groups;
    for (std::size_t i = 0; i < parent.size(); ++i) groups[find(i)].insert(i);
    std::vector<std::set<std::size_t>> out;
    for (auto& [root, members] : groups) out.push_back(members);
    return out;
}

}  // namespace

TEST_CASE("build_graph weights and isolated nodes") {
    const Corpus c({testing::news("n1", "a"), testing::news("n2", "a"), testing::news("n3", "b")},
                   {{"u1", {"n1", "n2"}}, {"u2", {"n1", "n1"}}, {"u3", {}}}, {});
    const auto g = build_graph(c);
    CHECK(g.user_count() == 3);
    CHECK(g.news_count() == 3);
    REQUIRE(g.edges().size() == 3);
    CHECK(g.edges()[0] == Edge{0, 0, 1});
    CHECK(g.edges()[1] == Edge{0, 1, 1});
    CHECK(g.edges()[2] == Edge{1, 0, 2});
    CHECK(g.total_weight() == 4.0);

    const auto empty = build_graph(Corpus{});
    CHECK(empty.node_count() == 0);
    CHECK(empty.edges().empty());
    CHECK_THROWS_AS(build_graph({"u"}, {{"zz"}}, {"n1"}), IntegrityError);
}

TEST_CASE("modularity fixtures") {
    const auto g = biclique(2, 2);
    CHECK(modularity(g, Partition{{0, 0, 0, 0}}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(modularity(g, Partition{{0, 1, 2, 3}}) < 0.0);
    CHECK_THROWS_AS(modularity(BipartiteGraph({"u"}, {"n"}, {}), Partition{{0, 1}}), DomainError);
    CHECK_THROWS_AS(modularity(g, Partition{{0, 0}}), IntegrityError);
}

TEST_CASE("two triangles joined by a bridge") {
    UndirectedGraph g{6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}}};
    const Partition p{{0, 0, 0, 1, 1, 1}};
    CHECK(std::abs(modularity(g, p) - (6.0 / 7.0 - 0.5)) < 1e-12);
    const auto found = louvain_detailed(g, 1);
    CHECK(found.partition == p);
}

TEST_CASE("modularity agrees with the adjacency-matrix definition") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng, 9);
        std::vector<std::size_t> labels(g.node_count());
        for (auto& l : labels) l = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
        Partition p{labels};
        CHECK(modularity(g, p) == doctest::Approx(testing::naive_modularity(testing::adjacency(g), labels)).epsilon(1e-12));
        // Relabeling communities leaves Q unchanged.
        Partition swapped = p;
        for (auto& l : swapped.assignment) l = 2 - l;
        CHECK(modularity(g, swapped) == doctest::Approx(modularity(g, p)).epsilon(1e-12));
        const double q = modularity(g, p);
        CHECK(q >= -0.5 - 1e-12);
        CHECK(q <= 1.0);
    }
}

TEST_CASE("louvain reaches the exhaustive optimum on small graphs") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const auto g = random_graph(rng, 8);
        const auto r = louvain_detailed(g, static_cast<std::uint64_t>(trial));
        CHECK(modularity(g, r.partition) >= 0.95 * testing::best_modularity(g) - 1e-12);
    }
}

TEST_CASE("louvain on disconnected bicliques") {
    // Two K2,2 blocks: users {0,1} x news {0,1} and users {2,3} x news {2,3}.
    std::vector<Edge> e;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            e.push_back({i, j, 1});
            e.push_back({i + 2, j + 2, 1});
        }
    const BipartiteGraph g({"a", "b", "c", "d"}, {"w", "x", "y", "z"}, e);
    const auto p = louvain(g, 3);
    CHECK(p.community_count() == 2);
    CHECK(p.assignment == std::vector<std::size_t>{0, 0, 1, 1, 0, 0, 1, 1});
}

TEST_CASE("single edge forms one community") {
    const BipartiteGraph g({"u"}, {"n"}, {{0, 0, 1}});
    const auto p = louvain(g, 0);
    CHECK(p.assignment == std::vector<std::size_t>{0, 0});
    CHECK_THROWS_AS(louvain(BipartiteGraph({"u"}, {"n"}, {}), 0), DomainError);
}

TEST_CASE("louvain properties on random graphs") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const auto g = random_graph(rng, 30);
        const auto a = louvain_detailed(g, 5);
        const auto b = louvain_detailed(g, 5);
        CHECK(a.partition == b.partition);
        for (std::size_t i = 1; i < a.modularity_trace.size(); ++i)
            CHECK(a.modularity_trace[i] >= a.modularity_trace[i - 1] - 1e-12);
        CHECK(a.modularity_trace.back() == doctest::Approx(modularity(g, a.partition)).epsilon(1e-12));
        // Dense ids, ordered by size descending.
        const std::size_t c = a.partition.community_count();
        std::vector<std::size_t> size(c, 0);
        for (std::size_t x : a.partition.assignment) {
            REQUIRE(x < c);
            ++size[x];
        }
        for (std::size_t k = 1; k < c; ++k) CHECK(size[k - 1] >= size[k]);
        // No community spans two components.
        for (const auto& comp : components(g))
            for (std::size_t other = 0; other < g.node_count(); ++other)
                if (!comp.count(other))
                    CHECK(a.partition.assignment[other] != a.partition.assignment[*comp.begin()]);
    }
}

TEST_CASE("unweighted louvain ignores multiplicity") {
    const BipartiteGraph heavy({"u0", "u1"}, {"n0", "n1"}, {{0, 0, 5}, {0, 1, 1}, {1, 1, 5}});
    LouvainOptions opts;
    opts.weighted = false;
    const BipartiteGraph flat({"u0", "u1"}, {"n0", "n1"}, {{0, 0, 1}, {0, 1, 1}, {1, 1, 1}});
    CHECK(louvain_detailed(heavy, 2, opts).partition == louvain_detailed(flat, 2).partition);
}

TEST_CASE("community stats fixtures") {
    const auto k23 = biclique(2, 3);
    const auto s = community_stats(k23, Partition{{0, 0, 0, 0, 0}});
    REQUIRE(s.communities.size() == 1);
    CHECK(s.communities[0] == CommunityTally{2, 3, 6, 0});
    CHECK(s.edge_count == 6);

    const BipartiteGraph cross({"u"}, {"n"}, {{0, 0, 3}});
    const auto t = community_stats(cross, Partition{{0, 1}});
    CHECK(t.communities[0] == CommunityTally{1, 0, 0, 1});
    CHECK(t.communities[1] == CommunityTally{0, 1, 0, 1});
}

TEST_CASE("community stats agree with a brute-force recount") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng, 14);
        std::vector<std::size_t> labels(g.node_count());
        for (auto& l : labels) l = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
        // Densify labels so every id in 0..C-1 is used.
        std::map<std::size_t, std::size_t> dense;
        for (auto& l : labels) l = dense.emplace(l, dense.size()).first->second;
        const Partition p{labels};
        const auto s = community_stats(g, p);
        REQUIRE(s.communities.size() == dense.size());
        std::size_t internal = 0, external = 0;
        for (std::size_t c = 0; c < dense.size(); ++c) {
            CommunityTally expected;
            for (std::size_t i = 0; i < g.user_count(); ++i) expected.users += labels[i] == c;
            for (std::size_t j = 0; j < g.news_count(); ++j) expected.news += labels[g.news_node(j)] == c;
            for (const auto& e : g.edges()) {
                const bool a = labels[e.user] == c, b = labels[g.news_node(e.news)] == c;
                if (a && b) ++expected.internal_edges;
                if (a != b) ++expected.external_edges;
            }
            CHECK(s.communities[c] == expected);
            internal += expected.internal_edges;
            external += expected.external_edges;
        }
        CHECK(2 * internal + external == 2 * g.edges().size());
    }
}

TEST_CASE("edge and partition export") {
    const BipartiteGraph g({"u0", "u1"}, {"n0"}, {{0, 0, 2}, {1, 0, 1}});
    CHECK(export_edges(g) == std::vector<std::string>{"u0\tn0\t2", "u1\tn0\t1"});
    CHECK(export_partition(g, Partition{{0, 1, 0}}) == std::vector<std::string>{"u0\t0", "u1\t1", "n0\t0"});
}
