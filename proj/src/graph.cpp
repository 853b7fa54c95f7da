#include "cocoon/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <unordered_map>

#include "cocoon/errors.hpp"
#include "cocoon/rng.hpp"

namespace cocoon {

BipartiteGraph::BipartiteGraph(std::vector<std::string> user_nodes, std::vector<std::string> news_nodes,
                               std::vector<Edge> edges)
    : user_nodes_(std::move(user_nodes)), news_nodes_(std::move(news_nodes)) {
    for (const auto& e : edges) {
        if (e.user >= user_nodes_.size() || e.news >= news_nodes_.size())
            throw IntegrityError("edge references a node outside the graph");
        if (e.weight < 1) throw IntegrityError("edge weights must be >= 1");
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.user, a.news) < std::tie(b.user, b.news);
    });
    for (const auto& e : edges) {
        if (!edges_.empty() && edges_.back().user == e.user && edges_.back().news == e.news)
            edges_.back().weight += e.weight;
        else
            edges_.push_back(e);
    }
}

double BipartiteGraph::total_weight() const {
    double m = 0.0;
    for (const auto& e : edges_) m += e.weight;
    return m;
}

BipartiteGraph build_graph(const std::vector<std::string>& user_ids,
                           const std::vector<std::vector<std::string>>& histories,
                           const std::vector<std::string>& news_ids) {
    if (user_ids.size() != histories.size()) throw IntegrityError("one history per user expected");
    std::unordered_map<std::string, std::size_t> news_index;
    for (std::size_t i = 0; i < news_ids.size(); ++i) news_index.emplace(news_ids[i], i);
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < histories.size(); ++u) {
        for (const auto& h : histories[u]) {
            auto it = news_index.find(h);
            if (it == news_index.end())
                throw IntegrityError("history of '" + user_ids[u] + "' references unknown news '" + h + "'");
            edges.push_back({u, it->second, 1});
        }
    }
    return BipartiteGraph(user_ids, news_ids, std::move(edges));
}

BipartiteGraph build_graph(const Corpus& corpus) {
    std::vector<std::string> users, news;
    std::vector<std::vector<std::string>> histories;
    for (const auto& u : corpus.users()) {
        users.push_back(u.id);
        histories.push_back(u.history);
    }
    for (const auto& n : corpus.news()) news.push_back(n.id);
    return build_graph(users, histories, news);
}

std::size_t Partition::community_count() const {
    if (assignment.empty()) return 0;
    return *std::max_element(assignment.begin(), assignment.end()) + 1;
}

namespace {

void check_cover(const BipartiteGraph& graph, const Partition& partition) {
    if (partition.assignment.size() != graph.node_count())
        throw IntegrityError("partition covers " + std::to_string(partition.assignment.size()) +
                             " nodes, graph has " + std::to_string(graph.node_count()));
}

// Undirected weighted graph with self-loops, used across Louvain levels.
struct WorkGraph {
    std::vector<std::vector<std::pair<std::size_t, double>>> adj;  // no self entries
    std::vector<double> self;    // internal weight, each edge once
    std::vector<double> degree;  // sum of incident weights, self-loops twice
    double m = 0.0;

    std::size_t size() const { return adj.size(); }
};

WorkGraph to_work_graph(const UndirectedGraph& g) {
    WorkGraph w;
    w.adj.resize(g.node_count);
    w.self.assign(g.node_count, 0.0);
    w.degree.assign(g.node_count, 0.0);
    std::vector<std::map<std::size_t, double>> links(g.node_count);
    for (const auto& e : g.edges) {
        if (e.a >= g.node_count || e.b >= g.node_count) throw IntegrityError("edge endpoint out of range");
        if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw DomainError("edge weights must be positive");
        if (e.a == e.b) {
            w.self[e.a] += e.weight;
            w.degree[e.a] += 2.0 * e.weight;
        } else {
            links[e.a][e.b] += e.weight;
            links[e.b][e.a] += e.weight;
            w.degree[e.a] += e.weight;
            w.degree[e.b] += e.weight;
        }
        w.m += e.weight;
    }
    for (std::size_t i = 0; i < g.node_count; ++i) w.adj[i].assign(links[i].begin(), links[i].end());
    return w;
}

double work_modularity(const WorkGraph& g, const std::vector<std::size_t>& comm, double resolution) {
    const std::size_t c = comm.empty() ? 0 : *std::max_element(comm.begin(), comm.end()) + 1;
    std::vector<double> in(c, 0.0), tot(c, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        tot[comm[i]] += g.degree[i];
        in[comm[i]] += g.self[i];
        for (const auto& [j, w] : g.adj[i])
            if (i < j && comm[i] == comm[j]) in[comm[i]] += w;
    }
    double q = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        const double a = tot[k] / (2.0 * g.m);
        q += in[k] / g.m - resolution * a * a;
    }
    return q;
}

// One round of local moves; returns whether any node changed community.
bool local_moves(const WorkGraph& g, std::vector<std::size_t>& comm, double resolution, Rng& rng) {
    const std::size_t n = g.size();
    std::vector<double> tot(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) tot[comm[i]] += g.degree[i];

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    constexpr double kEps = 1e-12;
    std::vector<double> link(n, 0.0);
    std::vector<std::size_t> touched;
    bool any_move = false;
    for (std::size_t pass = 0; pass < 1000; ++pass) {
        bool moved = false;
        for (std::size_t i : order) {
            const std::size_t own = comm[i];
            const double k = g.degree[i];
            touched.clear();
            for (const auto& [j, w] : g.adj[i]) {
                if (link[comm[j]] == 0.0) touched.push_back(comm[j]);
                link[comm[j]] += w;
            }
            tot[own] -= k;
            const double scale = resolution * k / (2.0 * g.m);
            std::size_t best = own;
            double best_gain = link[own] - scale * tot[own];
            std::sort(touched.begin(), touched.end());
            for (std::size_t c : touched) {
                if (c == own) continue;
                const double gain = link[c] - scale * tot[c];
                if (gain > best_gain + kEps) {
                    best = c;
                    best_gain = gain;
                }
            }
            tot[best] += k;
            for (std::size_t c : touched) link[c] = 0.0;
            if (best != own) {
                comm[i] = best;
                moved = true;
            }
        }
        if (!moved) break;
        any_move = true;
    }
    return any_move;
}

// Relabels communities densely in order of first appearance; returns the count.
std::size_t relabel(std::vector<std::size_t>& comm) {
    std::unordered_map<std::size_t, std::size_t> map;
    for (auto& c : comm) {
        auto [it, inserted] = map.emplace(c, map.size());
        c = it->second;
    }
    return map.size();
}

WorkGraph aggregate(const WorkGraph& g, const std::vector<std::size_t>& comm, std::size_t count) {
    WorkGraph out;
    out.adj.resize(count);
    out.self.assign(count, 0.0);
    out.degree.assign(count, 0.0);
    out.m = g.m;
    std::vector<std::map<std::size_t, double>> links(count);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t ci = comm[i];
        out.self[ci] += g.self[i];
        out.degree[ci] += g.degree[i];
        for (const auto& [j, w] : g.adj[i]) {
            if (i >= j) continue;
            const std::size_t cj = comm[j];
            if (ci == cj)
                out.self[ci] += w;
            else {
                links[ci][cj] += w;
                links[cj][ci] += w;
            }
        }
    }
    for (std::size_t c = 0; c < count; ++c) out.adj[c].assign(links[c].begin(), links[c].end());
    return out;
}

// Dense ids ordered by size descending, then smallest member node.
Partition canonical(const std::vector<std::size_t>& raw) {
    const std::size_t c = raw.empty() ? 0 : *std::max_element(raw.begin(), raw.end()) + 1;
    std::vector<std::size_t> size(c, 0), min_node(c, raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        ++size[raw[i]];
        min_node[raw[i]] = std::min(min_node[raw[i]], i);
    }
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < c; ++k)
        if (size[k] > 0) ids.push_back(k);
    std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
        if (size[a] != size[b]) return size[a] > size[b];
        return min_node[a] < min_node[b];
    });
    std::vector<std::size_t> rank(c, 0);
    for (std::size_t r = 0; r < ids.size(); ++r) rank[ids[r]] = r;
    Partition p;
    p.assignment.reserve(raw.size());
    for (std::size_t x : raw) p.assignment.push_back(rank[x]);
    return p;
}

}  // namespace

UndirectedGraph to_undirected(const BipartiteGraph& graph, bool weighted) {
    UndirectedGraph g;
    g.node_count = graph.node_count();
    g.edges.reserve(graph.edges().size());
    for (const auto& e : graph.edges())
        g.edges.push_back({e.user, graph.news_node(e.news), weighted ? static_cast<double>(e.weight) : 1.0});
    return g;
}

double modularity(const UndirectedGraph& graph, const Partition& partition, double resolution) {
    if (partition.assignment.size() != graph.node_count)
        throw IntegrityError("partition covers " + std::to_string(partition.assignment.size()) + " nodes, graph has " +
                             std::to_string(graph.node_count));
    if (graph.edges.empty()) throw DomainError("modularity is undefined on an edgeless graph");
    return work_modularity(to_work_graph(graph), partition.assignment, resolution);
}

double modularity(const BipartiteGraph& graph, const Partition& partition, double resolution) {
    check_cover(graph, partition);
    return modularity(to_undirected(graph, true), partition, resolution);
}

LouvainResult louvain_detailed(const UndirectedGraph& graph, std::uint64_t seed, const LouvainOptions& options) {
    if (graph.edges.empty()) throw DomainError("community detection needs at least one edge");
    if (!(options.resolution > 0.0)) throw ConfigError("resolution must be positive");

    Rng rng = make_rng(seed, {tag(Stream::Louvain)});
    WorkGraph level = to_work_graph(graph);
    std::vector<std::size_t> node_comm(graph.node_count);
    std::iota(node_comm.begin(), node_comm.end(), 0);

    LouvainResult out;
    out.modularity_trace.push_back(work_modularity(level, node_comm, options.resolution));
    while (true) {
        std::vector<std::size_t> comm(level.size());
        std::iota(comm.begin(), comm.end(), 0);
        if (!local_moves(level, comm, options.resolution, rng)) break;
        const std::size_t count = relabel(comm);
        for (auto& c : node_comm) c = comm[c];
        level = aggregate(level, comm, count);
        std::vector<std::size_t> identity(count);
        std::iota(identity.begin(), identity.end(), 0);
        out.modularity_trace.push_back(work_modularity(level, identity, options.resolution));
        if (count == 1) break;
    }
    out.partition = canonical(node_comm);
    return out;
}

LouvainResult louvain_detailed(const BipartiteGraph& graph, std::uint64_t seed, const LouvainOptions& options) {
    if (graph.edges().empty()) throw DomainError("community detection needs at least one edge");
    return louvain_detailed(to_undirected(graph, options.weighted), seed, options);
}

Partition louvain(const BipartiteGraph& graph, std::uint64_t seed, double resolution) {
    return louvain_detailed(graph, seed, LouvainOptions{resolution, true}).partition;
}

CommunityStats community_stats(const BipartiteGraph& graph, const Partition& partition) {
    check_cover(graph, partition);
    CommunityStats stats;
    stats.communities.resize(partition.community_count());
    stats.edge_count = graph.edges().size();
    stats.user_count = graph.user_count();
    stats.news_count = graph.news_count();
    for (std::size_t u = 0; u < graph.user_count(); ++u) ++stats.communities[partition.assignment[u]].users;
    for (std::size_t n = 0; n < graph.news_count(); ++n)
        ++stats.communities[partition.assignment[graph.news_node(n)]].news;
    for (const auto& e : graph.edges()) {
        const std::size_t a = partition.assignment[e.user];
        const std::size_t b = partition.assignment[graph.news_node(e.news)];
        if (a == b) {
            ++stats.communities[a].internal_edges;
        } else {
            ++stats.communities[a].external_edges;
            ++stats.communities[b].external_edges;
        }
    }
    return stats;
}

std::vector<std::string> export_edges(const BipartiteGraph& graph) {
    std::vector<std::string> lines;
    lines.reserve(graph.edges().size());
    for (const auto& e : graph.edges())
        lines.push_back(graph.user_nodes()[e.user] + '\t' + graph.news_nodes()[e.news] + '\t' +
                        std::to_string(e.weight));
    return lines;
}

std::vector<std::string> export_partition(const BipartiteGraph& graph, const Partition& partition) {
    check_cover(graph, partition);
    std::vector<std::string> lines;
    lines.reserve(graph.node_count());
    for (std::size_t u = 0; u < graph.user_count(); ++u)
        lines.push_back(graph.user_nodes()[u] + '\t' + std::to_string(partition.assignment[u]));
    for (std::size_t n = 0; n < graph.news_count(); ++n)
        lines.push_back(graph.news_nodes()[n] + '\t' + std::to_string(partition.assignment[graph.news_node(n)]));
    return lines;
}

}  // namespace cocoon
