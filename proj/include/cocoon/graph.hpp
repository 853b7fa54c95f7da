#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cocoon/corpus.hpp"

namespace cocoon {

struct Edge {
    std::size_t user;  // index into user_nodes
    std::size_t news;  // index into news_nodes
    std::uint32_t weight = 1;

    bool operator==(const Edge&) const = default;
};

// User-news interaction graph. Nodes are indexed users first, then news:
// node(user u) = u, node(news n) = user_count() + n.
class BipartiteGraph {
public:
    BipartiteGraph() = default;
    // Edges must reference valid indices; duplicate pairs are merged by summing weights.
    BipartiteGraph(std::vector<std::string> user_nodes, std::vector<std::string> news_nodes,
                   std::vector<Edge> edges);

    const std::vector<std::string>& user_nodes() const { return user_nodes_; }
    const std::vector<std::string>& news_nodes() const { return news_nodes_; }
    // Sorted by (user, news).
    const std::vector<Edge>& edges() const { return edges_; }

    std::size_t user_count() const { return user_nodes_.size(); }
    std::size_t news_count() const { return news_nodes_.size(); }
    std::size_t node_count() const { return user_count() + news_count(); }
    std::size_t news_node(std::size_t news) const { return user_count() + news; }
    double total_weight() const;

    bool operator==(const BipartiteGraph&) const = default;

private:
    std::vector<std::string> user_nodes_;
    std::vector<std::string> news_nodes_;
    std::vector<Edge> edges_;
};

// Edge (u, n) weighted by how often n occurs in u's history. Every corpus user and news
// item becomes a node, isolated or not. Throws IntegrityError on unknown news.
BipartiteGraph build_graph(const Corpus& corpus);
BipartiteGraph build_graph(const std::vector<std::string>& user_ids,
                           const std::vector<std::vector<std::string>>& histories,
                           const std::vector<std::string>& news_ids);

// Community of every node, in node order; ids dense from 0.
struct Partition {
    std::vector<std::size_t> assignment;

    std::size_t community_count() const;
    bool operator==(const Partition&) const = default;
};

// General undirected weighted graph; the bipartite graph is one special case.
struct WeightedEdge {
    std::size_t a = 0;
    std::size_t b = 0;  // a == b is a self-loop
    double weight = 1.0;
};

struct UndirectedGraph {
    std::size_t node_count = 0;
    std::vector<WeightedEdge> edges;
};

// Users first, then news. weighted=false gives every edge weight 1.
UndirectedGraph to_undirected(const BipartiteGraph& graph, bool weighted = true);

// Newman modularity of the graph viewed as an undirected weighted graph.
// Throws DomainError on an edgeless graph, IntegrityError if the partition does not cover it.
double modularity(const BipartiteGraph& graph, const Partition& partition, double resolution = 1.0);

struct LouvainOptions {
    double resolution = 1.0;
    bool weighted = true;  // false: every edge counts 1 regardless of click multiplicity
};

struct LouvainResult {
    Partition partition;
    // Modularity after each aggregation level.
    std::vector<double> modularity_trace;
};

LouvainResult louvain_detailed(const BipartiteGraph& graph, std::uint64_t seed,
                               const LouvainOptions& options = {});

double modularity(const UndirectedGraph& graph, const Partition& partition, double resolution = 1.0);
// options.weighted is ignored here: the edge weights are used as given.
LouvainResult louvain_detailed(const UndirectedGraph& graph, std::uint64_t seed, const LouvainOptions& options = {});
Partition louvain(const BipartiteGraph& graph, std::uint64_t seed, double resolution = 1.0);

struct CommunityTally {
    std::size_t users = 0;
    std::size_t news = 0;
    std::size_t internal_edges = 0;
    std::size_t external_edges = 0;

    bool operator==(const CommunityTally&) const = default;
};

// Per-community counts over distinct user-news pairs (weights ignored).
struct CommunityStats {
    std::vector<CommunityTally> communities;
    std::size_t edge_count = 0;
    std::size_t user_count = 0;
    std::size_t news_count = 0;
};

CommunityStats community_stats(const BipartiteGraph& graph, const Partition& partition);

// "user<TAB>news<TAB>weight" lines and "node<TAB>community" lines.
std::vector<std::string> export_edges(const BipartiteGraph& graph);
std::vector<std::string> export_partition(const BipartiteGraph& graph, const Partition& partition);

}  // namespace cocoon
