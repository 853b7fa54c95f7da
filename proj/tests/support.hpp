#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cocoon/corpus.hpp"
#include "cocoon/graph.hpp"

namespace testing {

// Fresh empty directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cocoon_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

inline cocoon::NewsItem news(const std::string& id, const std::string& cat, const std::string& sub = "") {
    return {id, cat, sub.empty() ? cat + "_s" : sub, {}, {}};
}

// Dense symmetric adjacency of the bipartite graph, node order users then news.
inline std::vector<std::vector<double>> adjacency(const cocoon::BipartiteGraph& g) {
    const std::size_t n = g.node_count();
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (const auto& e : g.edges()) {
        const std::size_t u = e.user, v = g.news_node(e.news);
        a[u][v] += e.weight;
        a[v][u] += e.weight;
    }
    return a;
}

// Q = (1/2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j), straight from the definition.
inline double naive_modularity(const std::vector<std::vector<double>>& a, const std::vector<std::size_t>& labels) {
    const std::size_t n = a.size();
    std::vector<double> k(n, 0.0);
    double two_m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            k[i] += a[i][j];
            two_m += a[i][j];
        }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (labels[i] == labels[j]) q += a[i][j] - k[i] * k[j] / two_m;
    return q / two_m;
}

// Every set partition of n nodes as restricted growth strings.
inline void for_each_partition(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& visit) {
    std::vector<std::size_t> labels(n, 0), max_prefix(n, 0);
    while (true) {
        visit(labels);
        std::size_t i = n;
        while (i > 1) {
            --i;
            if (labels[i] <= max_prefix[i - 1]) {
                ++labels[i];
                const std::size_t m = std::max(max_prefix[i - 1], labels[i]);
                max_prefix[i] = m;
                for (std::size_t j = i + 1; j < n; ++j) {
                    labels[j] = 0;
                    max_prefix[j] = m;
                }
                goto next;
            }
        }
        return;
    next:;
    }
}

// Exhaustive optimum; sums per community instead of the O(n^2) double loop.
inline double best_modularity(const cocoon::BipartiteGraph& g) {
    const std::size_t n = g.node_count();
    std::vector<double> degree(n, 0.0);
    double m = 0.0;
    for (const auto& e : g.edges()) {
        degree[e.user] += e.weight;
        degree[g.news_node(e.news)] += e.weight;
        m += e.weight;
    }
    std::vector<double> in(n), tot(n);
    double best = -1.0;
    for_each_partition(n, [&](const std::vector<std::size_t>& labels) {
        std::fill(in.begin(), in.end(), 0.0);
        std::fill(tot.begin(), tot.end(), 0.0);
        for (const auto& e : g.edges())
            if (labels[e.user] == labels[g.news_node(e.news)]) in[labels[e.user]] += e.weight;
        for (std::size_t i = 0; i < n; ++i) tot[labels[i]] += degree[i];
        double q = 0.0;
        for (std::size_t c = 0; c < n; ++c) q += in[c] / m - (tot[c] / (2.0 * m)) * (tot[c] / (2.0 * m));
        best = std::max(best, q);
    });
    return best;
}

// Central difference of f at x along coordinate i.
inline double central_diff(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                           std::size_t i, double h = 1e-5) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    return (fp - fm) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / scale;
}

// Upper tail of the chi-square law for an even number of degrees of freedom.
inline double chi_square_sf_even(double x, std::size_t dof) {
    const double half = x / 2.0;
    double term = 1.0, sum = 1.0;
    for (std::size_t i = 1; i < dof / 2; ++i) {
        term *= half / static_cast<double>(i);
        sum += term;
    }
    return std::exp(-half) * sum;
}

}  // namespace testing
