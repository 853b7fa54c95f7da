#include "cocoon/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cocoon/errors.hpp"
#include "cocoon/rng.hpp"

namespace cocoon {

const char* to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::None: return "none";
        case StrategyKind::EGS: return "egs";
        case StrategyKind::CDR: return "cdr";
        case StrategyKind::LTAO: return "ltao";
        case StrategyKind::CCR: return "ccr";
        case StrategyKind::CPF: return "cpf";
    }
    return "?";
}

StrategyKind parse_strategy_kind(std::string_view text) {
    for (auto k : {StrategyKind::None, StrategyKind::EGS, StrategyKind::CDR, StrategyKind::LTAO, StrategyKind::CCR,
                   StrategyKind::CPF})
        if (text == to_string(k)) return k;
    throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

void StrategyConfig::validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    for (double v : {lambda, mu, gamma})
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("lambda, mu and gamma must be finite and >= 0");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
}

std::vector<std::string> egs_select(std::span<const ScoredCandidate> candidates, double epsilon, std::size_t k,
                                    std::uint64_t seed, double temperature) {
    if (k == 0) throw ConfigError("K must be >= 1");
    if (candidates.empty()) throw EmptyInputError("no candidates to select from");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");

    Rng rng = make_rng(seed, {tag(Stream::Strategy)});
    std::vector<std::size_t> remaining(candidates.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;
    std::vector<double> weights;
    std::vector<std::string> out;
    const std::size_t draws = std::min(k, candidates.size());
    out.reserve(draws);
    for (std::size_t d = 0; d < draws; ++d) {
        std::size_t pick;
        if (uniform01(rng) < epsilon) {
            pick = uniform_index(rng, remaining.size());
        } else {
            double mx = -INFINITY;
            for (std::size_t i : remaining) mx = std::max(mx, candidates[i].score / temperature);
            weights.clear();
            double total = 0.0;
            for (std::size_t i : remaining) {
                weights.push_back(std::exp(candidates[i].score / temperature - mx));
                total += weights.back();
            }
            double r = uniform01(rng) * total;
            pick = remaining.size() - 1;
            for (std::size_t j = 0; j < weights.size(); ++j) {
                if (r < weights[j]) {
                    pick = j;
                    break;
                }
                r -= weights[j];
            }
        }
        out.push_back(candidates[remaining[pick]].item_id);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

namespace {

// Shared greedy loop: adjusted(candidate, n_c) gives the score used at each step.
template <typename Adjust>
std::vector<std::string> greedy_select(std::span<const ScoredCandidate> candidates, std::size_t k, Adjust adjusted) {
    if (k == 0) throw ConfigError("K must be >= 1");
    if (candidates.empty()) throw EmptyInputError("no candidates to re-rank");
    std::vector<bool> taken(candidates.size(), false);
    std::map<std::size_t, std::size_t> per_community;
    std::vector<std::string> out;
    const std::size_t steps = std::min(k, candidates.size());
    out.reserve(steps);
    for (std::size_t step = 0; step < steps; ++step) {
        std::size_t best = candidates.size();
        double best_adj = 0.0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (taken[i]) continue;
            const auto& c = candidates[i];
            auto it = per_community.find(c.community);
            const double adj = adjusted(c, it == per_community.end() ? 0 : it->second);
            if (best == candidates.size()) {
                best = i;
                best_adj = adj;
                continue;
            }
            const auto& b = candidates[best];
            if (adj > best_adj || (adj == best_adj && (c.score > b.score || (c.score == b.score && c.item_id < b.item_id)))) {
                best = i;
                best_adj = adj;
            }
        }
        taken[best] = true;
        ++per_community[candidates[best].community];
        out.push_back(candidates[best].item_id);
    }
    return out;
}

}  // namespace

std::vector<std::string> ccr_rerank(std::span<const ScoredCandidate> candidates, double gamma, std::size_t k) {
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
    const double list = static_cast<double>(k);
    return greedy_select(candidates, k, [&](const ScoredCandidate& c, std::size_t n_c) {
        return c.score + gamma * (1.0 - static_cast<double>(n_c) / list);
    });
}

std::vector<double> cpf_adjust(std::span<const ScoredCandidate> candidates, double alpha,
                               std::span<const std::size_t> current_list_communities, std::size_t list_size) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (list_size == 0) throw ConfigError("list size must be >= 1");
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t c : current_list_communities) ++counts[c];
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        auto it = counts.find(c.community);
        const double share = it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(list_size);
        out.push_back(c.score * (1.0 - alpha * share));
    }
    return out;
}

std::vector<std::string> cpf_rerank(std::span<const ScoredCandidate> candidates, double alpha, std::size_t k) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    const double list = static_cast<double>(k);
    return greedy_select(candidates, k, [&](const ScoredCandidate& c, std::size_t n_c) {
        return c.score * (1.0 - alpha * static_cast<double>(n_c) / list);
    });
}

std::vector<std::string> apply_strategy(const StrategyConfig& cfg, const RecommenderModel& model,
                                        const UserProfile& user, std::span<const std::string> candidates,
                                        const CommunityLookup* communities, std::size_t k, std::uint64_t draw_seed) {
    if (k == 0) throw ConfigError("K must be >= 1");
    if (candidates.empty()) throw EmptyInputError("no candidates for user '" + user.id + "'");
    const bool needs_partition = cfg.kind == StrategyKind::CCR || cfg.kind == StrategyKind::CPF;
    if (needs_partition && communities == nullptr)
        throw ConfigError(std::string(to_string(cfg.kind)) + " needs a community partition");

    const auto scores = score_items(model, user, candidates);
    auto plain = [&](std::size_t depth) { return rank_scored(candidates, scores, depth); };

    switch (cfg.kind) {
        case StrategyKind::None:
        case StrategyKind::CDR:
        case StrategyKind::LTAO: {
            std::vector<std::string> out;
            for (auto& r : plain(k)) out.push_back(std::move(r.id));
            return out;
        }
        case StrategyKind::EGS: {
            std::vector<ScoredCandidate> pool;
            pool.reserve(candidates.size());
            for (std::size_t i = 0; i < candidates.size(); ++i) pool.push_back({candidates[i], scores[i], 0});
            return egs_select(pool, cfg.epsilon, k, draw_seed, cfg.temperature);
        }
        case StrategyKind::CCR:
        case StrategyKind::CPF: {
            const std::size_t depth = cfg.rerank_depth == 0 ? candidates.size() : std::max(cfg.rerank_depth, k);
            std::vector<ScoredCandidate> pool;
            for (auto& r : plain(depth)) {
                auto it = communities->find(r.id);
                if (it == communities->end()) throw LookupError("item '" + r.id + "' has no community");
                pool.push_back({std::move(r.id), r.score, it->second});
            }
            return cfg.kind == StrategyKind::CCR ? ccr_rerank(pool, cfg.gamma, k) : cpf_rerank(pool, cfg.alpha, k);
        }
    }
    throw ConfigError("unknown strategy");
}

}  // namespace cocoon
