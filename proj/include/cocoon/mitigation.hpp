#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cocoon/recsys.hpp"

namespace cocoon {

enum class StrategyKind { None, EGS, CDR, LTAO, CCR, CPF };

const char* to_string(StrategyKind kind);
StrategyKind parse_strategy_kind(std::string_view text);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::None;
    double epsilon = 0.1;      // exploration probability (EGS)
    double lambda = 0.01;      // diversity regularizer weight (CDR, routed to training)
    double mu = 0.01;          // attention alignment weight (LTAO, routed to training)
    double gamma = 0.5;        // coverage bonus strength (CCR)
    double alpha = 0.3;        // community penalty weight (CPF)
    double temperature = 1.0;  // softmax temperature for EGS
    // CCR/CPF re-rank the top `rerank_depth` items by model score; 0 means all candidates.
    std::size_t rerank_depth = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ScoredCandidate {
    std::string item_id;
    double score = 0.0;
    std::size_t community = 0;
};

// K draws without replacement. Each draw explores uniformly over the remaining items with
// probability epsilon, otherwise samples from a softmax over their scores.
std::vector<std::string> egs_select(std::span<const ScoredCandidate> candidates, double epsilon, std::size_t k,
                                    std::uint64_t seed, double temperature = 1.0);

// Greedy coverage re-ranking with |R| = k: each step takes the item maximizing
// s + gamma * (1 - n_c / k), n_c counting already selected items of its community.
std::vector<std::string> ccr_rerank(std::span<const ScoredCandidate> candidates, double gamma, std::size_t k);

// s * (1 - alpha * n_c / list_size) for every candidate, with n_c counted in current_list.
std::vector<double> cpf_adjust(std::span<const ScoredCandidate> candidates, double alpha,
                               std::span<const std::size_t> current_list_communities, std::size_t list_size);

// Greedy selection by penalized score, recounting n_c after each pick.
std::vector<std::string> cpf_rerank(std::span<const ScoredCandidate> candidates, double alpha, std::size_t k);

using CommunityLookup = std::unordered_map<std::string, std::size_t>;

// Final top-k list under the configured strategy. CDR and LTAO only route to plain top-k
// (their effect lives in the trained model). Throws ConfigError when CCR/CPF lack a partition.
std::vector<std::string> apply_strategy(const StrategyConfig& cfg, const RecommenderModel& model,
                                        const UserProfile& user, std::span<const std::string> candidates,
                                        const CommunityLookup* communities, std::size_t k, std::uint64_t draw_seed);

}  // namespace cocoon
