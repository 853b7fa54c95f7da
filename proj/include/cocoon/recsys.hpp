#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "cocoon/corpus.hpp"

namespace cocoon {

// Dense row-major matrix keyed by entity id.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim);
    EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim, std::vector<double> values);

    std::size_t rows() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<double>& values() const { return values_; }

    std::optional<std::size_t> find(std::string_view id) const;
    // Throws LookupError.
    std::size_t index(std::string_view id) const;

    std::span<double> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

    bool operator==(const EmbeddingMatrix& o) const {
        return ids_ == o.ids_ && dim_ == o.dim_ && values_ == o.values_;
    }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

// Sorted (term, weight) pairs.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

// Title term-frequency cosine between the user's mean history vector and the item.
struct ContentCosine {
    std::vector<std::string> vocabulary;
    std::unordered_map<std::string, SparseVector> item_vectors;

    static ContentCosine from_corpus(const Corpus& corpus);
    bool operator==(const ContentCosine&) const = default;
};

struct MatrixFactorization {
    EmbeddingMatrix user_emb;
    EmbeddingMatrix item_emb;
    bool operator==(const MatrixFactorization&) const = default;
};

// Candidate-queried attention over the full history (long-term) and over the last
// short_window items (short-term), blended 0.5/0.5.
struct DualAttention {
    EmbeddingMatrix item_emb;
    std::size_t short_window = 5;
    double temperature = 1.0;
    bool operator==(const DualAttention&) const = default;
};

enum class ModelKind { ContentCosine, MatrixFactorization, DualAttention };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct RecommenderModel {
    std::variant<ContentCosine, MatrixFactorization, DualAttention> variant;

    ModelKind kind() const { return static_cast<ModelKind>(variant.index()); }
    bool operator==(const RecommenderModel&) const = default;
};

// Throws LookupError for unknown items; DomainError for DualAttention with empty history.
double score(const RecommenderModel& model, const UserProfile& user, std::string_view item_id);

// Scores many items for one user, sharing the per-user work.
std::vector<double> score_items(const RecommenderModel& model, const UserProfile& user,
                                std::span<const std::string> item_ids);

struct RankedItem {
    std::string id;
    double score = 0.0;
    bool operator==(const RankedItem&) const = default;
};

// Descending score, ties by ascending id; length min(k, ids.size()).
std::vector<RankedItem> rank_scored(std::span<const std::string> ids, std::span<const double> scores,
                                    std::size_t k);

std::vector<RankedItem> top_k(const RecommenderModel& model, const UserProfile& user,
                              std::span<const std::string> candidates, std::size_t k);

// Attention weights and pooled vector for one query over a set of rows.
struct Attention {
    std::vector<double> weights;
    std::vector<double> pooled;
};

Attention attend(std::span<const std::span<const double>> rows, std::span<const double> query,
                 double temperature);

// Diversity regularizer over one recommendation list: lambda * sum_{i<j} cos(e_i, e_j).
double cdr_penalty(std::span<const std::vector<double>> embeddings, double lambda);

struct PenaltyGradient {
    double value = 0.0;
    std::vector<std::vector<double>> grads;
};

PenaltyGradient cdr_penalty_grad(std::span<const std::vector<double>> embeddings, double lambda);

// mu * KL(a_long || a_short), natural log.
double ltao_penalty(std::span<const double> a_long, std::span<const double> a_short, double mu);

// The same penalty with both distributions given as softmax logits, plus gradients w.r.t.
// those logits.
struct LtaoLogitGradient {
    double value = 0.0;
    std::vector<double> grad_long;
    std::vector<double> grad_short;
};

LtaoLogitGradient ltao_penalty_logits(std::span<const double> long_logits,
                                      std::span<const double> short_logits, double mu);

std::vector<double> softmax(std::span<const double> logits);

struct ModelSpec {
    ModelKind kind = ModelKind::MatrixFactorization;
    std::size_t dim = 16;
    double init_scale = 0.1;
    std::size_t short_window = 5;
    double temperature = 1.0;
};

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 1;
    double learning_rate = 1e-4;
    double l2 = 1e-4;
    std::size_t negatives_per_positive = 1;
    double cdr_lambda = 0.0;
    double ltao_mu = 0.0;
    // List length whose embeddings the diversity regularizer sees.
    std::size_t cdr_top_k = 20;
    std::uint64_t seed = 42;

    void validate() const;
};

// Interaction data a model is fitted on. History entries are positives with
// uniformly drawn negatives; impression clicks are positives with negatives drawn
// from the impression's non-clicked candidates.
struct TrainingData {
    std::vector<std::string> news_ids;
    std::vector<UserProfile> users;
    std::vector<Impression> impressions;

    static TrainingData from_corpus(const Corpus& corpus);
};

struct EpochLoss {
    double bpr = 0.0;  // mean pairwise logistic loss
    double l2 = 0.0;
    double cdr = 0.0;
    double ltao = 0.0;
    double total() const { return bpr + l2 + cdr + ltao; }
};

struct TrainResult {
    RecommenderModel model;
    std::vector<EpochLoss> trace;
};

RecommenderModel init_model(const TrainingData& data, const ModelSpec& spec, std::uint64_t seed);

// Throws EmptyInputError without clicks, ConfigError for ContentCosine,
// DivergenceError on non-finite loss.
TrainResult train(const TrainingData& data, const ModelSpec& spec, const TrainConfig& cfg);

// Continues SGD from an existing model (rows for unseen ids are added at zero).
TrainResult fine_tune(RecommenderModel model, const TrainingData& data, const TrainConfig& cfg);

void save_checkpoint(const RecommenderModel& model, const std::string& path);
RecommenderModel load_checkpoint(const std::string& path);

}  // namespace cocoon
