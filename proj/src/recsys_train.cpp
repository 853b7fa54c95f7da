#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "cocoon/errors.hpp"
#include "cocoon/recsys.hpp"
#include "cocoon/recsys_detail.hpp"
#include "cocoon/rng.hpp"

namespace cocoon {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (negatives_per_positive < 1) throw ConfigError("negatives_per_positive must be >= 1");
    if (cdr_top_k < 2) throw ConfigError("cdr_top_k must be >= 2");
    for (double v : {learning_rate, l2, cdr_lambda, ltao_mu})
        if (!std::isfinite(v) || v < 0.0) throw ConfigError("training rates must be finite and >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

TrainingData TrainingData::from_corpus(const Corpus& corpus) {
    TrainingData d;
    for (const auto& n : corpus.news()) d.news_ids.push_back(n.id);
    d.users = corpus.users();
    d.impressions = corpus.impressions();
    return d;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Example {
    std::size_t user;
    std::size_t positive;
    // Non-clicked candidates of the source impression; empty means draw uniformly.
    std::vector<std::size_t> negative_pool;
};

// Sparse gradient accumulator for one parameter matrix.
class Grad {
public:
    explicit Grad(std::size_t dim) : dim_(dim) {}

    std::vector<double>& at(std::size_t row) {
        auto [it, inserted] = rows_.try_emplace(row);
        if (inserted) it->second.assign(dim_, 0.0);
        return it->second;
    }

    void apply(EmbeddingMatrix& m, double lr) {
        for (auto& [row, g] : rows_) {
            auto r = m.row(row);
            for (std::size_t i = 0; i < dim_; ++i) r[i] -= lr * g[i];
        }
        rows_.clear();
    }

private:
    std::size_t dim_;
    std::unordered_map<std::size_t, std::vector<double>> rows_;
};

void add_scaled(std::vector<double>& g, std::span<const double> v, double c) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * v[i];
}

double squared_norm(const EmbeddingMatrix& m) { return dot(m.values(), m.values()); }

// Training state shared by both trainable variants.
class Trainer {
public:
    Trainer(RecommenderModel& model, const TrainingData& data, const TrainConfig& cfg)
        : model_(model), data_(data), cfg_(cfg) {
        auto& items = item_matrix();
        news_rows_.reserve(data.news_ids.size());
        for (const auto& id : data.news_ids) news_rows_.push_back(items.index(id));
        std::unordered_map<std::string, std::size_t> user_slot;
        for (std::size_t u = 0; u < data.users.size(); ++u) user_slot.emplace(data.users[u].id, u);

        histories_.resize(data.users.size());
        for (std::size_t u = 0; u < data.users.size(); ++u) {
            for (const auto& h : data.users[u].history) histories_[u].push_back(items.index(h));
            for (std::size_t h : histories_[u]) examples_.push_back({u, h, {}});
        }
        for (const auto& imp : data.impressions) {
            auto it = user_slot.find(imp.user_id);
            if (it == user_slot.end()) throw IntegrityError("impression for unknown user '" + imp.user_id + "'");
            std::vector<std::size_t> pool;
            for (const auto& c : imp.candidates)
                if (std::find(imp.clicks.begin(), imp.clicks.end(), c) == imp.clicks.end())
                    pool.push_back(items.index(c));
            for (const auto& c : imp.clicks) {
                examples_.push_back({it->second, items.index(c), pool});
                ++clicks_;
            }
        }
        if (auto* mf = std::get_if<MatrixFactorization>(&model_.variant)) {
            user_rows_.reserve(data.users.size());
            for (const auto& u : data.users) user_rows_.push_back(mf->user_emb.index(u.id));
        }
    }

    std::size_t clicks() const { return clicks_; }

    std::vector<EpochLoss> run(std::size_t epochs, std::uint64_t stream) {
        std::vector<EpochLoss> trace;
        for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
            Rng rng = make_rng(cfg_.seed, {stream, epoch});
            EpochLoss loss;
            std::vector<std::vector<std::size_t>> frozen_lists;
            if (cfg_.cdr_lambda > 0.0) frozen_lists = current_top_lists();

            std::vector<std::size_t> order(examples_.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[uniform_index(rng, i)]);

            std::size_t pairs = 0;
            std::size_t in_batch = 0;
            for (std::size_t idx : order) {
                const Example& ex = examples_[idx];
                for (std::size_t n = 0; n < cfg_.negatives_per_positive; ++n) {
                    const auto neg = draw_negative(ex, rng);
                    if (!neg) continue;
                    loss.bpr += pair_step(ex, *neg);
                    ++pairs;
                }
                if (is_dual()) loss.ltao += alignment_step(ex);
                if (++in_batch == cfg_.batch_size) {
                    flush();
                    in_batch = 0;
                }
            }
            flush();
            if (pairs > 0) loss.bpr /= static_cast<double>(pairs);
            if (!examples_.empty()) loss.ltao /= static_cast<double>(examples_.size());

            if (!frozen_lists.empty()) loss.cdr = diversity_step(frozen_lists);
            loss.l2 = cfg_.l2 * parameter_norm();

            if (!std::isfinite(loss.total())) throw DivergenceError(epoch, "training loss is not finite");
            trace.push_back(loss);
        }
        return trace;
    }

private:
    bool is_dual() const { return std::holds_alternative<DualAttention>(model_.variant); }

    EmbeddingMatrix& item_matrix() {
        if (auto* mf = std::get_if<MatrixFactorization>(&model_.variant)) return mf->item_emb;
        return std::get<DualAttention>(model_.variant).item_emb;
    }

    double parameter_norm() {
        if (auto* mf = std::get_if<MatrixFactorization>(&model_.variant))
            return squared_norm(mf->user_emb) + squared_norm(mf->item_emb);
        return squared_norm(item_matrix());
    }

    std::optional<std::size_t> draw_negative(const Example& ex, Rng& rng) const {
        if (!ex.negative_pool.empty()) return ex.negative_pool[uniform_index(rng, ex.negative_pool.size())];
        if (news_rows_.size() < 2) return std::nullopt;
        const auto& hist = histories_[ex.user];
        for (int attempt = 0; attempt < 16; ++attempt) {
            const std::size_t j = news_rows_[uniform_index(rng, news_rows_.size())];
            if (j == ex.positive) continue;
            if (attempt < 8 && std::find(hist.begin(), hist.end(), j) != hist.end()) continue;
            return j;
        }
        return std::nullopt;
    }

    // History of the example's user without the positive item (leave-one-out context).
    std::vector<std::size_t> context(const Example& ex) const {
        std::vector<std::size_t> ctx;
        for (std::size_t h : histories_[ex.user])
            if (h != ex.positive) ctx.push_back(h);
        return ctx;
    }

    double pair_step(const Example& ex, std::size_t neg) {
        if (auto* mf = std::get_if<MatrixFactorization>(&model_.variant)) {
            const std::size_t u = user_rows_[ex.user];
            const auto urow = mf->user_emb.row(u);
            const auto prow = mf->item_emb.row(ex.positive);
            const auto nrow = mf->item_emb.row(neg);
            const double x = dot(urow, prow) - dot(urow, nrow);
            const double g = -sigmoid(-x);
            auto& gu = user_grad_.at(u);
            auto& gp = item_grad_.at(ex.positive);
            for (std::size_t i = 0; i < gu.size(); ++i) {
                gu[i] += g * (prow[i] - nrow[i]) + 2.0 * cfg_.l2 * urow[i];
                gp[i] += g * urow[i] + 2.0 * cfg_.l2 * prow[i];
            }
            auto& gn = item_grad_.at(neg);
            for (std::size_t i = 0; i < gn.size(); ++i) gn[i] += -g * urow[i] + 2.0 * cfg_.l2 * nrow[i];
            return softplus(-x);
        }

        auto& m = std::get<DualAttention>(model_.variant);
        const auto ctx = context(ex);
        if (ctx.empty()) return std::log(2.0);
        std::vector<std::span<const double>> rows;
        for (std::size_t h : ctx) rows.push_back(m.item_emb.row(h));
        const auto pos = detail::dual_attention_score_grad(rows, m.item_emb.row(ex.positive),
                                                           m.short_window, m.temperature);
        const auto negs = detail::dual_attention_score_grad(rows, m.item_emb.row(neg), m.short_window,
                                                            m.temperature);
        const double x = pos.score - negs.score;
        const double g = -sigmoid(-x);
        add_scaled(item_grad_.at(ex.positive), pos.grad_query, g);
        add_scaled(item_grad_.at(ex.positive), m.item_emb.row(ex.positive), 2.0 * cfg_.l2);
        add_scaled(item_grad_.at(neg), negs.grad_query, -g);
        add_scaled(item_grad_.at(neg), m.item_emb.row(neg), 2.0 * cfg_.l2);
        for (std::size_t k = 0; k < ctx.size(); ++k) {
            auto& gh = item_grad_.at(ctx[k]);
            for (std::size_t i = 0; i < gh.size(); ++i) gh[i] += g * (pos.grad_rows[k][i] - negs.grad_rows[k][i]);
        }
        return softplus(-x);
    }

    double alignment_step(const Example& ex) {
        if (cfg_.ltao_mu == 0.0) return 0.0;
        auto& m = std::get<DualAttention>(model_.variant);
        const auto ctx = context(ex);
        if (ctx.empty()) return 0.0;
        std::vector<std::span<const double>> rows;
        for (std::size_t h : ctx) rows.push_back(m.item_emb.row(h));
        const auto al = detail::attention_alignment_grad(rows, m.item_emb.row(ex.positive), m.short_window,
                                                         m.temperature, cfg_.ltao_mu);
        add_scaled(item_grad_.at(ex.positive), al.grad_query, 1.0);
        for (std::size_t k = 0; k < ctx.size(); ++k) add_scaled(item_grad_.at(ctx[k]), al.grad_rows[k], 1.0);
        return al.value;
    }

    void flush() {
        if (auto* mf = std::get_if<MatrixFactorization>(&model_.variant)) user_grad_.apply(mf->user_emb, cfg_.learning_rate);
        item_grad_.apply(item_matrix(), cfg_.learning_rate);
    }

    // Top-K rows per user over items outside the history, frozen for one epoch.
    std::vector<std::vector<std::size_t>> current_top_lists() {
        const auto& items = item_matrix();
        std::vector<std::vector<std::size_t>> lists(data_.users.size());
        for (std::size_t u = 0; u < data_.users.size(); ++u) {
            const auto& user = data_.users[u];
            if (is_dual() && user.history.empty()) continue;
            std::unordered_set<std::string> seen(user.history.begin(), user.history.end());
            std::vector<std::string> candidates;
            for (const auto& id : data_.news_ids)
                if (!seen.count(id)) candidates.push_back(id);
            if (candidates.size() < 2) continue;
            for (const auto& r : top_k(model_, user, candidates, cfg_.cdr_top_k))
                lists[u].push_back(items.index(r.id));
        }
        return lists;
    }

    double diversity_step(const std::vector<std::vector<std::size_t>>& lists) {
        auto& items = item_matrix();
        double total = 0.0;
        std::size_t counted = 0;
        for (const auto& list : lists) {
            if (list.size() < 2) continue;
            std::vector<std::vector<double>> emb;
            bool degenerate = false;
            for (std::size_t r : list) {
                const auto row = items.row(r);
                emb.emplace_back(row.begin(), row.end());
                degenerate = degenerate || dot(row, row) == 0.0;
            }
            if (degenerate) continue;
            const auto pg = cdr_penalty_grad(emb, cfg_.cdr_lambda);
            for (std::size_t k = 0; k < list.size(); ++k) add_scaled(item_grad_.at(list[k]), pg.grads[k], 1.0);
            item_grad_.apply(items, cfg_.learning_rate);
            total += pg.value;
            ++counted;
        }
        return counted ? total / static_cast<double>(counted) : 0.0;
    }

    RecommenderModel& model_;
    const TrainingData& data_;
    const TrainConfig& cfg_;
    std::vector<std::size_t> news_rows_;
    std::vector<std::size_t> user_rows_;
    std::vector<std::vector<std::size_t>> histories_;
    std::vector<Example> examples_;
    std::size_t clicks_ = 0;
    Grad user_grad_{user_dim()};
    Grad item_grad_{item_matrix().dim()};

    std::size_t user_dim() {
        if (auto* mf = std::get_if<MatrixFactorization>(&model_.variant)) return mf->user_emb.dim();
        return 1;
    }
};

EmbeddingMatrix random_matrix(std::vector<std::string> ids, std::size_t dim, double scale, Rng& rng) {
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<double> values(ids.size() * dim);
    for (auto& v : values) v = normal(rng);
    return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

// Adds zero rows for ids the matrix does not know yet.
EmbeddingMatrix extend_rows(const EmbeddingMatrix& m, const std::vector<std::string>& ids) {
    std::vector<std::string> all = m.ids();
    std::vector<double> values = m.values();
    for (const auto& id : ids) {
        if (m.find(id)) continue;
        if (std::find(all.begin() + static_cast<std::ptrdiff_t>(m.rows()), all.end(), id) != all.end()) continue;
        all.push_back(id);
        values.resize(values.size() + m.dim(), 0.0);
    }
    return EmbeddingMatrix(std::move(all), m.dim(), std::move(values));
}

bool has_clicks(const TrainingData& data) {
    for (const auto& imp : data.impressions)
        if (!imp.clicks.empty()) return true;
    return false;
}

}  // namespace

RecommenderModel init_model(const TrainingData& data, const ModelSpec& spec, std::uint64_t seed) {
    if (spec.dim < 1) throw ConfigError("embedding dimension must be >= 1");
    Rng rng = make_rng(seed, {tag(Stream::TrainInit)});
    switch (spec.kind) {
        case ModelKind::ContentCosine:
            throw ConfigError("content_cosine is built from a corpus, not trained");
        case ModelKind::MatrixFactorization: {
            std::vector<std::string> users;
            for (const auto& u : data.users) users.push_back(u.id);
            auto user_emb = random_matrix(std::move(users), spec.dim, spec.init_scale, rng);
            auto item_emb = random_matrix(data.news_ids, spec.dim, spec.init_scale, rng);
            return {MatrixFactorization{std::move(user_emb), std::move(item_emb)}};
        }
        case ModelKind::DualAttention:
            if (spec.short_window < 1) throw ConfigError("short_window must be >= 1");
            if (!(spec.temperature > 0.0)) throw ConfigError("temperature must be positive");
            return {DualAttention{random_matrix(data.news_ids, spec.dim, spec.init_scale, rng),
                                  spec.short_window, spec.temperature}};
    }
    throw ConfigError("unknown model kind");
}

TrainResult train(const TrainingData& data, const ModelSpec& spec, const TrainConfig& cfg) {
    cfg.validate();
    if (spec.kind == ModelKind::ContentCosine)
        throw ConfigError("content_cosine has no trainable parameters");
    if (!has_clicks(data)) throw EmptyInputError("training needs at least one impression with a click");
    TrainResult out{init_model(data, spec, cfg.seed), {}};
    Trainer trainer(out.model, data, cfg);
    out.trace = trainer.run(cfg.epochs, tag(Stream::TrainEpoch));
    return out;
}

TrainResult fine_tune(RecommenderModel model, const TrainingData& data, const TrainConfig& cfg) {
    cfg.validate();
    if (model.kind() == ModelKind::ContentCosine)
        throw ConfigError("content_cosine has no trainable parameters");
    if (!has_clicks(data)) throw EmptyInputError("training needs at least one impression with a click");
    if (auto* mf = std::get_if<MatrixFactorization>(&model.variant)) {
        std::vector<std::string> users;
        for (const auto& u : data.users) users.push_back(u.id);
        mf->user_emb = extend_rows(mf->user_emb, users);
        mf->item_emb = extend_rows(mf->item_emb, data.news_ids);
    } else {
        auto& da = std::get<DualAttention>(model.variant);
        da.item_emb = extend_rows(da.item_emb, data.news_ids);
    }
    TrainResult out{std::move(model), {}};
    Trainer trainer(out.model, data, cfg);
    out.trace = trainer.run(cfg.epochs, tag(Stream::Retrain));
    return out;
}

}  // namespace cocoon
