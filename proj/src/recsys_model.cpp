#include <algorithm>
#include <cmath>
#include <map>

#include "cocoon/errors.hpp"
#include "cocoon/io.hpp"
#include "cocoon/recsys.hpp"
#include "json.hpp"

namespace cocoon {

using nlohmann::json;

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim)
    : EmbeddingMatrix(std::move(ids), dim, {}) {}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim,
                                 std::vector<double> values)
    : ids_(std::move(ids)), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
    if (values_.empty()) values_.assign(ids_.size() * dim_, 0.0);
    if (values_.size() != ids_.size() * dim_)
        throw IntegrityError("embedding matrix size does not match rows x dim");
    for (std::size_t i = 0; i < ids_.size(); ++i)
        if (!index_.emplace(ids_[i], i).second)
            throw DuplicateIdError("duplicate embedding row '" + ids_[i] + "'");
}

std::optional<std::size_t> EmbeddingMatrix::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t EmbeddingMatrix::index(std::string_view id) const {
    auto idx = find(id);
    if (!idx) throw LookupError("no embedding for '" + std::string(id) + "'");
    return *idx;
}

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::ContentCosine: return "content_cosine";
        case ModelKind::MatrixFactorization: return "mf";
        case ModelKind::DualAttention: return "dual_attention";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "content_cosine") return ModelKind::ContentCosine;
    if (text == "mf") return ModelKind::MatrixFactorization;
    if (text == "dual_attention") return ModelKind::DualAttention;
    throw ConfigError("unknown recommender kind '" + std::string(text) + "'");
}

ContentCosine ContentCosine::from_corpus(const Corpus& corpus) {
    ContentCosine out;
    std::map<std::string, std::uint32_t> vocab;
    for (const auto& n : corpus.news())
        for (const auto& t : n.title_tokens) vocab.emplace(t, 0);
    std::uint32_t next = 0;
    for (auto& [term, id] : vocab) {
        id = next++;
        out.vocabulary.push_back(term);
    }
    for (const auto& n : corpus.news()) {
        std::map<std::uint32_t, double> tf;
        for (const auto& t : n.title_tokens) tf[vocab.at(t)] += 1.0;
        out.item_vectors.emplace(n.id, SparseVector(tf.begin(), tf.end()));
    }
    return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sparse_dot(const SparseVector& a, const SparseVector& b) {
    double s = 0.0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (i->first < j->first)
            ++i;
        else if (j->first < i->first)
            ++j;
        else
            s += (i++)->second * (j++)->second;
    }
    return s;
}

const SparseVector& item_vector(const ContentCosine& m, std::string_view id) {
    auto it = m.item_vectors.find(std::string(id));
    if (it == m.item_vectors.end()) throw LookupError("unknown item '" + std::string(id) + "'");
    return it->second;
}

std::vector<double> score_content(const ContentCosine& m, const UserProfile& user,
                                  std::span<const std::string> ids) {
    std::map<std::uint32_t, double> acc;
    for (const auto& h : user.history)
        for (const auto& [t, w] : item_vector(m, h)) acc[t] += w;
    SparseVector profile;
    for (const auto& [t, w] : acc) profile.emplace_back(t, w / static_cast<double>(user.history.size()));
    const double pnorm = std::sqrt(sparse_dot(profile, profile));

    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto& v = item_vector(m, id);
        const double vnorm = std::sqrt(sparse_dot(v, v));
        out.push_back(pnorm == 0.0 || vnorm == 0.0 ? 0.0 : sparse_dot(profile, v) / (pnorm * vnorm));
    }
    return out;
}

std::vector<double> score_mf(const MatrixFactorization& m, const UserProfile& user,
                             std::span<const std::string> ids) {
    const auto urow = m.user_emb.find(user.id);
    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const std::size_t j = m.item_emb.index(id);
        out.push_back(urow ? dot(m.user_emb.row(*urow), m.item_emb.row(j)) : 0.0);
    }
    return out;
}

std::vector<double> score_dual(const DualAttention& m, const UserProfile& user,
                               std::span<const std::string> ids) {
    if (user.history.empty())
        throw DomainError("dual attention needs a nonempty history for user '" + user.id + "'");
    std::vector<std::span<const double>> rows;
    rows.reserve(user.history.size());
    for (const auto& h : user.history) rows.push_back(m.item_emb.row(m.item_emb.index(h)));
    const std::size_t first = rows.size() > m.short_window ? rows.size() - m.short_window : 0;
    const std::span<const std::span<const double>> all(rows);

    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto q = m.item_emb.row(m.item_emb.index(id));
        const auto lng = attend(all, q, m.temperature);
        const auto sht = attend(all.subspan(first), q, m.temperature);
        out.push_back(0.5 * dot(lng.pooled, q) + 0.5 * dot(sht.pooled, q));
    }
    return out;
}

}  // namespace

std::vector<double> score_items(const RecommenderModel& model, const UserProfile& user,
                                std::span<const std::string> item_ids) {
    return std::visit(
        [&](const auto& m) -> std::vector<double> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ContentCosine>)
                return score_content(m, user, item_ids);
            else if constexpr (std::is_same_v<T, MatrixFactorization>)
                return score_mf(m, user, item_ids);
            else
                return score_dual(m, user, item_ids);
        },
        model.variant);
}

double score(const RecommenderModel& model, const UserProfile& user, std::string_view item_id) {
    const std::string id(item_id);
    return score_items(model, user, std::span<const std::string>(&id, 1)).front();
}

std::vector<RankedItem> rank_scored(std::span<const std::string> ids, std::span<const double> scores,
                                    std::size_t k) {
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t n = std::min(k, ids.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), better);
    std::vector<RankedItem> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({ids[order[i]], scores[order[i]]});
    return out;
}

std::vector<RankedItem> top_k(const RecommenderModel& model, const UserProfile& user,
                              std::span<const std::string> candidates, std::size_t k) {
    if (k == 0) throw ConfigError("top_k needs K >= 1");
    if (candidates.empty()) throw EmptyInputError("top_k needs at least one candidate");
    const auto scores = score_items(model, user, candidates);
    return rank_scored(candidates, scores, k);
}

namespace {

json matrix_to_json(const EmbeddingMatrix& m) {
    return json{{"dim", m.dim()}, {"ids", m.ids()}, {"values", m.values()}};
}

EmbeddingMatrix matrix_from_json(const json& j) {
    return EmbeddingMatrix(j.at("ids").get<std::vector<std::string>>(), j.at("dim").get<std::size_t>(),
                           j.at("values").get<std::vector<double>>());
}

constexpr const char* kCheckpointFormat = "cocoonbench-model";
constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const RecommenderModel& model, const std::string& path) {
    json j{{"format", kCheckpointFormat}, {"version", kCheckpointVersion},
           {"variant", to_string(model.kind())}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ContentCosine>) {
                j["vocabulary"] = m.vocabulary;
                std::map<std::string, SparseVector> sorted(m.item_vectors.begin(), m.item_vectors.end());
                json items = json::object();
                for (const auto& [id, vec] : sorted) items[id] = vec;
                j["items"] = std::move(items);
            } else if constexpr (std::is_same_v<T, MatrixFactorization>) {
                j["user_emb"] = matrix_to_json(m.user_emb);
                j["item_emb"] = matrix_to_json(m.item_emb);
            } else {
                j["item_emb"] = matrix_to_json(m.item_emb);
                j["short_window"] = m.short_window;
                j["temperature"] = m.temperature;
            }
        },
        model.variant);
    write_text_atomic(path, j.dump() + "\n");
}

RecommenderModel load_checkpoint(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text(path));
        if (j.at("format") != kCheckpointFormat) throw ConfigError("not a model checkpoint: " + path);
        if (j.at("version") != kCheckpointVersion)
            throw ConfigError("unsupported checkpoint version in " + path);
        switch (parse_model_kind(j.at("variant").get<std::string>())) {
            case ModelKind::ContentCosine: {
                ContentCosine m;
                m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
                for (const auto& [id, vec] : j.at("items").items())
                    m.item_vectors.emplace(id, vec.get<SparseVector>());
                return {m};
            }
            case ModelKind::MatrixFactorization: {
                MatrixFactorization m{matrix_from_json(j.at("user_emb")), matrix_from_json(j.at("item_emb"))};
                if (m.user_emb.dim() != m.item_emb.dim())
                    throw IntegrityError("user and item embedding dimensions differ");
                return {m};
            }
            case ModelKind::DualAttention: {
                DualAttention m{matrix_from_json(j.at("item_emb")), j.at("short_window").get<std::size_t>(),
                                j.at("temperature").get<double>()};
                if (m.short_window < 1) throw IntegrityError("short_window must be >= 1");
                return {m};
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError("malformed checkpoint " + path + ": " + e.what());
    }
    throw ConfigError("malformed checkpoint " + path);
}

}  // namespace cocoon
