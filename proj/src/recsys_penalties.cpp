#include <algorithm>
#include <cmath>
#include <numeric>

#include "cocoon/errors.hpp"
#include "cocoon/recsys.hpp"
#include "cocoon/recsys_detail.hpp"

namespace cocoon {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void check_cdr_input(std::span<const std::vector<double>> e) {
    if (e.size() < 2) throw EmptyInputError("diversity penalty needs at least 2 embeddings");
    for (const auto& v : e) {
        if (v.size() != e[0].size()) throw DomainError("embeddings differ in dimension");
        if (dot(v, v) == 0.0) throw DomainError("cosine similarity of a zero vector is undefined");
    }
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    if (out.empty()) return out;
    const double mx = *std::max_element(out.begin(), out.end());
    double sum = 0.0;
    for (auto& x : out) sum += (x = std::exp(x - mx));
    for (auto& x : out) x /= sum;
    return out;
}

double cdr_penalty(std::span<const std::vector<double>> embeddings, double lambda) {
    if (lambda == 0.0) return 0.0;
    check_cdr_input(embeddings);
    double sum = 0.0;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const double ni = std::sqrt(dot(embeddings[i], embeddings[i]));
        for (std::size_t j = i + 1; j < embeddings.size(); ++j)
            sum += dot(embeddings[i], embeddings[j]) /
                   (ni * std::sqrt(dot(embeddings[j], embeddings[j])));
    }
    return lambda * sum;
}

PenaltyGradient cdr_penalty_grad(std::span<const std::vector<double>> embeddings, double lambda) {
    check_cdr_input(embeddings);
    const std::size_t n = embeddings.size();
    const std::size_t d = embeddings[0].size();
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(dot(embeddings[i], embeddings[i]));

    PenaltyGradient out;
    out.grads.assign(n, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& a = embeddings[i];
            const auto& b = embeddings[j];
            const double c = dot(a, b) / (norms[i] * norms[j]);
            out.value += c;
            // d cos / d a = b / (|a||b|) - cos * a / |a|^2
            for (std::size_t k = 0; k < d; ++k) {
                out.grads[i][k] += b[k] / (norms[i] * norms[j]) - c * a[k] / (norms[i] * norms[i]);
                out.grads[j][k] += a[k] / (norms[i] * norms[j]) - c * b[k] / (norms[j] * norms[j]);
            }
        }
    }
    out.value *= lambda;
    for (auto& g : out.grads)
        for (auto& x : g) x *= lambda;
    return out;
}

double ltao_penalty(std::span<const double> a_long, std::span<const double> a_short, double mu) {
    if (a_long.size() != a_short.size() || a_long.empty())
        throw DomainError("attention distributions must share a nonempty support");
    auto check = [](std::span<const double> p, const char* name) {
        double sum = 0.0;
        for (double x : p) {
            if (!(x >= 0.0)) throw DomainError(std::string(name) + " has a negative entry");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw DomainError(std::string(name) + " does not sum to 1");
    };
    check(a_long, "a_long");
    check(a_short, "a_short");
    double kl = 0.0;
    for (std::size_t k = 0; k < a_long.size(); ++k) {
        if (a_long[k] == 0.0) continue;
        if (a_short[k] == 0.0)
            throw DomainError("KL divergence is infinite: a_short is zero where a_long is not");
        kl += a_long[k] * std::log(a_long[k] / a_short[k]);
    }
    return mu * kl;
}

LtaoLogitGradient ltao_penalty_logits(std::span<const double> long_logits,
                                      std::span<const double> short_logits, double mu) {
    if (long_logits.size() != short_logits.size() || long_logits.empty())
        throw DomainError("attention logits must share a nonempty support");
    const auto a = softmax(long_logits);
    const auto b = softmax(short_logits);
    // Log-probabilities straight from the logits stay finite where the softmax underflows.
    auto log_softmax = [](std::span<const double> z) {
        const double mx = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double x : z) s += std::exp(x - mx);
        const double lse = mx + std::log(s);
        std::vector<double> out(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
        return out;
    };
    const auto la = log_softmax(long_logits);
    const auto lb = log_softmax(short_logits);

    double kl = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) kl += a[k] * (la[k] - lb[k]);

    LtaoLogitGradient out;
    out.value = mu * kl;
    out.grad_long.resize(a.size());
    out.grad_short.resize(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        out.grad_long[k] = mu * a[k] * (la[k] - lb[k] - kl);
        out.grad_short[k] = mu * (b[k] - a[k]);
    }
    return out;
}

Attention attend(std::span<const std::span<const double>> rows, std::span<const double> query,
                 double temperature) {
    std::vector<double> logits(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) logits[k] = dot(rows[k], query) / temperature;
    Attention out{softmax(logits), std::vector<double>(query.size(), 0.0)};
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (std::size_t i = 0; i < query.size(); ++i) out.pooled[i] += out.weights[k] * rows[k][i];
    return out;
}

namespace detail {

namespace {

// Adds weight * d(pooled . q)/d(params) for one attention head over rows[first..].
double accumulate_head(Rows rows, std::size_t first, std::span<const double> q, double temperature,
                       double weight, std::vector<double>& grad_q,
                       std::vector<std::vector<double>>& grad_rows) {
    const auto head = rows.subspan(first);
    const auto att = attend(head, q, temperature);
    const double s = dot(att.pooled, q);
    for (std::size_t k = 0; k < head.size(); ++k) {
        const double v = dot(head[k], q);
        const double coef = weight * att.weights[k] * (1.0 + (v - s) / temperature);
        for (std::size_t i = 0; i < q.size(); ++i) {
            grad_q[i] += coef * head[k][i];
            grad_rows[first + k][i] += coef * q[i];
        }
    }
    return s;
}

}  // namespace

AttentionScoreGrad dual_attention_score_grad(Rows context, std::span<const double> query,
                                             std::size_t window, double temperature) {
    if (context.empty()) throw DomainError("attention over an empty history");
    AttentionScoreGrad out;
    out.grad_query.assign(query.size(), 0.0);
    out.grad_rows.assign(context.size(), std::vector<double>(query.size(), 0.0));
    const std::size_t first = context.size() > window ? context.size() - window : 0;
    const double s_long =
        accumulate_head(context, 0, query, temperature, 0.5, out.grad_query, out.grad_rows);
    const double s_short =
        accumulate_head(context, first, query, temperature, 0.5, out.grad_query, out.grad_rows);
    out.score = 0.5 * s_long + 0.5 * s_short;
    return out;
}

AlignmentGrad attention_alignment_grad(Rows context, std::span<const double> query,
                                       std::size_t window, double temperature, double mu) {
    if (context.empty()) throw DomainError("attention over an empty history");
    const std::size_t n = context.size();
    const std::size_t d = query.size();
    const std::size_t first = n > window ? n - window : 0;

    std::vector<double> profile(d, 0.0);
    for (const auto& r : context)
        for (std::size_t i = 0; i < d; ++i) profile[i] += r[i] / static_cast<double>(n);

    std::vector<double> z_profile, z_candidate;
    for (std::size_t k = first; k < n; ++k) {
        z_profile.push_back(dot(context[k], profile) / temperature);
        z_candidate.push_back(dot(context[k], query) / temperature);
    }
    const auto kl = ltao_penalty_logits(z_profile, z_candidate, mu);

    AlignmentGrad out;
    out.value = kl.value;
    out.profile_weights = softmax(z_profile);
    out.candidate_weights = softmax(z_candidate);
    out.grad_query.assign(d, 0.0);
    out.grad_rows.assign(n, std::vector<double>(d, 0.0));
    std::vector<double> through_profile(d, 0.0);
    for (std::size_t k = first; k < n; ++k) {
        const double gx = kl.grad_long[k - first] / temperature;
        const double gy = kl.grad_short[k - first] / temperature;
        for (std::size_t i = 0; i < d; ++i) {
            out.grad_rows[k][i] += gx * profile[i] + gy * query[i];
            out.grad_query[i] += gy * context[k][i];
            through_profile[i] += gx * context[k][i];
        }
    }
    for (auto& g : out.grad_rows)
        for (std::size_t i = 0; i < d; ++i) g[i] += through_profile[i] / static_cast<double>(n);
    return out;
}

}  // namespace detail

}  // namespace cocoon
