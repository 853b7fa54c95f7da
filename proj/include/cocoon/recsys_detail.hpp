#pragma once

// Gradients of the DualAttention scorer and its attention-alignment term, exposed for
// training and for finite-difference checks.

#include <cstddef>
#include <span>
#include <vector>

namespace cocoon::detail {

using Rows = std::span<const std::span<const double>>;

struct AttentionScoreGrad {
    double score = 0.0;
    std::vector<double> grad_query;
    std::vector<std::vector<double>> grad_rows;  // one per context row
};

// 0.5 * pooled_long . q + 0.5 * pooled_short . q with candidate-queried attention over
// all rows (long) and over the last `window` rows (short).
AttentionScoreGrad dual_attention_score_grad(Rows context, std::span<const double> query,
                                             std::size_t window, double temperature);

// Profile attention (query = mean of all context rows) and candidate attention
// (query = item) over the last `window` rows; value is mu * KL(profile || candidate).
struct AlignmentGrad {
    double value = 0.0;
    std::vector<double> profile_weights;
    std::vector<double> candidate_weights;
    std::vector<double> grad_query;
    std::vector<std::vector<double>> grad_rows;
};

AlignmentGrad attention_alignment_grad(Rows context, std::span<const double> query,
                                       std::size_t window, double temperature, double mu);

}  // namespace cocoon::detail
