#pragma once

#include "gtl/linalg.hpp"
#include "gtl/tokenizer.hpp"

namespace gtl {

// Per-position supervision flags. Position p is supervised iff the token at
// p+1 exists and lies in a feature_value or target span, i.e. the loss mask
// is the shift-by-one image of the supervised spans. Meta tokens are
// conditioned on but never predicted.
struct LossMask {
    std::vector<uint8_t> flags;  // one per position; last position always 0
    size_t supervised_count = 0;
};

// Throws DataError when nothing is supervised (such a sample cannot join a
// training corpus).
LossMask build_loss_mask(const TokenizedSample& sample);

// Same computation without the rejection, for callers that filter instead.
LossMask build_loss_mask_lenient(const TokenizedSample& sample);

// Mean over supervised positions p of -log softmax(logits.row(p))[ids[p+1]].
template <typename Scalar>
double gtl_loss(const matrix_t<Scalar>& logits, const std::vector<int>& token_ids,
                const LossMask& mask) {
    if (static_cast<size_t>(logits.rows()) != token_ids.size())
        throw ConfigError("gtl_loss: logits rows != sequence length");
    if (mask.flags.size() != token_ids.size())
        throw ConfigError("gtl_loss: mask length != sequence length");
    if (mask.supervised_count == 0) throw DataError("gtl_loss: zero supervised positions");
    double total = 0.0;
    for (size_t p = 0; p + 1 < token_ids.size(); ++p) {
        if (!mask.flags[p]) continue;
        const auto row = logits.row(static_cast<Eigen::Index>(p));
        const Scalar max = row.maxCoeff();
        double sum_exp = 0.0;
        for (Eigen::Index v = 0; v < row.size(); ++v)
            sum_exp += std::exp(static_cast<double>(row(v) - max));
        const double log_z = static_cast<double>(max) + std::log(sum_exp);
        total += log_z - static_cast<double>(row(token_ids[p + 1]));
    }
    return total / static_cast<double>(mask.supervised_count);
}

}  // namespace gtl
