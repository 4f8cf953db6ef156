#include "gtl/objective.hpp"

namespace gtl {

namespace {

LossMask build(const TokenizedSample& sample) {
    const size_t len = sample.length();
    // Role lookup per position; position 0 is the begin token (meta) and
    // positions outside any span are meta by construction.
    std::vector<uint8_t> is_supervised_token(len, 0);
    for (const TokenSpan& span : sample.spans) {
        if (span.end > len) throw DataError("loss mask: span exceeds sequence length");
        if (span.role != SegmentRole::feature_value && span.role != SegmentRole::target) continue;
        for (size_t p = span.start; p < span.end; ++p) is_supervised_token[p] = 1;
    }
    LossMask mask;
    mask.flags.assign(len, 0);
    for (size_t p = 0; p + 1 < len; ++p) {
        if (is_supervised_token[p + 1]) {
            mask.flags[p] = 1;
            ++mask.supervised_count;
        }
    }
    return mask;
}

}  // namespace

LossMask build_loss_mask(const TokenizedSample& sample) {
    LossMask mask = build(sample);
    if (mask.supervised_count == 0)
        throw DataError("loss mask: sample '" + sample.case_id + "' has no supervised positions");
    return mask;
}

LossMask build_loss_mask_lenient(const TokenizedSample& sample) { return build(sample); }

}  // namespace gtl
