#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gtl/templating.hpp"

namespace gtl {

// Reference tokenizer is byte-level (one token per byte, V = 259 with the
// three specials) so every span mapping is exact. A learned vocabulary can
// be plugged in; it tokenizes by greedy longest match and may straddle
// segment boundaries, which the span mapper resolves.
class Tokenizer {
public:
    enum class Kind { byte_level, learned_bpe };

    static Tokenizer byte_level();
    static Tokenizer learned(std::vector<std::string> pieces, bool byte_fallback = false);

    Kind kind() const { return kind_; }
    int vocab_size() const { return vocab_size_; }
    int begin_id() const { return begin_id_; }
    int end_of_answer_id() const { return eoa_id_; }
    int pad_id() const { return pad_id_; }

    // Text tokens only; specials are never produced by encode.
    std::vector<int> encode(std::string_view text) const;
    // Inverse of encode on text tokens; special ids contribute nothing.
    std::string decode(const std::vector<int>& ids) const;
    // Byte length of each token's surface string (0 for specials).
    size_t piece_length(int id) const;

private:
    Kind kind_ = Kind::byte_level;
    int vocab_size_ = 0;
    int begin_id_ = 0;
    int eoa_id_ = 0;
    int pad_id_ = 0;
    bool byte_fallback_ = false;
    std::vector<std::string> pieces_;  // learned vocabulary, id order
};

struct TokenSpan {
    size_t start = 0;  // token positions, [start, end)
    size_t end = 0;
    SegmentRole role = SegmentRole::meta;
};

struct TokenizedSample {
    std::vector<int> token_ids;   // begin token first
    std::vector<TokenSpan> spans; // sorted, non-overlapping, tiling [1, length)
    std::vector<uint8_t> loss_mask;  // filled by build_loss_mask
    std::string case_id;
    size_t query_row = 0;
    std::string answer_text;

    size_t length() const { return token_ids.size(); }
};

// Tokenizes the rendered text with a begin token prepended and maps each
// character span to the minimal contiguous token range covering it. A token
// straddling segment boundaries takes the supervised role of the latest
// segment it overlaps. For training samples an end_of_answer token is
// appended and joins the final target span (it is supervised).
TokenizedSample tokenize_with_spans(const RenderedSample& sample, const Tokenizer& tok,
                                    bool append_end_of_answer);

struct LengthFilterResult {
    std::vector<TokenizedSample> kept;
    size_t discarded = 0;
};

// Keeps samples with length <= max_len, preserving order.
LengthFilterResult filter_by_length(std::vector<TokenizedSample> samples, size_t max_len);

}  // namespace gtl
