#include "gtl/tokenizer.hpp"

#include <algorithm>

namespace gtl {

Tokenizer Tokenizer::byte_level() {
    Tokenizer tok;
    tok.kind_ = Kind::byte_level;
    tok.begin_id_ = 256;
    tok.eoa_id_ = 257;
    tok.pad_id_ = 258;
    tok.vocab_size_ = 259;
    return tok;
}

Tokenizer Tokenizer::learned(std::vector<std::string> pieces, bool byte_fallback) {
    for (const std::string& p : pieces)
        if (p.empty()) throw ConfigError("learned tokenizer: empty vocabulary piece");
    Tokenizer tok;
    tok.kind_ = Kind::learned_bpe;
    tok.pieces_ = std::move(pieces);
    const int p = static_cast<int>(tok.pieces_.size());
    tok.begin_id_ = p;
    tok.eoa_id_ = p + 1;
    tok.pad_id_ = p + 2;
    tok.vocab_size_ = p + 3;
    tok.byte_fallback_ = byte_fallback;
    return tok;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    if (kind_ == Kind::byte_level) {
        ids.reserve(text.size());
        for (unsigned char c : text) ids.push_back(static_cast<int>(c));
        return ids;
    }
    size_t pos = 0;
    while (pos < text.size()) {
        int best = -1;
        size_t best_len = 0;
        for (size_t id = 0; id < pieces_.size(); ++id) {
            const std::string& piece = pieces_[id];
            if (piece.size() > best_len && piece.size() <= text.size() - pos &&
                text.compare(pos, piece.size(), piece) == 0) {
                best = static_cast<int>(id);
                best_len = piece.size();
            }
        }
        if (best < 0) {
            if (!byte_fallback_)
                throw DataError("learned tokenizer: no vocabulary piece matches text at byte " +
                                std::to_string(pos));
            // Byte fallback expects the single byte to exist as a piece.
            const std::string single(1, text[pos]);
            const auto it = std::find(pieces_.begin(), pieces_.end(), single);
            if (it == pieces_.end())
                throw DataError("learned tokenizer: byte fallback piece missing for byte " +
                                std::to_string(static_cast<unsigned char>(text[pos])));
            best = static_cast<int>(it - pieces_.begin());
            best_len = 1;
        }
        ids.push_back(best);
        pos += best_len;
    }
    return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == begin_id_ || id == eoa_id_ || id == pad_id_) continue;
        if (id < 0 || id >= vocab_size_)
            throw DataError("decode: token id " + std::to_string(id) + " out of range");
        if (kind_ == Kind::byte_level)
            out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
        else
            out += pieces_[static_cast<size_t>(id)];
    }
    return out;
}

size_t Tokenizer::piece_length(int id) const {
    if (id == begin_id_ || id == eoa_id_ || id == pad_id_) return 0;
    if (id < 0 || id >= vocab_size_)
        throw DataError("piece_length: token id out of range");
    return kind_ == Kind::byte_level ? 1 : pieces_[static_cast<size_t>(id)].size();
}

namespace {

bool supervised(SegmentRole role) {
    return role == SegmentRole::feature_value || role == SegmentRole::target;
}

}  // namespace

TokenizedSample tokenize_with_spans(const RenderedSample& sample, const Tokenizer& tok,
                                    bool append_end_of_answer) {
    TokenizedSample out;
    out.case_id = sample.case_id;
    out.query_row = sample.query_row;
    out.answer_text = sample.answer_text;

    const std::string text = sample.text();
    const std::vector<int> text_tokens = tok.encode(text);
    out.token_ids.reserve(text_tokens.size() + 2);
    out.token_ids.push_back(tok.begin_id());
    out.token_ids.insert(out.token_ids.end(), text_tokens.begin(), text_tokens.end());

    // Character range of every segment, in order. Empty segments (the
    // inference placeholder) own no characters and produce no span.
    struct CharSpan {
        size_t begin, end;
        SegmentRole role;
    };
    std::vector<CharSpan> char_spans;
    size_t offset = 0;
    for (const Segment& seg : sample.segments) {
        char_spans.push_back({offset, offset + seg.text.size(), seg.role});
        offset += seg.text.size();
    }

    // Assign every text token to one segment. The assignment scans segments
    // and tokens in lockstep; a straddling token takes the latest overlapped
    // segment with a supervised role, else the latest overlapped segment.
    std::vector<int> token_segment(text_tokens.size(), -1);
    size_t char_pos = 0;
    size_t seg_cursor = 0;
    for (size_t t = 0; t < text_tokens.size(); ++t) {
        const size_t tok_begin = char_pos;
        const size_t tok_end = char_pos + tok.piece_length(text_tokens[t]);
        char_pos = tok_end;
        while (seg_cursor < char_spans.size() && char_spans[seg_cursor].end <= tok_begin)
            ++seg_cursor;
        int chosen = -1;
        int chosen_supervised = -1;
        for (size_t s = seg_cursor; s < char_spans.size() && char_spans[s].begin < tok_end; ++s) {
            if (char_spans[s].begin == char_spans[s].end) continue;
            chosen = static_cast<int>(s);
            if (supervised(char_spans[s].role)) chosen_supervised = static_cast<int>(s);
        }
        token_segment[t] = chosen_supervised >= 0 ? chosen_supervised : chosen;
        if (token_segment[t] < 0) throw DataError("tokenize: token maps to no segment");
    }

    // Compress the assignment into per-segment token ranges; the +1 shift
    // accounts for the begin token at position 0.
    int current = -1;
    for (size_t t = 0; t < token_segment.size(); ++t) {
        if (token_segment[t] != current) {
            if (token_segment[t] < current)
                throw DataError("tokenize: non-monotone token/segment assignment");
            current = token_segment[t];
            out.spans.push_back({t + 1, t + 2, char_spans[static_cast<size_t>(current)].role});
        } else {
            ++out.spans.back().end;
        }
    }

    // Every nonempty supervised segment must have kept at least one token;
    // otherwise its value silently vanished into a neighbour's tokens.
    {
        size_t expected = 0, got = 0;
        for (const CharSpan& s : char_spans)
            if (supervised(s.role) && s.end > s.begin) ++expected;
        for (size_t i = 0; i < token_segment.size(); ++i)
            if (i == 0 || token_segment[i] != token_segment[i - 1])
                if (supervised(char_spans[static_cast<size_t>(token_segment[i])].role)) ++got;
        if (got != expected)
            throw DataError("tokenize: a supervised segment lost all of its tokens");
    }

    if (append_end_of_answer) {
        if (out.spans.empty() || out.spans.back().role != SegmentRole::target)
            throw DataError("tokenize: training sample does not end with a target segment");
        out.token_ids.push_back(tok.end_of_answer_id());
        ++out.spans.back().end;  // the stop token is part of t^y and supervised
    }
    return out;
}

LengthFilterResult filter_by_length(std::vector<TokenizedSample> samples, size_t max_len) {
    if (max_len < 1) throw ConfigError("filter_by_length: max_len must be >= 1");
    LengthFilterResult out;
    out.kept.reserve(samples.size());
    for (auto& s : samples) {
        if (s.length() <= max_len)
            out.kept.push_back(std::move(s));
        else
            ++out.discarded;
    }
    return out;
}

}  // namespace gtl
