#include "gtl/sampler.hpp"

#include <algorithm>
#include <numeric>

namespace gtl {

std::string to_string(TemplateKind t) {
    switch (t) {
        case TemplateKind::t_lang: return "t_lang";
        case TemplateKind::t_table: return "t_table";
        case TemplateKind::t_anony: return "t_anony";
    }
    return "?";
}

std::string to_string(Split s) { return s == Split::pretrain ? "pretrain" : "holdout"; }

TemplateKind template_from_string(const std::string& s) {
    if (s == "t_lang" || s == "T-lang") return TemplateKind::t_lang;
    if (s == "t_table" || s == "T-table") return TemplateKind::t_table;
    if (s == "t_anony" || s == "T-anony") return TemplateKind::t_anony;
    throw ConfigError("unknown template '" + s + "'");
}

Split split_from_string(const std::string& s) {
    if (s == "pretrain") return Split::pretrain;
    if (s == "holdout") return Split::holdout;
    throw ConfigError("unknown split '" + s + "'");
}

std::string CaseSpec::case_id() const {
    return task_id + "|" + to_string(tmpl) + "|n" + std::to_string(n_context) + "|s" +
           std::to_string(seed) + "|" + to_string(split);
}

size_t default_query_count(TaskKind kind, Split split) {
    if (split == Split::pretrain) return kind == TaskKind::classification ? 16 : 4;
    return kind == TaskKind::classification ? 64 : 16;
}

SplitIndices split_rows(const TabularTask& task, uint64_t seed, size_t eval_count) {
    const size_t n = task.row_count();
    if (eval_count >= n)
        throw DataError("split_rows: eval_count " + std::to_string(eval_count) +
                        " >= row count " + std::to_string(n));
    Rng rng(mix_seed(seed, "split_rows:" + task.id));
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    rng.shuffle(order);
    SplitIndices out;
    out.eval.assign(order.begin(), order.begin() + static_cast<long>(eval_count));
    out.pool.assign(order.begin() + static_cast<long>(eval_count), order.end());
    std::sort(out.eval.begin(), out.eval.end());
    std::sort(out.pool.begin(), out.pool.end());
    return out;
}

std::vector<size_t> sample_context(const TabularTask& task, const std::vector<size_t>& pool,
                                   int n_context, uint64_t seed,
                                   std::vector<std::string>* warnings) {
    if (n_context < 0) throw ConfigError("sample_context: negative n_context");
    const size_t n = static_cast<size_t>(n_context);
    if (n == 0) return {};
    if (pool.size() < n)
        throw DataError("sample_context: pool of " + std::to_string(pool.size()) +
                        " rows cannot supply " + std::to_string(n) + " demonstrations");
    Rng rng(mix_seed(seed, "sample_context:" + task.id, static_cast<uint64_t>(n_context)));

    if (task.kind == TaskKind::regression) {
        const auto picks = rng.sample_without_replacement(pool.size(), n);
        std::vector<size_t> out;
        out.reserve(n);
        for (size_t p : picks) out.push_back(pool[p]);
        return out;
    }

    // Category-balanced sampling. Pool members grouped per class, in pool
    // order; per-class draws are uniform without replacement.
    const size_t c_count = static_cast<size_t>(task.n_classes);
    std::vector<std::vector<size_t>> members(c_count);
    for (size_t idx : pool)
        members[static_cast<size_t>(task.rows[idx].label)].push_back(idx);

    // Base quota floor(n/C) per class; the n mod C extra slots go to the most
    // frequent classes (ties resolved by class index).
    std::vector<size_t> quota(c_count, n / c_count);
    std::vector<size_t> by_frequency(c_count);
    std::iota(by_frequency.begin(), by_frequency.end(), size_t{0});
    std::stable_sort(by_frequency.begin(), by_frequency.end(),
                     [&](size_t a, size_t b) { return members[a].size() > members[b].size(); });
    for (size_t i = 0; i < n % c_count; ++i) ++quota[by_frequency[i]];

    // Clamp to availability, then push the deficit onto classes that still
    // have unused members, most frequent first.
    size_t selected_total = 0;
    std::vector<size_t> take(c_count);
    for (size_t c = 0; c < c_count; ++c) {
        take[c] = std::min(quota[c], members[c].size());
        if (take[c] < quota[c] && warnings) {
            warnings->push_back("class " + std::to_string(c) + " has only " +
                                std::to_string(members[c].size()) + " pool rows for a quota of " +
                                std::to_string(quota[c]) + "; balance degraded");
        }
        selected_total += take[c];
    }
    while (selected_total < n) {
        bool progressed = false;
        for (size_t i = 0; i < c_count && selected_total < n; ++i) {
            const size_t c = by_frequency[i];
            if (take[c] < members[c].size()) {
                ++take[c];
                ++selected_total;
                progressed = true;
            }
        }
        if (!progressed) break;  // cannot happen: pool >= n
    }

    std::vector<std::vector<size_t>> chosen(c_count);
    for (size_t c = 0; c < c_count; ++c) {
        const auto picks = rng.sample_without_replacement(members[c].size(), take[c]);
        for (size_t p : picks) chosen[c].push_back(members[c][p]);
    }

    // Interleave classes round-robin by class index so the prompt never
    // presents class-blocked demonstrations.
    std::vector<size_t> out;
    out.reserve(n);
    for (size_t round = 0; out.size() < n; ++round) {
        bool any = false;
        for (size_t c = 0; c < c_count; ++c) {
            if (round < chosen[c].size()) {
                out.push_back(chosen[c][round]);
                any = true;
            }
        }
        if (!any) break;
    }
    return out;
}

ContextSet make_context_set(const TabularTask& task, const SplitIndices& split, int n_context,
                            size_t n_queries, uint64_t seed) {
    ContextSet out;
    out.seed = seed;
    out.examples = sample_context(task, split.pool, n_context, seed, &out.warnings);
    if (n_queries >= split.eval.size()) {
        out.query_rows = split.eval;
    } else {
        Rng rng(mix_seed(seed, "sample_queries:" + task.id));
        const auto picks = rng.sample_without_replacement(split.eval.size(), n_queries);
        for (size_t p : picks) out.query_rows.push_back(split.eval[p]);
        std::sort(out.query_rows.begin(), out.query_rows.end());
    }
    // Demonstrations come from the pool and queries from the eval side, so
    // overlap would mean the split itself is broken. Checked unconditionally.
    for (size_t q : out.query_rows)
        for (size_t e : out.examples)
            if (q == e) throw DataError("context/query overlap at row " + std::to_string(q));
    return out;
}

std::vector<CaseSpec> enumerate_cases(const std::vector<std::string>& task_ids,
                                      const std::vector<TemplateKind>& templates,
                                      const std::vector<int>& context_counts,
                                      const std::vector<uint64_t>& seeds, Split split) {
    if (task_ids.empty()) throw ConfigError("enumerate_cases: no tasks");
    if (templates.empty()) throw ConfigError("enumerate_cases: no templates");
    if (context_counts.empty()) throw ConfigError("enumerate_cases: no context counts");
    if (seeds.empty()) throw ConfigError("enumerate_cases: no seeds");
    std::vector<CaseSpec> cases;
    cases.reserve(task_ids.size() * templates.size() * context_counts.size() * seeds.size());
    for (const std::string& task : task_ids)
        for (TemplateKind tmpl : templates)
            for (int n : context_counts)
                for (uint64_t seed : seeds)
                    cases.push_back(CaseSpec{task, tmpl, n, seed, split});
    return cases;
}

}  // namespace gtl
