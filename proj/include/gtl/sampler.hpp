#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gtl/tabular.hpp"

namespace gtl {

enum class TemplateKind { t_lang, t_table, t_anony };
enum class Split { pretrain, holdout };

std::string to_string(TemplateKind t);
std::string to_string(Split s);
TemplateKind template_from_string(const std::string& s);
Split split_from_string(const std::string& s);

// The in-context example counts studied by the sweep grid.
inline const std::vector<int> kContextCounts = {0, 4, 8, 16, 32, 64};

struct CaseSpec {
    std::string task_id;
    TemplateKind tmpl = TemplateKind::t_table;
    int n_context = 0;
    uint64_t seed = 0;
    Split split = Split::pretrain;

    std::string case_id() const;
};

struct ContextSet {
    std::vector<size_t> examples;    // row indices used as demonstrations
    std::vector<size_t> query_rows;  // row indices to predict
    uint64_t seed = 0;
    std::vector<std::string> warnings;
};

struct SplitIndices {
    std::vector<size_t> pool;  // demonstration / training rows
    std::vector<size_t> eval;  // held-back test rows, |eval| = eval_count
};

// Disjoint pool/eval split, deterministic in (task.id, seed).
SplitIndices split_rows(const TabularTask& task, uint64_t seed, size_t eval_count);

// Draws n_context demonstrations from the pool. Classification draws are
// category-balanced: per-class quotas differ by at most one, extra slots go
// to the most frequent classes, and the returned order interleaves classes
// round-robin by class index. Regression draws uniformly without
// replacement. A class missing from the pool degrades balance with a
// warning instead of failing.
std::vector<size_t> sample_context(const TabularTask& task, const std::vector<size_t>& pool,
                                   int n_context, uint64_t seed,
                                   std::vector<std::string>* warnings = nullptr);

// Context plus query rows for one case; examples and queries never overlap.
ContextSet make_context_set(const TabularTask& task, const SplitIndices& split, int n_context,
                            size_t n_queries, uint64_t seed);

// Full grid in stable lexicographic order (task, template, n_context, seed).
std::vector<CaseSpec> enumerate_cases(const std::vector<std::string>& task_ids,
                                      const std::vector<TemplateKind>& templates,
                                      const std::vector<int>& context_counts,
                                      const std::vector<uint64_t>& seeds, Split split);

// Query-set sizes from the evaluation protocol: pre-train test cases use
// 16 classification / 4 regression queries, holdout cases 64 / 16.
size_t default_query_count(TaskKind kind, Split split);

}  // namespace gtl
