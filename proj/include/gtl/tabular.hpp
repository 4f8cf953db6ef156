#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gtl/common.hpp"

namespace gtl {

enum class FeatureKind { numerical, categorical };
enum class TaskKind { classification, regression };

std::string to_string(FeatureKind kind);
std::string to_string(TaskKind kind);

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::numerical;
    std::string description;  // empty = not available (T-anony path still works)
};

struct TaskMeta {
    std::string background;
    std::string label_description;
    std::vector<std::string> class_names;  // classification only, index order
    std::string label_name;
};

// One table cell: a finite real, a nonempty categorical string, or missing.
struct Cell {
    enum class State { numeric, text, missing };
    State state = State::missing;
    double number = 0.0;
    std::string text;

    static Cell num(double v) { return Cell{State::numeric, v, {}}; }
    static Cell str(std::string v) { return Cell{State::text, 0.0, std::move(v)}; }
    static Cell none() { return Cell{}; }
    bool is_missing() const { return state == State::missing; }
    bool operator==(const Cell&) const = default;
};

struct Row {
    std::vector<Cell> values;
    // Regression target, or the class index for classification tasks.
    double label = 0.0;
};

struct TabularTask {
    std::string id;
    std::vector<FeatureSpec> features;
    std::vector<Row> rows;
    TaskKind kind = TaskKind::regression;
    int n_classes = 0;  // C for classification, 0 for regression
    TaskMeta meta;

    size_t feature_count() const { return features.size(); }
    size_t row_count() const { return rows.size(); }
};

struct ValidationIssue {
    std::string code;     // stable identifier, e.g. "row arity"
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

// Loads an RFC-4180 CSV (first row = header) plus a JSON metadata object
// with fields: label_column (required), task_background, label_description,
// class_names, features:[{name, kind, description}].
TabularTask load_dataset(const std::string& values_file, const std::string& meta_file);

// Same loader on in-memory text, used by tests and by the suite round-trip.
TabularTask load_dataset_text(const std::string& csv_text, const std::string& meta_json,
                              const std::string& task_id);

// Writes the task back out in the exact formats load_dataset reads. Numeric
// cells are emitted as shortest round-trip decimals, so reloading yields a
// value-identical task.
void save_dataset(const TabularTask& task, const std::string& values_file,
                  const std::string& meta_file);
std::string serialize_values_csv(const TabularTask& task);
std::string serialize_meta_json(const TabularTask& task);

// Derives up to max_tasks prediction tasks from one table by re-selecting the
// label column. The input task is always first; other columns become labels
// when eligible (numerical -> regression; categorical -> classification iff
// 2..10 distinct values, each appearing at least twice).
std::vector<TabularTask> derive_tasks(const TabularTask& task_pool, int max_tasks);

// Report-only check of every structural invariant.
ValidationReport validate_task(const TabularTask& task);

namespace csv {
// Minimal RFC-4180 reader/writer (quoted fields, embedded commas/newlines,
// doubled quotes). Rows must be rectangular; the caller checks that.
std::vector<std::vector<std::string>> parse(const std::string& text);
std::string write_field(const std::string& field);
}  // namespace csv

}  // namespace gtl
