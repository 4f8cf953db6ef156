#include "gtl/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gtl {

using json = nlohmann::ordered_json;

std::string to_string(FeatureKind kind) {
    return kind == FeatureKind::numerical ? "numerical" : "categorical";
}

std::string to_string(TaskKind kind) {
    return kind == TaskKind::classification ? "classification" : "regression";
}

namespace csv {

std::vector<std::vector<std::string>> parse(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    size_t i = 0;
    const size_t n = text.size();
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    while (i < n) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field.push_back(c);
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field_started && field.empty()) {
                    in_quotes = true;
                } else {
                    field.push_back(c);  // stray quote inside unquoted field
                }
                field_started = true;
                ++i;
                break;
            case ',':
                end_field();
                ++i;
                break;
            case '\r':
                if (i + 1 < n && text[i + 1] == '\n') ++i;
                end_row();
                ++i;
                break;
            case '\n':
                end_row();
                ++i;
                break;
            default:
                field.push_back(c);
                field_started = true;
                ++i;
                break;
        }
    }
    if (in_quotes) throw DataError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::string write_field(const std::string& field) {
    const bool needs_quotes =
        field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace csv

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Full-string parse to a double. Returns nullopt for anything that is not a
// plain finite real (so "3.5 kg" and "inf" both stay categorical).
std::optional<double> parse_real(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return std::nullopt;
    size_t end = s.find_last_not_of(" \t") + 1;
    const char* first = s.data() + begin;
    const char* last = s.data() + end;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

// Shortest decimal string that round-trips to the same double.
std::string format_exact(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

bool is_integral_label(double v) { return std::isfinite(v) && v == std::floor(v); }

struct MetaFile {
    std::string label_column;
    std::string task_background;
    std::string label_description;
    std::vector<std::string> class_names;
    std::map<std::string, FeatureKind> declared_kinds;
    std::map<std::string, std::string> descriptions;
};

MetaFile parse_meta(const std::string& meta_json) {
    json j;
    try {
        j = json::parse(meta_json);
    } catch (const json::exception& e) {
        throw DataError(std::string("metadata: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("label_column") || !j["label_column"].is_string())
        throw DataError("metadata: missing required string field 'label_column'");
    MetaFile meta;
    meta.label_column = j["label_column"].get<std::string>();
    meta.task_background = j.value("task_background", "");
    meta.label_description = j.value("label_description", "");
    if (j.contains("class_names")) {
        for (const auto& name : j["class_names"]) meta.class_names.push_back(name.get<std::string>());
    }
    if (j.contains("features")) {
        for (const auto& f : j["features"]) {
            const std::string name = f.at("name").get<std::string>();
            if (f.contains("kind")) {
                const std::string kind = f["kind"].get<std::string>();
                if (kind == "numerical") meta.declared_kinds[name] = FeatureKind::numerical;
                else if (kind == "categorical") meta.declared_kinds[name] = FeatureKind::categorical;
                else throw DataError("metadata: unknown feature kind '" + kind + "'");
            }
            if (f.contains("description")) meta.descriptions[name] = f["description"].get<std::string>();
        }
    }
    return meta;
}

// A column is numerical iff every non-missing cell parses as a finite real.
// Deterministic and order-independent over rows.
FeatureKind infer_kind(const std::vector<std::vector<std::string>>& data, size_t col) {
    bool saw_value = false;
    for (size_t r = 1; r < data.size(); ++r) {
        const std::string& raw = data[r][col];
        if (raw.empty()) continue;
        saw_value = true;
        if (!parse_real(raw)) return FeatureKind::categorical;
    }
    return saw_value ? FeatureKind::numerical : FeatureKind::categorical;
}

Cell make_cell(const std::string& raw, FeatureKind kind, const std::string& column) {
    if (raw.empty()) return Cell::none();
    if (kind == FeatureKind::numerical) {
        const auto v = parse_real(raw);
        if (!v) throw DataError("column '" + column + "': non-finite or non-numeric cell '" + raw + "'");
        return Cell::num(*v);
    }
    return Cell::str(raw);
}

}  // namespace

TabularTask load_dataset_text(const std::string& csv_text, const std::string& meta_json,
                              const std::string& task_id) {
    const auto grid = csv::parse(csv_text);
    if (grid.empty()) throw DataError("values: empty table");
    const auto& header = grid.front();
    if (header.empty()) throw DataError("values: empty header row");
    for (size_t r = 1; r < grid.size(); ++r) {
        if (grid[r].size() != header.size())
            throw DataError("values: row " + std::to_string(r) + " has " +
                            std::to_string(grid[r].size()) + " cells, header has " +
                            std::to_string(header.size()));
    }
    if (grid.size() < 2) throw DataError("values: table has no data rows");

    const MetaFile meta = parse_meta(meta_json);
    const auto label_it = std::find(header.begin(), header.end(), meta.label_column);
    if (label_it == header.end())
        throw DataError("metadata: unknown label column '" + meta.label_column + "'");
    const size_t label_col = static_cast<size_t>(label_it - header.begin());

    // Column kinds: declared when present, inferred otherwise.
    std::vector<FeatureKind> kinds(header.size());
    for (size_t c = 0; c < header.size(); ++c) {
        const auto declared = meta.declared_kinds.find(header[c]);
        kinds[c] = declared != meta.declared_kinds.end() ? declared->second
                                                         : infer_kind(grid, c);
    }

    TabularTask task;
    task.id = task_id;
    task.meta.background = meta.task_background;
    task.meta.label_description = meta.label_description;
    task.meta.label_name = meta.label_column;

    for (size_t c = 0; c < header.size(); ++c) {
        if (c == label_col) continue;
        FeatureSpec spec;
        spec.name = header[c];
        spec.kind = kinds[c];
        const auto desc = meta.descriptions.find(header[c]);
        if (desc != meta.descriptions.end()) spec.description = desc->second;
        task.features.push_back(std::move(spec));
    }

    // Task kind: explicit class_names force classification; otherwise a
    // categorical label column is classification with first-appearance class
    // order, and a numerical one is regression.
    std::vector<std::string> class_names = meta.class_names;
    const bool classification = !class_names.empty() || kinds[label_col] == FeatureKind::categorical;
    if (classification && class_names.empty()) {
        std::set<std::string> seen;
        for (size_t r = 1; r < grid.size(); ++r) {
            const std::string& raw = grid[r][label_col];
            if (raw.empty()) continue;
            if (seen.insert(raw).second) class_names.push_back(raw);
        }
    }

    auto class_index = [&](const std::string& raw) -> std::optional<int> {
        const auto it = std::find(class_names.begin(), class_names.end(), raw);
        if (it != class_names.end()) return static_cast<int>(it - class_names.begin());
        // Datasets may store bare integer indices even when metadata names
        // the classes; accept those too.
        if (const auto v = parse_real(raw); v && is_integral_label(*v)) {
            const int idx = static_cast<int>(*v);
            if (idx >= 0 && idx < static_cast<int>(class_names.size())) return idx;
        }
        return std::nullopt;
    };

    for (size_t r = 1; r < grid.size(); ++r) {
        const std::string& raw_label = grid[r][label_col];
        if (raw_label.empty()) continue;  // rows with a missing label are dropped
        Row row;
        if (classification) {
            const auto idx = class_index(raw_label);
            if (!idx)
                throw DataError("label column '" + meta.label_column + "': value '" + raw_label +
                                "' matches no declared class");
            row.label = *idx;
        } else {
            const auto v = parse_real(raw_label);
            if (!v) throw DataError("label column '" + meta.label_column +
                                    "': non-finite label '" + raw_label + "'");
            row.label = *v;
        }
        for (size_t c = 0; c < header.size(); ++c) {
            if (c == label_col) continue;
            row.values.push_back(make_cell(grid[r][c], kinds[c], header[c]));
        }
        task.rows.push_back(std::move(row));
    }
    if (task.rows.empty()) throw DataError("values: no usable rows (all labels missing)");

    if (classification) {
        task.kind = TaskKind::classification;
        task.n_classes = static_cast<int>(class_names.size());
        task.meta.class_names = std::move(class_names);
        if (task.n_classes < 2)
            throw DataError("classification task needs at least 2 classes, got " +
                            std::to_string(task.n_classes));
    } else {
        task.kind = TaskKind::regression;
        task.n_classes = 0;
    }
    return task;
}

TabularTask load_dataset(const std::string& values_file, const std::string& meta_file) {
    std::string id = values_file;
    const size_t slash = id.find_last_of('/');
    if (slash != std::string::npos) id = id.substr(slash + 1);
    const size_t dot = id.find_last_of('.');
    if (dot != std::string::npos) id = id.substr(0, dot);
    return load_dataset_text(read_file(values_file), read_file(meta_file), id);
}

std::string serialize_values_csv(const TabularTask& task) {
    std::ostringstream out;
    for (size_t c = 0; c < task.features.size(); ++c) {
        if (c) out << ',';
        out << csv::write_field(task.features[c].name);
    }
    out << ',' << csv::write_field(task.meta.label_name) << '\n';
    for (const Row& row : task.rows) {
        for (size_t c = 0; c < row.values.size(); ++c) {
            const Cell& cell = row.values[c];
            if (c) out << ',';
            switch (cell.state) {
                case Cell::State::numeric: out << format_exact(cell.number); break;
                case Cell::State::text: out << csv::write_field(cell.text); break;
                case Cell::State::missing: break;
            }
        }
        out << ',';
        if (task.kind == TaskKind::classification)
            out << csv::write_field(task.meta.class_names.at(static_cast<size_t>(row.label)));
        else
            out << format_exact(row.label);
        out << '\n';
    }
    return out.str();
}

std::string serialize_meta_json(const TabularTask& task) {
    json j;
    j["label_column"] = task.meta.label_name;
    if (!task.meta.background.empty()) j["task_background"] = task.meta.background;
    if (!task.meta.label_description.empty()) j["label_description"] = task.meta.label_description;
    if (task.kind == TaskKind::classification) j["class_names"] = task.meta.class_names;
    json features = json::array();
    for (const FeatureSpec& f : task.features) {
        json jf;
        jf["name"] = f.name;
        jf["kind"] = to_string(f.kind);
        if (!f.description.empty()) jf["description"] = f.description;
        features.push_back(std::move(jf));
    }
    j["features"] = std::move(features);
    return j.dump(2) + "\n";
}

void save_dataset(const TabularTask& task, const std::string& values_file,
                  const std::string& meta_file) {
    std::ofstream values(values_file, std::ios::binary);
    if (!values) throw DataError("cannot write " + values_file);
    values << serialize_values_csv(task);
    std::ofstream meta(meta_file, std::ios::binary);
    if (!meta) throw DataError("cannot write " + meta_file);
    meta << serialize_meta_json(task);
}

namespace {

// Classification eligibility for a candidate label column: 2..10 distinct
// values, each appearing at least twice. Free-text columns never qualify.
struct LabelCandidate {
    bool eligible = false;
    TaskKind kind = TaskKind::regression;
    std::vector<std::string> class_names;  // classification only
};

LabelCandidate assess_column(const TabularTask& task, size_t col) {
    LabelCandidate out;
    const FeatureSpec& spec = task.features[col];
    if (spec.kind == FeatureKind::numerical) {
        for (const Row& row : task.rows)
            if (!row.values[col].is_missing()) {
                out.eligible = true;
                out.kind = TaskKind::regression;
                return out;
            }
        return out;
    }
    std::vector<std::string> order;
    std::map<std::string, int> counts;
    for (const Row& row : task.rows) {
        const Cell& cell = row.values[col];
        if (cell.is_missing()) continue;
        if (counts.emplace(cell.text, 0).second) order.push_back(cell.text);
        ++counts[cell.text];
    }
    if (order.size() < 2 || order.size() > 10) return out;
    for (const auto& [value, count] : counts)
        if (count < 2) return out;
    out.eligible = true;
    out.kind = TaskKind::classification;
    out.class_names = std::move(order);
    return out;
}

TabularTask retarget(const TabularTask& base, size_t col, const LabelCandidate& candidate) {
    TabularTask task;
    task.id = base.id + ":" + base.features[col].name;
    task.kind = candidate.kind;
    task.meta.background = base.meta.background;
    task.meta.label_name = base.features[col].name;
    task.meta.label_description = base.features[col].description;
    if (candidate.kind == TaskKind::classification) {
        task.meta.class_names = candidate.class_names;
        task.n_classes = static_cast<int>(candidate.class_names.size());
    }

    // Remaining columns keep source order; the old label joins as a feature.
    for (size_t c = 0; c < base.features.size(); ++c) {
        if (c == col) continue;
        task.features.push_back(base.features[c]);
    }
    FeatureSpec old_label;
    old_label.name = base.meta.label_name;
    old_label.kind = base.kind == TaskKind::classification ? FeatureKind::categorical
                                                           : FeatureKind::numerical;
    old_label.description = base.meta.label_description;
    task.features.push_back(std::move(old_label));

    for (const Row& row : base.rows) {
        const Cell& new_label = row.values[col];
        if (new_label.is_missing()) continue;  // missing label -> row dropped
        Row derived;
        if (candidate.kind == TaskKind::classification) {
            const auto it = std::find(candidate.class_names.begin(), candidate.class_names.end(),
                                      new_label.text);
            derived.label = static_cast<double>(it - candidate.class_names.begin());
        } else {
            derived.label = new_label.number;
        }
        for (size_t c = 0; c < row.values.size(); ++c) {
            if (c == col) continue;
            derived.values.push_back(row.values[c]);
        }
        if (base.kind == TaskKind::classification)
            derived.values.push_back(
                Cell::str(base.meta.class_names.at(static_cast<size_t>(row.label))));
        else
            derived.values.push_back(Cell::num(row.label));
        task.rows.push_back(std::move(derived));
    }
    return task;
}

}  // namespace

std::vector<TabularTask> derive_tasks(const TabularTask& task_pool, int max_tasks) {
    if (max_tasks < 1) throw ConfigError("derive_tasks: max_tasks must be >= 1");
    std::vector<TabularTask> tasks;
    tasks.push_back(task_pool);  // original label column always comes first
    for (size_t c = 0; c < task_pool.features.size(); ++c) {
        if (static_cast<int>(tasks.size()) >= max_tasks) break;
        const LabelCandidate candidate = assess_column(task_pool, c);
        if (!candidate.eligible) continue;
        TabularTask derived = retarget(task_pool, c, candidate);
        if (derived.rows.size() < 2) continue;
        tasks.push_back(std::move(derived));
    }
    if (tasks.empty()) throw DataError("derive_tasks: no eligible label column");
    return tasks;
}

ValidationReport validate_task(const TabularTask& task) {
    ValidationReport report;
    auto add = [&](std::string code, std::string detail) {
        report.issues.push_back({std::move(code), std::move(detail)});
    };

    if (task.features.empty()) add("no features", "task must have M >= 1 features");
    std::set<std::string> names;
    for (const FeatureSpec& f : task.features) {
        if (f.name.empty()) add("empty feature name", "feature names must be nonempty");
        if (!names.insert(f.name).second)
            add("duplicate feature name", "feature '" + f.name + "' appears twice");
    }
    if (task.rows.size() < 2)
        add("too few rows", "task has " + std::to_string(task.rows.size()) + " rows, needs >= 2");

    if (task.kind == TaskKind::classification) {
        if (task.n_classes < 2)
            add("class count", "classification needs C >= 2, got " + std::to_string(task.n_classes));
        if (static_cast<int>(task.meta.class_names.size()) != task.n_classes)
            add("class names", "class_names length != C");
        std::set<std::string> unique(task.meta.class_names.begin(), task.meta.class_names.end());
        if (unique.size() != task.meta.class_names.size())
            add("duplicate class name", "class_names entries must be unique");
    } else if (!task.meta.class_names.empty()) {
        add("class names", "regression task must have empty class_names");
    }

    const size_t m = task.features.size();
    for (size_t r = 0; r < task.rows.size(); ++r) {
        const Row& row = task.rows[r];
        const std::string where = "row " + std::to_string(r);
        if (row.values.size() != m) {
            add("row arity", where + " has " + std::to_string(row.values.size()) +
                                " values, expected " + std::to_string(m));
            continue;
        }
        for (size_t c = 0; c < m; ++c) {
            const Cell& cell = row.values[c];
            if (cell.is_missing()) continue;
            if (cell.state == Cell::State::numeric) {
                if (!std::isfinite(cell.number))
                    add("non-finite cell", where + ", column '" + task.features[c].name + "'");
                if (task.features[c].kind != FeatureKind::numerical)
                    add("kind mismatch", where + ", column '" + task.features[c].name +
                                             "' holds a number in a categorical column");
            } else {
                if (cell.text.empty())
                    add("empty categorical cell", where + ", column '" + task.features[c].name + "'");
                if (task.features[c].kind != FeatureKind::categorical)
                    add("kind mismatch", where + ", column '" + task.features[c].name +
                                             "' holds text in a numerical column");
            }
        }
        if (task.kind == TaskKind::classification) {
            if (!is_integral_label(row.label) || row.label < 0 ||
                row.label >= static_cast<double>(task.n_classes))
                add("label out of range", where + " label " + format_exact(row.label));
        } else if (!std::isfinite(row.label)) {
            add("non-finite label", where);
        }
    }
    return report;
}

}  // namespace gtl
