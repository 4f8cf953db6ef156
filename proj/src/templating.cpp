#include "gtl/templating.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gtl {

std::string to_string(SegmentRole role) {
    switch (role) {
        case SegmentRole::meta: return "meta";
        case SegmentRole::feature_value: return "feature_value";
        case SegmentRole::target: return "target";
        case SegmentRole::target_placeholder: return "target_placeholder";
    }
    return "?";
}

std::string RenderedSample::text() const {
    std::string out;
    size_t total = 0;
    for (const Segment& s : segments) total += s.text.size();
    out.reserve(total);
    for (const Segment& s : segments) out += s.text;
    return out;
}

TemplateResource TemplateResource::from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("template resource: invalid JSON: ") + e.what());
    }
    TemplateResource res;
    if (!j.contains("version") || !j["version"].is_number_integer())
        throw ConfigError("template resource: missing integer 'version'");
    res.version_ = j["version"].get<int>();
    for (const auto& [tmpl, table] : j.items()) {
        if (tmpl == "version") continue;
        for (const auto& [key, value] : table.items())
            res.strings_[tmpl + "." + key] = value.get<std::string>();
    }
    static const char* required[] = {
        "t_lang.task_instruction_classification", "t_lang.task_instruction_regression",
        "t_lang.context_preamble", "t_lang.query_lead_in", "t_lang.feature_sentence",
        "t_lang.answer_cue", "t_table.task_instruction_classification",
        "t_table.task_instruction_regression", "t_table.context_preamble",
        "t_table.descriptions_header", "t_table.description_item",
        "t_anony.task_instruction_classification", "t_anony.task_instruction_regression",
        "t_anony.context_preamble"};
    for (const char* key : required)
        if (!res.strings_.count(key))
            throw ConfigError(std::string("template resource: missing key '") + key + "'");
    return res;
}

const TemplateResource& TemplateResource::builtin() {
    static const TemplateResource res = from_json(builtin_template_json());
    return res;
}

const std::string& TemplateResource::get(TemplateKind tmpl, const std::string& key) const {
    const auto it = strings_.find(to_string(tmpl) + "." + key);
    if (it == strings_.end())
        throw ConfigError("template resource: missing key '" + to_string(tmpl) + "." + key + "'");
    return it->second;
}

namespace {

std::string substitute(std::string text, const std::string& placeholder, const std::string& value) {
    const std::string token = "{" + placeholder + "}";
    size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
    return text;
}

std::string scientific4(double v) {
    const bool negative = v < 0;
    double a = std::abs(v);
    int exp = static_cast<int>(std::floor(std::log10(a)));
    double mantissa = a / std::pow(10.0, exp);
    // Round the mantissa to 4 significant digits; rounding can push it to 10.
    mantissa = std::round(mantissa * 1000.0) / 1000.0;
    if (mantissa >= 10.0) {
        mantissa /= 10.0;
        ++exp;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", mantissa);
    std::string m(buf);
    while (!m.empty() && m.back() == '0') m.pop_back();
    if (!m.empty() && m.back() == '.') m.pop_back();
    return (negative ? "-" : "") + m + "e" + std::to_string(exp);
}

}  // namespace

std::string format_number(double v) {
    if (!std::isfinite(v)) throw DataError("format_number: non-finite value");
    if (v == 0.0) return "0";
    const double a = std::abs(v);
    if (a < 1e-4 || a >= 1e7) return scientific4(v);
    if (v == std::trunc(v)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    std::string s(buf);
    // %.6g may round a near-1e7 value into exponent form; renormalize.
    if (s.find('e') != std::string::npos || s.find('E') != std::string::npos)
        return scientific4(v);
    return s;
}

std::string format_value(const Cell& cell, FeatureKind kind) {
    (void)kind;
    switch (cell.state) {
        case Cell::State::missing: return "unknown";
        case Cell::State::text: return cell.text;
        case Cell::State::numeric: return format_number(cell.number);
    }
    return "unknown";
}

std::string answer_string(const TabularTask& task, const Row& row) {
    if (task.kind == TaskKind::classification)
        return std::to_string(static_cast<int>(row.label));
    return format_number(row.label);
}

namespace {

// Builds the segment list, merging adjacent meta text.
class SampleBuilder {
public:
    void meta(const std::string& text) {
        if (text.empty()) return;
        if (!segments_.empty() && segments_.back().role == SegmentRole::meta)
            segments_.back().text += text;
        else
            segments_.push_back({text, SegmentRole::meta});
    }
    void value(const std::string& text) { segments_.push_back({text, SegmentRole::feature_value}); }
    void target(const std::string& text) { segments_.push_back({text, SegmentRole::target}); }
    void placeholder() { segments_.push_back({"", SegmentRole::target_placeholder}); }
    std::vector<Segment> take() { return std::move(segments_); }

private:
    std::vector<Segment> segments_;
};

// Markdown cell sanitation: the delimiter would break the table grid, and
// newlines would break the row.
std::string sanitize_cell(std::string text) {
    for (char& c : text) {
        if (c == '|') c = '/';
        if (c == '\n' || c == '\r') c = ' ';
    }
    return text;
}

std::string class_list(const TabularTask& task, bool with_names) {
    std::ostringstream out;
    bool trivial = true;
    for (int c = 0; c < task.n_classes; ++c)
        if (task.meta.class_names[static_cast<size_t>(c)] != std::to_string(c)) trivial = false;
    for (int c = 0; c < task.n_classes; ++c) {
        if (c) out << ", ";
        out << c;
        if (with_names && !trivial) out << " = " << sanitize_cell(task.meta.class_names[static_cast<size_t>(c)]);
    }
    return out.str();
}

std::string label_phrase(const TabularTask& task) {
    return task.meta.label_description.empty() ? task.meta.label_name
                                               : task.meta.label_description;
}

std::string instruction_for(const RenderInput& input, const TemplateResource& res,
                            TemplateKind tmpl, bool with_meta) {
    const TabularTask& task = *input.task;
    std::string text;
    if (task.kind == TaskKind::classification) {
        text = res.get(tmpl, "task_instruction_classification");
        text = substitute(text, "classes", class_list(task, with_meta));
    } else {
        text = res.get(tmpl, "task_instruction_regression");
    }
    if (with_meta) text = substitute(text, "label", label_phrase(task));
    return text;
}

void check_input(const RenderInput& input) {
    if (!input.task || !input.query) throw ConfigError("render: task and query are required");
    const size_t m = input.task->feature_count();
    if (input.query->values.size() != m) throw DataError("render: query row arity mismatch");
    for (const Row* demo : input.demonstrations)
        if (!demo || demo->values.size() != m) throw DataError("render: demonstration arity mismatch");
}

void finish_answer(SampleBuilder& builder, RenderedSample& out, const RenderInput& input) {
    out.answer_text = answer_string(*input.task, *input.query);
    if (input.training)
        builder.target(out.answer_text);
    else
        builder.placeholder();
    out.segments = builder.take();
}

// Shared body for the two Markdown-table templates.
RenderedSample render_table_like(const RenderInput& input, const TemplateResource& res,
                                 TemplateKind tmpl) {
    check_input(input);
    const TabularTask& task = *input.task;
    const bool anonymous = tmpl == TemplateKind::t_anony;
    SampleBuilder builder;
    RenderedSample out;

    std::vector<std::string> headers;
    for (size_t i = 0; i < task.features.size(); ++i) {
        if (anonymous) {
            headers.push_back("f" + std::to_string(i + 1));
        } else {
            if (task.features[i].name.find('|') != std::string::npos)
                throw DataError("t_table: feature name '" + task.features[i].name +
                                "' contains the cell delimiter '|'");
            headers.push_back(sanitize_cell(task.features[i].name));
        }
    }
    if (!anonymous && task.meta.label_name.find('|') != std::string::npos)
        throw DataError("t_table: label name contains the cell delimiter '|'");
    headers.push_back(anonymous ? "target" : sanitize_cell(task.meta.label_name));

    if (!anonymous) {
        if (!task.meta.background.empty()) builder.meta(task.meta.background + "\n");
        std::vector<std::string> items;
        for (const FeatureSpec& f : task.features)
            if (!f.description.empty()) {
                std::string item = res.get(tmpl, "description_item");
                item = substitute(item, "feature", sanitize_cell(f.name));
                item = substitute(item, "description", sanitize_cell(f.description));
                items.push_back(std::move(item));
            }
        if (!task.meta.label_description.empty()) {
            std::string item = res.get(tmpl, "description_item");
            item = substitute(item, "feature", sanitize_cell(task.meta.label_name));
            item = substitute(item, "description", sanitize_cell(task.meta.label_description));
            items.push_back(std::move(item));
        }
        if (!items.empty()) {
            builder.meta(res.get(tmpl, "descriptions_header") + "\n");
            for (const std::string& item : items) builder.meta(item + "\n");
        }
    }

    builder.meta(instruction_for(input, res, tmpl, !anonymous) + "\n");
    if (!input.demonstrations.empty()) {
        std::string preamble = res.get(tmpl, "context_preamble");
        preamble = substitute(preamble, "n", std::to_string(input.demonstrations.size()));
        builder.meta(preamble + "\n");
    }

    std::string header_row = "|";
    std::string divider_row = "|";
    for (const std::string& h : headers) {
        header_row += " " + h + " |";
        divider_row += " --- |";
    }
    builder.meta(header_row + "\n" + divider_row + "\n");

    auto emit_cells = [&](const Row& row) {
        for (size_t i = 0; i < row.values.size(); ++i) {
            builder.meta("| ");
            builder.value(sanitize_cell(format_value(row.values[i], task.features[i].kind)));
            builder.meta(" ");
        }
        builder.meta("| ");
    };
    for (const Row* demo : input.demonstrations) {
        emit_cells(*demo);
        builder.target(sanitize_cell(answer_string(task, *demo)));
        builder.meta(" |\n");
    }
    emit_cells(*input.query);
    finish_answer(builder, out, input);
    return out;
}

}  // namespace

RenderedSample render_t_lang(const RenderInput& input, const TemplateResource& res) {
    check_input(input);
    const TabularTask& task = *input.task;
    constexpr TemplateKind tmpl = TemplateKind::t_lang;
    SampleBuilder builder;
    RenderedSample out;

    if (!task.meta.background.empty()) builder.meta(task.meta.background + "\n");
    builder.meta(instruction_for(input, res, tmpl, /*with_meta=*/true) + "\n");

    const std::string sentence = res.get(tmpl, "feature_sentence");
    const std::string cue = res.get(tmpl, "answer_cue");
    auto emit_features = [&](const Row& row) {
        for (size_t i = 0; i < row.values.size(); ++i) {
            const FeatureSpec& f = task.features[i];
            const std::string desc = f.description.empty() ? f.name : f.description;
            std::string line = substitute(sentence, "feature", desc);
            const size_t slot = line.find("{value}");
            if (slot == std::string::npos)
                throw ConfigError("template resource: t_lang.feature_sentence needs {value}");
            builder.meta(line.substr(0, slot));
            builder.value(format_value(row.values[i], f.kind));
            builder.meta(line.substr(slot + 7) + "\n");
        }
    };
    std::string cue_line = substitute(cue, "label", task.meta.label_name);
    const size_t answer_slot = cue_line.find("{value}");
    if (answer_slot == std::string::npos)
        throw ConfigError("template resource: t_lang.answer_cue needs {value}");
    const std::string cue_prefix = cue_line.substr(0, answer_slot);
    const std::string cue_suffix = cue_line.substr(answer_slot + 7);

    if (!input.demonstrations.empty()) {
        std::string preamble = res.get(tmpl, "context_preamble");
        preamble = substitute(preamble, "n", std::to_string(input.demonstrations.size()));
        builder.meta(preamble + "\n");
        for (const Row* demo : input.demonstrations) {
            emit_features(*demo);
            builder.meta(cue_prefix);
            builder.target(answer_string(task, *demo));
            builder.meta(cue_suffix + "\n");
        }
        builder.meta(res.get(tmpl, "query_lead_in") + "\n");
    }
    emit_features(*input.query);
    builder.meta(cue_prefix);
    finish_answer(builder, out, input);
    return out;
}

RenderedSample render_t_table(const RenderInput& input, const TemplateResource& res) {
    return render_table_like(input, res, TemplateKind::t_table);
}

RenderedSample render_t_anony(const RenderInput& input, const TemplateResource& res) {
    return render_table_like(input, res, TemplateKind::t_anony);
}

std::vector<RenderedSample> render_case(const CaseSpec& spec, const ContextSet& context,
                                        const TabularTask& task, const TemplateResource& resource,
                                        bool training) {
    std::vector<RenderedSample> samples;
    samples.reserve(context.query_rows.size());
    RenderInput input;
    input.task = &task;
    input.training = training;
    for (size_t idx : context.examples) input.demonstrations.push_back(&task.rows.at(idx));
    for (size_t row : context.query_rows) {
        input.query = &task.rows.at(row);
        RenderedSample sample;
        switch (spec.tmpl) {
            case TemplateKind::t_lang: sample = render_t_lang(input, resource); break;
            case TemplateKind::t_table: sample = render_t_table(input, resource); break;
            case TemplateKind::t_anony: sample = render_t_anony(input, resource); break;
        }
        sample.case_id = spec.case_id();
        sample.query_row = row;
        samples.push_back(std::move(sample));
    }
    return samples;
}

}  // namespace gtl
