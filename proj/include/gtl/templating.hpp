#pragma once

#include <map>
#include <string>
#include <vector>

#include "gtl/sampler.hpp"
#include "gtl/tabular.hpp"

namespace gtl {

enum class SegmentRole { meta, feature_value, target, target_placeholder };

std::string to_string(SegmentRole role);

struct Segment {
    std::string text;
    SegmentRole role = SegmentRole::meta;
};

struct RenderedSample {
    std::vector<Segment> segments;
    std::string case_id;
    size_t query_row = 0;      // row index this sample asks about
    std::string answer_text;   // canonical target string for the query row

    std::string text() const;  // byte-for-byte concatenation of the segments
};

// Versioned instruction wording. The canonical v1 resource ships embedded
// and as resources/templates_v1.json; alternate wordings can be loaded to
// produce differently phrased corpora without touching the renderers.
class TemplateResource {
public:
    static const TemplateResource& builtin();
    static TemplateResource from_json(const std::string& json_text);

    int version() const { return version_; }
    const std::string& get(TemplateKind tmpl, const std::string& key) const;

private:
    int version_ = 0;
    std::map<std::string, std::string> strings_;
};

// The exact JSON text of the embedded v1 resource.
const std::string& builtin_template_json();

// Canonical cell formatting: categorical strings verbatim; numerics as the
// shortest decimal with at most 6 significant digits; magnitudes below 1e-4
// or at/above 1e7 in scientific notation with 4 significant digits;
// integer-valued numbers without a decimal point. Missing cells render as
// "unknown".
std::string format_value(const Cell& cell, FeatureKind kind);
std::string format_number(double v);

// Canonical answer string: class index as a decimal integer, or
// format_number for regression targets.
std::string answer_string(const TabularTask& task, const Row& row);

struct RenderInput {
    const TabularTask* task = nullptr;
    std::vector<const Row*> demonstrations;
    const Row* query = nullptr;
    bool training = false;  // true: answer inline as target; false: placeholder
};

RenderedSample render_t_lang(const RenderInput& input, const TemplateResource& resource);
RenderedSample render_t_table(const RenderInput& input, const TemplateResource& resource);
RenderedSample render_t_anony(const RenderInput& input, const TemplateResource& resource);

// One RenderedSample per query row in the context set, dispatched by
// case.tmpl. Training mode renders the true answer as the final target
// segment; inference mode ends with an empty target_placeholder and stores
// the answer in answer_text.
std::vector<RenderedSample> render_case(const CaseSpec& spec, const ContextSet& context,
                                        const TabularTask& task, const TemplateResource& resource,
                                        bool training);

}  // namespace gtl
