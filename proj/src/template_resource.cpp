#include "gtl/templating.hpp"

namespace gtl {

// Embedded copy of resources/templates_v1.json. A unit test keeps the two
// in sync so corpora built from the installed binary and from the repo file
// are identical.
const std::string& builtin_template_json() {
    static const std::string text = R"json({
  "version": 1,
  "t_lang": {
    "task_instruction_classification": "Predict {label}. Answer with one of: {classes}.",
    "task_instruction_regression": "Predict {label}. Answer with a number.",
    "context_preamble": "Here are {n} examples with known answers.",
    "query_lead_in": "Now answer for the following case.",
    "feature_sentence": "The {feature} is {value}.",
    "answer_cue": "The {label} is {value}."
  },
  "t_table": {
    "task_instruction_classification": "Fill in the {label} cell of the last table row. Answer with one of: {classes}.",
    "task_instruction_regression": "Fill in the {label} cell of the last table row. Answer with a number.",
    "context_preamble": "The first {n} table rows have known answers.",
    "descriptions_header": "Column descriptions:",
    "description_item": "- {feature}: {description}"
  },
  "t_anony": {
    "task_instruction_classification": "Fill in the target cell of the last table row. Answer with one of: {classes}.",
    "task_instruction_regression": "Fill in the target cell of the last table row. Answer with a number.",
    "context_preamble": "The first {n} table rows have known answers."
  }
}
)json";
    return text;
}

}  // namespace gtl
