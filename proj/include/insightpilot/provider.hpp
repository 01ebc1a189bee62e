#pragma once

// The language-model boundary: prompt documents for every conversation the
// engine holds, the Provider interface, and total parsers for the
// structured replies.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/text.hpp"

namespace insightpilot {

enum class PromptKind { Onboarding, TypeSelection, Assessment, Report, Latex, OpenQuestion };

inline std::string_view to_string(PromptKind k) {
  switch (k) {
    case PromptKind::Onboarding: return "onboarding";
    case PromptKind::TypeSelection: return "type_selection";
    case PromptKind::Assessment: return "assessment";
    case PromptKind::Report: return "report";
    case PromptKind::Latex: return "latex";
    case PromptKind::OpenQuestion: return "open_question";
  }
  return "open_question";
}

/// A labelled block. Sections without a label are fixed instruction text.
struct PromptSection {
  std::string label;
  std::string body;
  bool operator==(const PromptSection&) const = default;
};

struct PromptDoc {
  PromptKind kind = PromptKind::OpenQuestion;
  std::vector<PromptSection> sections;
  std::string formatRequirements;

  const PromptSection* find(std::string_view label) const {
    for (const auto& s : sections)
      if (s.label == label) return &s;
    return nullptr;
  }

  std::string body_of(std::string_view label) const {
    const auto* s = find(label);
    return s ? s->body : std::string{};
  }

  /// Stable text serialization sent to the model.
  std::string render() const {
    std::string out;
    for (const auto& s : sections) {
      if (s.label.empty()) {
        out += s.body;
        out += '\n';
      } else {
        out += "{" + s.label + "}\n" + s.body + "\n";
      }
    }
    return out;
  }
};

/// Block label -> content.
using PromptInputs = std::map<std::string, std::string>;

namespace prompts {

inline constexpr std::string_view kSpecificationData = "specification data";
inline constexpr std::string_view kCurrentSelection = "current selection";
inline constexpr std::string_view kViewStyleInfo = "view style info";
inline constexpr std::string_view kViewsCoordinationInfo = "views coordination info";
inline constexpr std::string_view kAnalyticalTask = "analytical task";
inline constexpr std::string_view kInsightFunctionApis = "insight function APIs";
inline constexpr std::string_view kInsightResults = "insight calculation results";
inline constexpr std::string_view kHistoricalData = "historical analysis data";
inline constexpr std::string_view kOtherRequirements = "other requirements";
inline constexpr std::string_view kSummarizedReport = "summarized report";
inline constexpr std::string_view kSettingRequirements = "setting requirements";
inline constexpr std::string_view kQuestion = "question";
inline constexpr std::string_view kCurrentState = "current state";
inline constexpr std::string_view kFormatRequirements = "format requirements";

inline std::string default_format(PromptKind k) {
  switch (k) {
    case PromptKind::Onboarding:
      return "Return only a JSON array of tour steps, each {\"title\": string, \"description\": string}. "
             "The first step introduces the whole system. Then give one step per view in the given order; "
             "its title is the viewName. The description is HTML covering Type, Encoding and Coordination, "
             "at most 60 words.";
    case PromptKind::TypeSelection:
      return "Return only a JSON array. Each element is {\"functionName\": string, \"viewName\": string, "
             "\"variableName\": string, \"dimName\": string, \"relevance\": number in [0,1]}. Functions that "
             "compare two views add \"pairedViewName\" and \"pairedVariableName\".";
    case PromptKind::Assessment:
      return "Return only a JSON array with one object per insight: {\"insightId\": string, \"description\": "
             "one complete sentence, \"impact\": number in [0,1], \"relevance\": number in [0,1], "
             "\"explanation\": at most 40 words, \"annotations\": [{\"viewName\", \"dimName\", \"value\": [...]}]}.";
    case PromptKind::Report:
      return "Return only a JSON object {\"title\": string, \"items\": [{\"heading\": string, \"bullets\": "
             "[string], \"imageName\": string}], \"conclusion\": string} with one item per step, in step order.";
    case PromptKind::Latex:
      return "Return only the LaTeX source of a beamer document: a title frame, one frame per item with its "
             "bullets and \\includegraphics of its image, and a conclusion frame.";
    case PromptKind::OpenQuestion:
      return "Return only a JSON object {\"answer\": string of at most 80 words, \"highlights\": "
             "[{\"viewName\", \"dimName\", \"value\": [...]}]}.";
  }
  return {};
}

}  // namespace prompts

/// Assembles the prompt for `kind`. Throws MissingInput naming the first
/// required block that is absent or blank.
inline PromptDoc build_prompt(PromptKind kind, const PromptInputs& inputs) {
  using namespace prompts;
  PromptDoc doc;
  doc.kind = kind;
  auto fixed = [&](std::string body) { doc.sections.push_back({"", std::move(body)}); };
  auto block = [&](std::string_view label, bool required) {
    auto it = inputs.find(std::string(label));
    if (it == inputs.end() || text::trim(it->second).empty()) {
      if (required) fail(ErrorCode::MissingInput, std::string(label), std::string(label));
      return;
    }
    doc.sections.push_back({std::string(label), it->second});
  };
  auto it = inputs.find(std::string(kFormatRequirements));
  doc.formatRequirements = it != inputs.end() && !text::trim(it->second).empty() ? it->second : default_format(kind);
  auto format = [&] { doc.sections.push_back({std::string(kFormatRequirements), doc.formatRequirements}); };

  switch (kind) {
    case PromptKind::Onboarding:
      fixed("Here are the specifications of a visual analytics system.");
      block(kSpecificationData, true);
      fixed("The specification includes the system-level, view-level, and views’ coordination information. "
            "You need to introduce each view's style (data meaning, visual mapping) and the relationship between "
            "views. Please give your answer in the following format:");
      format();
      break;
    case PromptKind::TypeSelection:
      for (auto label : {kCurrentSelection, kViewStyleInfo, kViewsCoordinationInfo, kAnalyticalTask, kInsightFunctionApis})
        if (!inputs.contains(std::string(label)) || text::trim(inputs.at(std::string(label))).empty())
          fail(ErrorCode::MissingInput, std::string(label), std::string(label));
      fixed("When the user makes an action, the system changes. You should analyze data types of connected views "
            "based on the coordination information between views.");
      block(kCurrentSelection, true);
      block(kViewStyleInfo, true);
      block(kViewsCoordinationInfo, true);
      fixed("According to the data info in each view and the analytical task, you should select all suitable "
            "analytical functions related to the user's task. You also need to give a relevance score to assess "
            "how closely related the insight is to the task.");
      block(kAnalyticalTask, true);
      block(kInsightFunctionApis, true);
      fixed("Please give your answer in the following format:");
      format();
      break;
    case PromptKind::Assessment:
      fixed("The selected insights are implemented, and the result is returned, including the value and "
            "significance score. You also need to give an impact score. You can consider combining your data "
            "analysis experience to evaluate from the following aspects: potential consequences, urgency and "
            "timeliness, and influence on decision-making.");
      block(kInsightResults, true);
      if (inputs.contains(std::string(kAnalyticalTask))) {
        fixed("Also give a relevance score for how closely each insight relates to the analytical task.");
        block(kAnalyticalTask, false);
      }
      fixed("Please give your answer in the following format:");
      format();
      break;
    case PromptKind::Report:
      fixed("Here is a historical analysis of the system data. The data contains insights that need to be reported:");
      block(kHistoricalData, true);
      fixed("Your task is to write an insight report to present these findings. The amount of insight should be "
            "equal to the number of steps for given data. Ensure you include both a cover(report title) and a "
            "conclusion.");
      block(kOtherRequirements, false);
      format();
      break;
    case PromptKind::Latex:
      if (!inputs.contains(std::string(kSummarizedReport)) || text::trim(inputs.at(std::string(kSummarizedReport))).empty())
        fail(ErrorCode::MissingInput, std::string(kSummarizedReport), std::string(kSummarizedReport));
      fixed("Transform the summarized report into LaTeX slides. For each slide, if an insight exhibits a clear "
            "hierarchy, segment it using bullet points. Accompany each insight with a screenshot from the system. "
            "The filenames for these screenshots can be found in the historical analysis data. Please integrate "
            "the following commands for style configuration.");
      block(kSettingRequirements, false);
      block(kSummarizedReport, true);
      block(kHistoricalData, false);
      format();
      break;
    case PromptKind::OpenQuestion:
      fixed("The user asks a follow-up question about the current state of the visual analytics system. Answer "
            "it from the data provided and point to the source data that supports the answer.");
      block(kQuestion, true);
      block(kCurrentState, false);
      format();
      break;
  }
  return doc;
}

struct Limits {
  int maxTokens = 1024;
  int timeoutMs = 30000;
};

/// Anything that turns a prompt into reply text. Implementations must be
/// safe to call from several threads.
class Provider {
 public:
  virtual ~Provider() = default;
  /// Throws Error(ProviderError) on transport failure or timeout.
  virtual std::string complete(const PromptDoc& prompt, const Limits& limits) = 0;
  virtual std::string id() const = 0;
  /// True when replies come from the deterministic rule engine.
  virtual bool is_mock() const { return false; }
};

/// Caps the number of in-flight completions on a shared provider.
class BoundedProvider : public Provider {
 public:
  explicit BoundedProvider(std::shared_ptr<Provider> inner, std::ptrdiff_t parallelism = 2)
      : inner_(std::move(inner)), slots_(std::max<std::ptrdiff_t>(1, parallelism)) {}

  std::string complete(const PromptDoc& prompt, const Limits& limits) override {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};
    return inner_->complete(prompt, limits);
  }
  std::string id() const override { return inner_->id(); }
  bool is_mock() const override { return inner_->is_mock(); }

 private:
  std::shared_ptr<Provider> inner_;
  std::counting_semaphore<> slots_;
};

// ---------------------------------------------------------------------------
// Reply parsing. Every parser is total: any byte string yields a value or a
// typed Error, never a crash.

using BracedValue = std::variant<double, std::string>;

/// Extracts every maximal {...} span in order (nested braces stay inside
/// their outer span; an unclosed brace ends extraction). Spans that parse
/// entirely as a number become numbers.
inline std::vector<BracedValue> parse_braced_answers(std::string_view reply) {
  std::vector<BracedValue> out;
  std::size_t i = 0;
  while (i < reply.size()) {
    if (reply[i] != '{') {
      ++i;
      continue;
    }
    int depth = 0;
    std::size_t j = i;
    for (; j < reply.size(); ++j) {
      if (reply[j] == '{') ++depth;
      else if (reply[j] == '}' && --depth == 0) break;
    }
    if (j >= reply.size()) break;
    std::string_view inner = reply.substr(i + 1, j - i - 1);
    double v;
    std::string cleaned = text::trim(inner);
    if (text::parse_number(cleaned, v)) out.emplace_back(v);
    else out.emplace_back(cleaned);
    i = j + 1;
  }
  return out;
}

/// Canonical formatter: "{v1}, {v2}".
inline std::string format_braced(const std::vector<BracedValue>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += "{";
    if (std::holds_alternative<double>(values[i])) out += text::format_number(std::get<double>(values[i]));
    else out += std::get<std::string>(values[i]);
    out += "}";
  }
  return out;
}

namespace detail {

/// Rewrites single-quoted string literals into JSON strings.
inline std::string normalize_quotes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool inDouble = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (inDouble) {
      out.push_back(c);
      if (c == '\\' && i + 1 < s.size()) out.push_back(s[++i]);
      else if (c == '"') inDouble = false;
      continue;
    }
    if (c == '"') {
      inDouble = true;
      out.push_back(c);
    } else if (c == '\'') {
      out.push_back('"');
      for (++i; i < s.size() && s[i] != '\''; ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
          out.push_back(s[i]);
          out.push_back(s[++i]);
        } else if (s[i] == '"') {
          out += "\\\"";
        } else {
          out.push_back(s[i]);
        }
      }
      out.push_back('"');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

/// End of the bracket group opening at `start`, honouring both quote styles.
inline std::optional<std::size_t> match_bracket(std::string_view s, std::size_t start) {
  const char open = s[start];
  const char close = open == '[' ? ']' : '}';
  int depth = 0;
  char quote = 0;
  for (std::size_t i = start; i < s.size(); ++i) {
    char c = s[i];
    if (quote) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
      continue;
    }
    if (c == '"' || c == '\'') quote = c;
    else if (c == open) ++depth;
    else if (c == close && --depth == 0) return i;
  }
  return std::nullopt;
}

inline std::optional<nlohmann::json> try_parse(std::string_view candidate) {
  auto j = nlohmann::json::parse(candidate.begin(), candidate.end(), nullptr, false);
  if (!j.is_discarded()) return j;
  std::string norm = normalize_quotes(candidate);
  j = nlohmann::json::parse(norm, nullptr, false);
  if (!j.is_discarded()) return j;
  return std::nullopt;
}

/// First parseable JSON value opening with one of `openers` in `text`.
inline std::optional<nlohmann::json> find_json(std::string_view text, std::string_view openers) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (openers.find(text[i]) == std::string_view::npos) continue;
    auto end = match_bracket(text, i);
    if (!end) continue;
    try {
      if (auto j = try_parse(text.substr(i, *end - i + 1))) return j;
    } catch (const nlohmann::json::exception&) {
    }
  }
  return std::nullopt;
}

inline std::optional<std::string> string_field(const nlohmann::json& o, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = o.find(k);
    if (it != o.end() && it->is_string()) return it->get<std::string>();
  }
  return std::nullopt;
}

inline std::optional<double> number_field(const nlohmann::json& o, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = o.find(k);
    if (it == o.end()) continue;
    if (it->is_number()) return it->get<double>();
    if (it->is_string()) {
      double v;
      if (text::parse_number(it->get<std::string>(), v)) return v;
    }
  }
  return std::nullopt;
}

inline std::string value_as_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return text::format_number(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline std::string safe_dump(const nlohmann::json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace detail

struct PlannedInsight {
  std::string functionName;
  std::string viewName;
  std::string variableName;
  std::string dimName;
  double relevance = 0.0;
  std::string pairedViewName;      ///< cross-view functions only
  std::string pairedVariableName;  ///< cross-view functions only
  bool operator==(const PlannedInsight&) const = default;
};

inline void to_json(nlohmann::json& j, const PlannedInsight& p) {
  j = {{"functionName", p.functionName},
       {"viewName", p.viewName},
       {"variableName", p.variableName},
       {"dimName", p.dimName},
       {"relevance", p.relevance}};
  if (!p.pairedViewName.empty()) j["pairedViewName"] = p.pairedViewName;
  if (!p.pairedVariableName.empty()) j["pairedVariableName"] = p.pairedVariableName;
}

inline void from_json(const nlohmann::json& j, PlannedInsight& p) {
  p.functionName = j.at("functionName").get<std::string>();
  p.viewName = j.at("viewName").get<std::string>();
  p.variableName = j.at("variableName").get<std::string>();
  p.dimName = j.at("dimName").get<std::string>();
  p.relevance = j.value("relevance", 0.0);
  p.pairedViewName = j.value("pairedViewName", "");
  p.pairedVariableName = j.value("pairedVariableName", "");
}

struct PlanParse {
  std::vector<PlannedInsight> plans;
  std::vector<std::string> issues;  ///< one per skipped entry
};

/// Reads the first JSON array of quadruples in `reply`. Malformed entries are
/// skipped and reported; no array at all is a PlanParseError.
inline PlanParse parse_plan_reply(std::string_view reply) {
  auto doc = detail::find_json(reply, "[");
  if (!doc || !doc->is_array()) fail(ErrorCode::PlanParseError, "reply contains no JSON array of planned insights");
  PlanParse out;
  for (std::size_t i = 0; i < doc->size(); ++i) {
    const auto& e = (*doc)[i];
    const std::string at = "entry " + std::to_string(i);
    if (!e.is_object()) {
      out.issues.push_back(at + ": not an object");
      continue;
    }
    auto fn = detail::string_field(e, {"functionName"});
    auto view = detail::string_field(e, {"viewName"});
    auto var = detail::string_field(e, {"variableName"});
    auto dim = detail::string_field(e, {"dimName"});
    auto rel = detail::number_field(e, {"relevance", "relevance_score"});
    if (!fn || !view || !var || !dim) {
      out.issues.push_back(at + ": missing one of functionName/viewName/variableName/dimName");
      continue;
    }
    if (!rel || !std::isfinite(*rel)) {
      out.issues.push_back(at + ": missing numeric relevance");
      continue;
    }
    PlannedInsight p{*fn, *view, *var, *dim, std::clamp(*rel, 0.0, 1.0), {}, {}};
    if (*rel < 0.0 || *rel > 1.0) out.issues.push_back(at + ": relevance clamped to [0,1]");
    p.pairedViewName = detail::string_field(e, {"pairedViewName"}).value_or("");
    p.pairedVariableName = detail::string_field(e, {"pairedVariableName"}).value_or("");
    out.plans.push_back(std::move(p));
  }
  return out;
}

struct AnnotationTriple {
  std::string viewName;
  std::string dimName;
  std::vector<std::string> value;
  bool operator==(const AnnotationTriple&) const = default;
};

inline void to_json(nlohmann::json& j, const AnnotationTriple& t) {
  j = {{"viewName", t.viewName}, {"dimName", t.dimName}, {"value", t.value}};
}
inline void from_json(const nlohmann::json& j, AnnotationTriple& t) {
  t.viewName = j.at("viewName").get<std::string>();
  t.dimName = j.at("dimName").get<std::string>();
  t.value.clear();
  const auto& v = j.at("value");
  if (v.is_array()) {
    for (const auto& x : v) t.value.push_back(detail::value_as_text(x));
  } else {
    t.value.push_back(detail::value_as_text(v));
  }
}

struct AssessmentEntry {
  std::string insightRef;
  double impact = 0.5;
  double relevance = 0.5;
  std::optional<double> finalScore;
  std::string description;
  std::string explanation;
  std::vector<AnnotationTriple> annotationTriples;
  bool impactDefaulted = false;
  bool relevanceDefaulted = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<AnnotationTriple> triple_from(const nlohmann::json& o) {
  auto view = string_field(o, {"viewName", "viewsName", "view"});
  auto dim = string_field(o, {"dimName", "fieldName", "dim"});
  if (!view || !dim || !o.contains("value")) return std::nullopt;
  AnnotationTriple t{*view, *dim, {}};
  const auto& v = o["value"];
  if (v.is_array()) {
    for (const auto& x : v) t.value.push_back(value_as_text(x));
  } else {
    t.value.push_back(value_as_text(v));
  }
  return t;
}

}  // namespace detail

/// Reads assessment objects (a JSON array, or a single object as in
/// `{'viewsName': ..., 'fieldName': ..., 'value': [...], 'final_score': ...}`).
/// Scores are clamped to [0,1]; a missing impact or relevance defaults to 0.5
/// and is flagged.
inline std::vector<AssessmentEntry> parse_assessment_reply(std::string_view reply) {
  auto doc = detail::find_json(reply, "[{");
  if (!doc || !(doc->is_array() || doc->is_object()))
    fail(ErrorCode::PlanParseError, "reply contains no JSON assessment payload");
  nlohmann::json items = doc->is_array() ? *doc : nlohmann::json::array({*doc});
  std::vector<AssessmentEntry> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& e = items[i];
    if (!e.is_object()) continue;
    AssessmentEntry a;
    a.insightRef = detail::string_field(e, {"insightId", "insightRef", "id", "insight"}).value_or("");
    auto score = [&](std::initializer_list<const char*> keys, double& slot, bool& defaulted, const char* name) {
      auto v = detail::number_field(e, keys);
      if (!v || !std::isfinite(*v)) {
        slot = 0.5;
        defaulted = true;
        a.warnings.push_back(std::string(name) + " missing; defaulted to 0.5");
        return;
      }
      slot = std::clamp(*v, 0.0, 1.0);
      if (slot != *v) a.warnings.push_back(std::string(name) + " " + text::format_number(*v) + " clamped to [0,1]");
    };
    score({"impact", "impact_score", "impactScore"}, a.impact, a.impactDefaulted, "impact");
    score({"relevance", "relevance_score", "relevanceScore"}, a.relevance, a.relevanceDefaulted, "relevance");
    if (auto f = detail::number_field(e, {"final_score", "finalScore", "score"}); f && std::isfinite(*f))
      a.finalScore = std::clamp(*f, 0.0, 1.0);
    a.description = detail::string_field(e, {"description", "insight", "sentence"}).value_or("");
    a.explanation = detail::string_field(e, {"explanation", "reason"}).value_or("");
    if (auto it = e.find("annotations"); it != e.end() && it->is_array()) {
      for (const auto& t : *it)
        if (t.is_object())
          if (auto tr = detail::triple_from(t)) a.annotationTriples.push_back(*tr);
    }
    if (auto tr = detail::triple_from(e)) a.annotationTriples.push_back(*tr);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace insightpilot
