#pragma once

// Two-step recommendation: plan insight functions from a live selection,
// then execute, score and annotate the results.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/insights.hpp"
#include "insightpilot/provider.hpp"
#include "insightpilot/spec.hpp"
#include "insightpilot/tabular.hpp"
#include "insightpilot/text.hpp"

namespace insightpilot {

struct FunctionDescriptor {
  std::string name;
  std::string description;
  bool operator==(const FunctionDescriptor&) const = default;
};

using Registry = std::vector<FunctionDescriptor>;

inline void to_json(nlohmann::json& j, const FunctionDescriptor& f) {
  j = {{"name", f.name}, {"description", f.description}};
}
inline void from_json(const nlohmann::json& j, FunctionDescriptor& f) {
  f.name = j.at("name").get<std::string>();
  f.description = j.value("description", "");
}

inline Registry registry_from_json(const nlohmann::json& j) {
  if (!j.is_array()) fail(ErrorCode::SchemaError, "function registry must be an array", "$");
  Registry reg;
  std::set<std::string> names;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "[" + std::to_string(i) + "]";
    if (!j[i].is_object() || !j[i].contains("name") || !j[i]["name"].is_string())
      fail(ErrorCode::SchemaError, "registry entry needs a string name", path + ".name");
    auto f = j[i].get<FunctionDescriptor>();
    if (!names.insert(f.name).second) fail(ErrorCode::SchemaError, "duplicate function '" + f.name + "'", path + ".name");
    reg.push_back(std::move(f));
  }
  return reg;
}

inline Registry load_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string(), path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::SyntaxError, "registry is not valid JSON", path.string());
  return registry_from_json(j);
}

inline bool registered(const Registry& reg, std::string_view name) {
  return std::any_of(reg.begin(), reg.end(), [&](const auto& f) { return f.name == name; });
}

struct ScoreWeights {
  double sig = 0.5;
  double imp = 0.2;
  double rel = 0.3;

  void validate() const {
    if (sig < 0 || imp < 0 || rel < 0) fail(ErrorCode::InvalidArgument, "score weights must be non-negative");
    if (std::fabs(sig + imp + rel - 1.0) > 1e-9) fail(ErrorCode::InvalidArgument, "score weights must sum to 1");
  }
  double combine(double significance, double impact, double relevance) const {
    return sig * significance + imp * impact + rel * relevance;
  }
};

// ---------------------------------------------------------------------------
// Selections

struct SelectionTriple {
  std::string viewName;
  std::string dimName;
  std::vector<std::string> value;
  bool operator==(const SelectionTriple&) const = default;
};

inline void to_json(nlohmann::json& j, const SelectionTriple& t) {
  j = {{"viewName", t.viewName}, {"dimName", t.dimName}, {"value", t.value}};
}
inline void from_json(const nlohmann::json& j, SelectionTriple& t) {
  AnnotationTriple a;
  from_json(j, a);
  t = {a.viewName, a.dimName, a.value};
}

struct Selection {
  std::vector<SelectionTriple> triples;
  /// Selections retained from earlier steps of the round.
  std::vector<SelectionTriple> context;
};

/// Unions the values of triples that share (viewName, dimName); first
/// appearance fixes the order.
inline std::vector<SelectionTriple> merge_triples(const std::vector<SelectionTriple>& in) {
  std::vector<SelectionTriple> out;
  for (const auto& t : in) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const auto& o) { return o.viewName == t.viewName && o.dimName == t.dimName; });
    if (it == out.end()) {
      out.push_back({t.viewName, t.dimName, {}});
      it = std::prev(out.end());
    }
    for (const auto& v : t.value)
      if (std::find(it->value.begin(), it->value.end(), v) == it->value.end()) it->value.push_back(v);
  }
  return out;
}

/// Every triple must name a view, a field that view encodes, and at least
/// one value.
inline void validate_selection(const SystemSpec& spec, const Selection& sel) {
  auto check = [&](const std::vector<SelectionTriple>& ts, const std::string& list) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto& t = ts[i];
      const std::string path = list + "[" + std::to_string(i) + "]";
      const auto* v = spec.find_view(t.viewName);
      if (!v) fail(ErrorCode::UnknownView, "no view named '" + t.viewName + "'", path + ".viewName");
      if (!v->encoding_for_field(t.dimName))
        fail(ErrorCode::UnknownDim, "view '" + t.viewName + "' does not encode '" + t.dimName + "'", path + ".dimName");
      if (t.value.empty()) fail(ErrorCode::InvalidArgument, "selection triple has no values", path + ".value");
    }
  };
  check(sel.triples, "triples");
  check(sel.context, "context");
}

/// Predicates a selection imposes on `viewName`: one per triple whose view
/// filters or brushes it.
inline SubspaceFilter subspace_for(const SystemSpec& spec, const Selection& sel, std::string_view viewName) {
  SubspaceFilter f;
  auto add = [&](const std::vector<SelectionTriple>& ts) {
    for (const auto& t : merge_triples(ts)) {
      const bool routed = std::any_of(spec.coordinations.begin(), spec.coordinations.end(), [&](const auto& c) {
        return c.sourceViewName == t.viewName && c.targetViewName == viewName &&
               (c.coordinationType == CoordinationType::Filter || c.coordinationType == CoordinationType::Brush);
      });
      if (routed) f.predicates.push_back({t.dimName, t.value});
    }
  };
  add(sel.context);
  add(sel.triples);
  return f;
}

/// Views a selection can affect, in spec order. Without any triples every
/// view is in scope.
inline std::vector<std::string> views_in_scope(const SystemSpec& spec, const Selection& sel) {
  const auto& source = sel.triples.empty() ? sel.context : sel.triples;
  std::set<std::string> scope;
  for (const auto& t : source)
    for (auto& v : reachable_views(spec, t.viewName)) scope.insert(std::move(v));
  std::vector<std::string> out;
  for (const auto& v : spec.viewsInfo)
    if (source.empty() || scope.contains(v.viewName)) out.push_back(v.viewName);
  return out;
}

// ---------------------------------------------------------------------------
// Step 1: planning

inline PromptInputs type_selection_inputs(const SystemSpec& spec, const Selection& sel, const std::string& task,
                                          const Registry& registry) {
  auto scope = views_in_scope(spec, sel);
  nlohmann::ordered_json views = nlohmann::ordered_json::array();
  for (const auto& name : scope) views.push_back(serialize_view(spec.view(name)));
  std::set<std::string> sources;
  for (const auto& t : sel.triples.empty() ? sel.context : sel.triples) sources.insert(t.viewName);
  nlohmann::ordered_json coords = nlohmann::ordered_json::array();
  for (const auto& c : spec.coordinations)
    if (sources.empty() || sources.contains(c.sourceViewName)) coords.push_back(serialize_coordination(c));
  nlohmann::json selection = {{"triples", sel.triples}, {"context", sel.context}};
  return {{std::string(prompts::kCurrentSelection), selection.dump()},
          {std::string(prompts::kViewStyleInfo), views.dump()},
          {std::string(prompts::kViewsCoordinationInfo), coords.dump()},
          {std::string(prompts::kAnalyticalTask), task.empty() ? "(none)" : task},
          {std::string(prompts::kInsightFunctionApis), nlohmann::json(registry).dump()}};
}

struct PlanOptions {
  double relevanceCutoff = 0.2;
  std::size_t maxCrossView = 2;
  Limits limits;
};

struct PlanResult {
  std::vector<PlannedInsight> plans;
  std::vector<std::string> issues;
};

/// Asks the provider for planned insights and keeps those that name a
/// registered function and an in-scope view, clear the relevance cutoff and
/// fit the cross-view cap. Sorted by relevance descending (stable).
inline PlanResult plan(const SystemSpec& spec, const Selection& sel, const std::string& task, const Registry& registry,
                       Provider& provider, const PlanOptions& opts = {}) {
  validate_selection(spec, sel);
  PlanResult out;
  if (registry.empty()) return out;
  auto doc = build_prompt(PromptKind::TypeSelection, type_selection_inputs(spec, sel, task, registry));
  auto parsed = parse_plan_reply(provider.complete(doc, opts.limits));
  out.issues = std::move(parsed.issues);
  const auto scope = views_in_scope(spec, sel);
  auto inScope = [&](const std::string& v) { return std::find(scope.begin(), scope.end(), v) != scope.end(); };
  std::vector<PlannedInsight> kept;
  for (auto& p : parsed.plans) {
    if (!registered(registry, p.functionName)) {
      out.issues.push_back("PlanParseError: unregistered function '" + p.functionName + "' dropped");
      continue;
    }
    if (!inScope(p.viewName) || (!p.pairedViewName.empty() && !inScope(p.pairedViewName))) {
      out.issues.push_back("view '" + p.viewName + "' is not reachable from the selection; '" + p.functionName +
                           "' dropped");
      continue;
    }
    if (p.relevance < opts.relevanceCutoff) continue;
    kept.push_back(std::move(p));
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.relevance > b.relevance; });
  std::size_t cross = 0;
  for (auto& p : kept) {
    auto t = insight_type_from(p.functionName);
    if (t && is_cross_view(*t) && ++cross > opts.maxCrossView) continue;
    out.plans.push_back(std::move(p));
  }
  return out;
}

inline std::string type_words(std::string_view functionName) {
  std::string s(functionName);
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

/// One question per plan, order preserved.
inline std::vector<std::string> propose_questions(const std::vector<PlannedInsight>& plans) {
  std::vector<std::string> out;
  for (const auto& p : plans) {
    const std::string& m = p.variableName;
    const std::string& d = p.dimName;
    auto t = insight_type_from(p.functionName);
    std::string q;
    switch (t.value_or(InsightType::ValueRetrieval)) {
      case InsightType::OutstandingNo1: q = "Which " + d + " has the outstanding highest " + m + "?"; break;
      case InsightType::OutstandingTop2: q = "Which two " + d + " values lead in " + m + "?"; break;
      case InsightType::OutstandingLast: q = "Which " + d + " has the outstanding lowest " + m + "?"; break;
      case InsightType::Outlier: q = "Are there outliers in " + m + " across " + d + "?"; break;
      case InsightType::ChangePoint: q = "Is there a significant change point in " + m + " over " + d + "?"; break;
      case InsightType::Trend: q = "Does " + m + " increase or decrease over " + d + "?"; break;
      case InsightType::Seasonality: q = "Does " + m + " repeat with a seasonal period over " + d + "?"; break;
      case InsightType::Correlation:
      case InsightType::CrossViewCorrelation:
        if (!p.pairedVariableName.empty()) {
          q = "Is " + m + " correlated with " + p.pairedVariableName + " over " + d + "?";
          break;
        }
        [[fallthrough]];
      default: q = "What is the " + type_words(p.functionName) + " of " + m + " by " + d + "?";
    }
    if (!t) q = "What is the " + type_words(p.functionName) + " of " + m + " by " + d + "?";
    out.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step 2: execution

struct ExecutionFailure {
  PlannedInsight plan;
  ErrorCode code;
  std::string message;
};

struct ExecutionResult {
  std::vector<Insight> insights;
  std::vector<ExecutionFailure> failures;
};

struct ExecuteOptions {
  /// Prior-step insights attached to every subject as context.
  nlohmann::json context = nlohmann::json::array();
};

namespace detail {

struct ResolvedSeries {
  Subject subject;
  Series series;
};

inline ResolvedSeries resolve_series(const SystemSpec& spec, const Table& table, const Selection& sel,
                                     const std::string& viewName, const std::string& measure, const std::string& dim) {
  const auto* view = spec.find_view(viewName);
  if (!view) fail(ErrorCode::SubjectResolutionError, "plan names unknown view '" + viewName + "'", viewName);
  const auto* menc = view->encoding_for_field(measure);
  if (!menc)
    fail(ErrorCode::SubjectResolutionError, "view '" + viewName + "' does not encode '" + measure + "'", measure);
  if (!view->encoding_for_field(dim))
    fail(ErrorCode::SubjectResolutionError, "view '" + viewName + "' does not encode '" + dim + "'", dim);
  if (!table.has_column(measure))
    fail(ErrorCode::SubjectResolutionError, "dataset has no column '" + measure + "'", measure);
  if (!table.has_column(dim)) fail(ErrorCode::SubjectResolutionError, "dataset has no column '" + dim + "'", dim);
  Aggregate agg = Aggregate::Sum;
  if (auto it = menc->extra.find("aggregate"); it != menc->extra.end() && it->is_string())
    agg = aggregate_from(it->get<std::string>()).value_or(Aggregate::Sum);
  ResolvedSeries r;
  r.subject.subspace = subspace_for(spec, sel, viewName);
  r.subject.dimension = dim;
  r.subject.measure = measure;
  r.series = group_aggregate(apply_subspace(table, r.subject.subspace), dim, measure, agg);
  return r;
}

inline std::string insight_id(const Insight& in, const PlannedInsight& p) {
  const std::string key = std::string(to_string(in.type)) + "|" + p.viewName + "|" + p.variableName + "|" + p.dimName +
                          "|" + p.pairedViewName + "|" + p.pairedVariableName + "|" +
                          nlohmann::json(in.subject.subspace).dump();
  return "ins-" + text::hex64(text::fnv1a(key)).substr(0, 12);
}

inline Insight execute_one(const PlannedInsight& p, const SystemSpec& spec, const Table& table, const Selection& sel) {
  auto type = insight_type_from(p.functionName);
  if (!type) fail(ErrorCode::SubjectResolutionError, "unknown function '" + p.functionName + "'", p.functionName);
  auto a = resolve_series(spec, table, sel, p.viewName, p.variableName, p.dimName);
  Insight in;
  if (is_provider_routed(*type)) {
    in.type = *type;
    in.subject = a.subject;
    in.data = a.series;
    in.significance = 0.5;
    in.detail = {0.5, 0.0, "provider-asserted (default 0.5)"};
    in.parameters = nlohmann::json::object();
    in.description = text::title_case(p.functionName) + " of " + p.variableName + " by " + p.dimName +
                     " is left to the language model.";
  } else if (is_cross_view(*type)) {
    std::string otherView = p.pairedViewName.empty() ? p.viewName : p.pairedViewName;
    std::string otherMeasure = p.pairedVariableName;
    if (otherMeasure.empty()) {
      const auto& view = spec.view(otherView);
      for (const auto& f : view.encoded_fields()) {
        const auto* e = view.encoding_for_field(f);
        if (f != p.variableName && f != p.dimName && e->fieldType == FieldType::Quantitative) {
          otherMeasure = f;
          break;
        }
      }
      if (otherMeasure.empty())
        fail(ErrorCode::SubjectResolutionError, "no second measure to correlate with '" + p.variableName + "'",
             p.viewName);
    }
    auto b = resolve_series(spec, table, sel, otherView, otherMeasure, p.dimName);
    in = correlation(a.series, b.series);
    in.type = *type;
    in.subject = a.subject;
    in.views = {p.viewName};
    if (otherView != p.viewName) in.views.push_back(otherView);
    in.parameters["pairedView"] = otherView;
  } else if (*type == InsightType::ValueRetrieval) {
    std::optional<std::string> key;
    for (const auto& t : sel.triples)
      if (t.dimName == p.dimName && !t.value.empty()) key = t.value.front();
    if (!key) fail(ErrorCode::SubjectResolutionError, "value retrieval needs a selected " + p.dimName, p.dimName);
    in.type = InsightType::ValueRetrieval;
    auto it = std::find(a.series.keys.begin(), a.series.keys.end(), *key);
    if (it == a.series.keys.end())
      fail(ErrorCode::KeyNotFound, "'" + *key + "' not found in " + p.dimName + " within the subspace", *key);
    const double v = a.series.values[static_cast<std::size_t>(it - a.series.keys.begin())];
    in.subject = a.subject;
    in.data = a.series;
    in.significance = 1.0;
    in.detail = {0.0, v, "lookup"};
    in.parameters = {{"key", *key}, {"value", v}};
    in.description = p.variableName + " for " + *key + " is " + text::format_fixed(v, 2) + ".";
  } else {
    in = compute_series_insight(*type, a.series);
    in.subject = a.subject;
  }
  if (in.views.empty()) in.views = {p.viewName};
  in.id = insight_id(in, p);
  return in;
}

}  // namespace detail

/// Runs every plan; per-plan failures are collected, never fatal.
inline ExecutionResult execute(const std::vector<PlannedInsight>& plans, const SystemSpec& spec, const Table& table,
                               const Selection& sel, const ExecuteOptions& opts = {}) {
  ExecutionResult out;
  for (const auto& p : plans) {
    try {
      Insight in = detail::execute_one(p, spec, table, sel);
      if (!opts.context.empty()) in.subject.context = opts.context;
      out.insights.push_back(std::move(in));
    } catch (const Error& e) {
      out.failures.push_back({p, e.code(), e.detail()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step 2: assessment and annotation

struct ScoredInsight {
  Insight insight;
  double impact = 0.0;
  double relevance = 0.0;
  double combined = 0.0;
  std::vector<AnnotationTriple> annotation;
  std::string explanation;
  std::string scoring = "provider";  ///< provider | mock | fallback
  std::vector<std::string> warnings;
};

inline void to_json(nlohmann::json& j, const ScoredInsight& s) {
  j = {{"insight", s.insight},     {"impact", s.impact},           {"relevance", s.relevance},
       {"combined", s.combined},   {"annotation", s.annotation},   {"explanation", s.explanation},
       {"scoring", s.scoring},     {"warnings", s.warnings}};
}
inline void from_json(const nlohmann::json& j, ScoredInsight& s) {
  s.insight = j.at("insight").get<Insight>();
  s.impact = j.value("impact", 0.0);
  s.relevance = j.value("relevance", 0.0);
  s.combined = j.value("combined", 0.0);
  s.annotation = j.value("annotation", std::vector<AnnotationTriple>{});
  s.explanation = j.value("explanation", "");
  s.scoring = j.value("scoring", "provider");
  s.warnings = j.value("warnings", std::vector<std::string>{});
}

/// The per-insight record sent in the assessment prompt.
inline nlohmann::json assessment_record(const Insight& in, const Table& base) {
  double cov = 0.0;
  if (base.row_count() > 0) cov = coverage(apply_subspace(base, in.subject.subspace), base);
  return {{"insightId", in.id},
          {"type", to_string(in.type)},
          {"description", in.description},
          {"significance", in.significance},
          {"parameters", in.parameters},
          {"views", in.views},
          {"dimension", in.subject.dimension},
          {"measure", in.subject.measure},
          {"subspace", in.subject.subspace},
          {"coverage", cov}};
}

/// Offline impact: the share of rows the insight's subspace covers.
inline double mock_impact(const nlohmann::json& record) { return record.value("coverage", 0.0); }

/// Offline relevance: Jaccard overlap of task tokens with the insight's
/// type, dimension and measure words.
inline double mock_relevance(const std::string& task, const nlohmann::json& record) {
  std::string words = type_words(record.value("type", "")) + " " + record.value("dimension", "") + " " +
                      record.value("measure", "");
  if (auto it = record.find("parameters"); it != record.end() && it->contains("measures"))
    for (const auto& m : (*it)["measures"])
      if (m.is_string()) words += " " + m.get<std::string>();
  return text::jaccard(text::token_set(task), text::token_set(words));
}

inline std::string mock_explanation(const nlohmann::json& record) {
  const std::string type = record.value("type", "");
  const double sig = record.value("significance", 0.0);
  const double cov = record.value("coverage", 0.0);
  std::string subject;
  const auto& params = record.contains("parameters") ? record["parameters"] : nlohmann::json::object();
  if (params.contains("measures") && params["measures"].size() == 2)
    subject = "between " + params["measures"][0].get<std::string>() + " and " +
              params["measures"][1].get<std::string>() + " over " + record.value("dimension", "");
  else
    subject = "of " + record.value("measure", "") + " by " + record.value("dimension", "");
  return text::title_case(type) + " " + subject + " has significance " + text::format_fixed(sig, 3) +
         " and covers " + text::format_fixed(100.0 * cov, 1) + "% of the rows.";
}

struct AssessOptions {
  ScoreWeights weights;
  Limits limits;
};

/// Scores insights and sorts them by combined score (stable). Provider or
/// reply failures fall back to the offline formulas and are flagged.
inline std::vector<ScoredInsight> assess(const std::vector<Insight>& insights, const std::string& task,
                                         const Table& base, Provider& provider, const AssessOptions& opts = {}) {
  opts.weights.validate();
  std::vector<ScoredInsight> out;
  if (insights.empty()) return out;
  nlohmann::json records = nlohmann::json::array();
  for (const auto& in : insights) records.push_back(assessment_record(in, base));

  std::vector<AssessmentEntry> entries;
  std::string failure;
  try {
    auto doc = build_prompt(PromptKind::Assessment, {{std::string(prompts::kInsightResults), records.dump()},
                                                     {std::string(prompts::kAnalyticalTask), task}});
    entries = parse_assessment_reply(provider.complete(doc, opts.limits));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ProviderError && e.code() != ErrorCode::PlanParseError) throw;
    failure = std::string(to_string(e.code())) + ": " + e.detail() + "; offline scores used";
  }

  for (std::size_t i = 0; i < insights.size(); ++i) {
    ScoredInsight s;
    s.insight = insights[i];
    const AssessmentEntry* entry = nullptr;
    if (failure.empty()) {
      for (const auto& e : entries)
        if (e.insightRef == s.insight.id) entry = &e;
      if (!entry && entries.size() == insights.size() && entries[i].insightRef.empty()) entry = &entries[i];
    }
    if (entry) {
      s.scoring = provider.is_mock() ? "mock" : "provider";
      s.impact = entry->impact;
      s.relevance = entry->relevance;
      s.explanation = entry->explanation;
      s.annotation = entry->annotationTriples;
      s.warnings = entry->warnings;
      std::string d = text::trim(entry->description);
      if (!d.empty()) {
        if (d.back() != '.' && d.back() != '!' && d.back() != '?') d += '.';
        s.insight.description = d;
      }
    } else {
      s.scoring = "fallback";
      s.impact = mock_impact(records[i]);
      s.relevance = mock_relevance(task, records[i]);
      s.explanation = mock_explanation(records[i]);
      s.warnings.push_back(failure.empty() ? "no assessment returned for " + s.insight.id + "; offline scores used"
                                           : failure);
    }
    s.combined = opts.weights.combine(s.insight.significance, s.impact, s.relevance);
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.combined > b.combined; });
  return out;
}

namespace detail {

inline std::vector<std::string> json_keys(const nlohmann::json& params, const char* field) {
  std::vector<std::string> out;
  if (auto it = params.find(field); it != params.end() && it->is_array())
    for (const auto& k : *it) out.push_back(value_as_text(k));
  return out;
}

/// Values of the dimension an insight points at.
inline std::vector<std::string> evidence_keys(const Insight& in) {
  const auto& p = in.parameters;
  auto single = [&]() -> std::vector<std::string> {
    if (p.contains("key") && !p["key"].is_null()) return {value_as_text(p["key"])};
    return {};
  };
  switch (in.type) {
    case InsightType::OutstandingNo1:
    case InsightType::OutstandingLast:
    case InsightType::ChangePoint:
    case InsightType::Attribution:
    case InsightType::ValueRetrieval: return single();
    case InsightType::OutstandingTop2:
    case InsightType::Outlier: return json_keys(p, "keys");
    default: break;
  }
  std::vector<std::string> all;
  for (std::size_t i = 0; i < in.data.size(); ++i) all.push_back(in.data.key_at(i));
  return all;
}

inline bool triple_resolves(const SystemSpec& spec, const AnnotationTriple& t) {
  const auto* v = spec.find_view(t.viewName);
  return v && v->encoding_for_field(t.dimName);
}

}  // namespace detail

/// Attaches annotation triples: one per participating view. Provider triples
/// that do not resolve against the spec are dropped with a warning.
inline std::vector<ScoredInsight> annotate(std::vector<ScoredInsight> scored, const SystemSpec& spec) {
  for (auto& s : scored) {
    const auto& in = s.insight;
    std::vector<AnnotationTriple> triples;
    auto keys = detail::evidence_keys(in);
    for (const auto& view : in.views) {
      AnnotationTriple t{view, in.subject.dimension, keys};
      if (!detail::triple_resolves(spec, t))
        fail(ErrorCode::AnnotationTargetMissing,
             "insight " + in.id + " points at '" + view + "'/'" + in.subject.dimension + "' which the spec lacks", view);
      triples.push_back(std::move(t));
    }
    for (auto& t : s.annotation) {
      if (!detail::triple_resolves(spec, t)) {
        s.warnings.push_back("dropped annotation on unknown target '" + t.viewName + "'/'" + t.dimName + "'");
        continue;
      }
      if (std::find(triples.begin(), triples.end(), t) == triples.end()) triples.push_back(std::move(t));
    }
    s.annotation = std::move(triples);
  }
  return scored;
}

struct StepOutcome {
  std::vector<ScoredInsight> recommendations;  ///< top `limit`, annotated
  std::vector<ExecutionFailure> failures;
};

/// execute -> assess -> annotate for a chosen plan set.
inline StepOutcome run_plans(const std::vector<PlannedInsight>& plans, const SystemSpec& spec, const Table& table,
                             const Selection& sel, const std::string& task, Provider& provider,
                             const AssessOptions& assessOpts = {}, const ExecuteOptions& execOpts = {},
                             std::size_t limit = 5) {
  StepOutcome out;
  auto exec = execute(plans, spec, table, sel, execOpts);
  out.failures = std::move(exec.failures);
  auto scored = assess(exec.insights, task, table, provider, assessOpts);
  if (scored.size() > limit) scored.resize(limit);
  out.recommendations = annotate(std::move(scored), spec);
  return out;
}

}  // namespace insightpilot
