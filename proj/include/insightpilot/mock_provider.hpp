#pragma once

// Deterministic rule-based provider. Replies depend only on the prompt, so
// the whole pipeline is reproducible offline.

#include <string>
#include <vector>

#include <json.hpp>

#include "insightpilot/provider.hpp"
#include "insightpilot/recommend.hpp"
#include "insightpilot/report.hpp"
#include "insightpilot/spec.hpp"
#include "insightpilot/tutorial.hpp"

namespace insightpilot {

namespace mock {

inline nlohmann::ordered_json block_json(const PromptDoc& p, std::string_view label) {
  auto j = nlohmann::ordered_json::parse(p.body_of(label), nullptr, false);
  return j.is_discarded() ? nlohmann::ordered_json() : j;
}

inline std::string onboarding(const PromptDoc& p) {
  auto doc = block_json(p, prompts::kSpecificationData);
  SystemSpec spec;
  try {
    spec = spec_from_json(doc);
  } catch (const Error&) {
    return "[]";
  }
  return nlohmann::json(template_tutorial(spec)).dump();
}

struct Candidate {
  std::string view, measure, dim;
};

/// Encoding rules: temporal dimension -> time-series functions; pairs of
/// measures on the same temporal dimension -> correlation; nominal or
/// ordinal dimension -> ranking and share functions.
inline std::string type_selection(const PromptDoc& p) {
  auto viewsDoc = block_json(p, prompts::kViewStyleInfo);
  auto apis = block_json(p, prompts::kInsightFunctionApis);
  const auto task = text::token_set(p.body_of(prompts::kAnalyticalTask) == "(none)"
                                        ? std::string{}
                                        : p.body_of(prompts::kAnalyticalTask));
  std::set<std::string> known;
  if (apis.is_array())
    for (const auto& f : apis)
      if (f.is_object() && f.contains("name") && f["name"].is_string()) known.insert(f["name"].get<std::string>());

  std::vector<Candidate> temporal, nominal;
  if (viewsDoc.is_array()) {
    for (std::size_t k = 0; k < viewsDoc.size(); ++k) {
      ViewStyleInfo v;
      try {
        v = detail::parse_view(viewsDoc[k], "views[" + std::to_string(k) + "]");
      } catch (const Error&) {
        continue;
      }
      std::vector<std::string> measures;
      std::string tdim, ndim;
      for (const auto& l : v.layers) {
        for (const auto& c : l.encoding) {
          const auto& e = c.encoding;
          if (e.fieldType == FieldType::Quantitative) {
            if (std::find(measures.begin(), measures.end(), e.field) == measures.end()) measures.push_back(e.field);
          } else if (e.fieldType == FieldType::Temporal) {
            if (tdim.empty()) tdim = e.field;
          } else if (ndim.empty()) {
            ndim = e.field;
          }
        }
      }
      for (const auto& m : measures) {
        if (!tdim.empty()) temporal.push_back({v.viewName, m, tdim});
        else if (!ndim.empty()) nominal.push_back({v.viewName, m, ndim});
      }
    }
  }

  nlohmann::json out = nlohmann::json::array();
  auto emit = [&](const std::string& fn, const Candidate& c, const Candidate* paired) {
    if (!known.contains(fn)) return;
    std::string words = type_words(fn) + " " + c.view + " " + c.measure + " " + c.dim;
    if (paired) words += " " + paired->view + " " + paired->measure;
    const double rel = task.empty() ? 0.5 : text::coverage_of(task, text::token_set(words));
    PlannedInsight pi{fn, c.view, c.measure, c.dim, rel, {}, {}};
    if (paired && paired->view != c.view) pi.pairedViewName = paired->view;
    if (paired) pi.pairedVariableName = paired->measure;
    out.push_back(pi);
  };
  for (const auto& c : temporal)
    for (const char* fn : {"change_point", "trend", "seasonality", "outlier"}) emit(fn, c, nullptr);
  for (std::size_t i = 0; i < temporal.size(); ++i)
    for (std::size_t j = i + 1; j < temporal.size(); ++j)
      if (temporal[i].dim == temporal[j].dim && temporal[i].measure != temporal[j].measure)
        emit("correlation", temporal[i], &temporal[j]);
  for (const auto& c : nominal)
    for (const char* fn : {"outstanding_no1", "outstanding_top2", "outstanding_last", "attribution", "evenness"})
      emit(fn, c, nullptr);
  return out.dump();
}

inline std::string assessment(const PromptDoc& p) {
  auto records = nlohmann::json::parse(p.body_of(prompts::kInsightResults), nullptr, false);
  const std::string task = p.body_of(prompts::kAnalyticalTask);
  nlohmann::json out = nlohmann::json::array();
  if (records.is_array()) {
    for (const auto& r : records) {
      if (!r.is_object()) continue;
      out.push_back({{"insightId", r.value("insightId", "")},
                     {"description", r.value("description", "")},
                     {"impact", mock_impact(r)},
                     {"relevance", mock_relevance(task, r)},
                     {"explanation", mock_explanation(r)}});
    }
  }
  return out.dump();
}

inline std::string report(const PromptDoc& p) {
  auto history = nlohmann::json::parse(p.body_of(prompts::kHistoricalData), nullptr, false);
  if (!history.is_array()) history = nlohmann::json::array();
  std::string req = p.body_of(prompts::kOtherRequirements);
  std::string task;
  if (req.starts_with(kTaskRequirementPrefix)) task = req.substr(kTaskRequirementPrefix.size());
  return nlohmann::json(report_from_history(history, task)).dump();
}

inline std::string latex(const PromptDoc& p) {
  auto doc = nlohmann::json::parse(p.body_of(prompts::kSummarizedReport), nullptr, false);
  ReportDoc rd;
  try {
    rd = doc.get<ReportDoc>();
  } catch (const nlohmann::json::exception&) {
    return "% unreadable report";
  }
  LatexStyle style;
  if (p.find(prompts::kSettingRequirements)) style.settings = p.body_of(prompts::kSettingRequirements);
  return emit_latex(rd, style);
}

/// Task proposals for questions starting with "Propose"; otherwise a
/// templated answer pointing at the most recent recommendation.
inline std::string open_question(const PromptDoc& p) {
  const std::string q = text::trim(p.body_of(prompts::kQuestion));
  auto state = nlohmann::json::parse(p.body_of(prompts::kCurrentState), nullptr, false);
  if (state.is_discarded() || !state.is_object()) state = nlohmann::json::object();
  nlohmann::json reply = {{"answer", ""}, {"highlights", nlohmann::json::array()}};
  if (q.starts_with("Propose")) {
    std::vector<std::string> measures, dims;
    if (state.contains("measures"))
      for (const auto& m : state["measures"]) measures.push_back(m.get<std::string>());
    if (state.contains("dimensions"))
      for (const auto& d : state["dimensions"]) dims.push_back(d.get<std::string>());
    std::string m = measures.empty() ? "the measures" : measures.front();
    std::string d = dims.empty() ? "each dimension" : dims.front();
    reply["answer"] = "Analyze how " + m + " changes over time and which " + d + " values stand out.";
    return reply.dump();
  }
  const nlohmann::json* top = nullptr;
  if (state.contains("recommendations") && state["recommendations"].is_array() && !state["recommendations"].empty())
    top = &state["recommendations"][0];
  if (top) {
    reply["answer"] = "Regarding \"" + q + "\": " + top->value("description", std::string{}) +
                      " This is the strongest finding for the current selection.";
    if (top->contains("annotation")) reply["highlights"] = (*top)["annotation"];
  } else {
    reply["answer"] = "Regarding \"" + q + "\": no insights have been computed for the current selection yet.";
  }
  return reply.dump();
}

}  // namespace mock

class MockProvider : public Provider {
 public:
  std::string complete(const PromptDoc& prompt, const Limits&) override {
    switch (prompt.kind) {
      case PromptKind::Onboarding: return mock::onboarding(prompt);
      case PromptKind::TypeSelection: return mock::type_selection(prompt);
      case PromptKind::Assessment: return mock::assessment(prompt);
      case PromptKind::Report: return mock::report(prompt);
      case PromptKind::Latex: return mock::latex(prompt);
      case PromptKind::OpenQuestion: return mock::open_question(prompt);
    }
    return {};
  }
  std::string id() const override { return "mock"; }
  bool is_mock() const override { return true; }
};

/// Always fails; exercises fallback paths.
class FailingProvider : public Provider {
 public:
  std::string complete(const PromptDoc&, const Limits&) override {
    fail(ErrorCode::ProviderError, "provider unavailable");
  }
  std::string id() const override { return "failing"; }
};

/// Replies with a fixed text; for parser and fallback tests.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::string reply) : reply_(std::move(reply)) {}
  std::string complete(const PromptDoc&, const Limits&) override { return reply_; }
  std::string id() const override { return "scripted"; }

 private:
  std::string reply_;
};

}  // namespace insightpilot
