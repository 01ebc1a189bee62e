#pragma once

// Onboarding tours: a system overview followed by one step per view.

#include <string>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/provider.hpp"
#include "insightpilot/spec.hpp"
#include "insightpilot/text.hpp"

namespace insightpilot {

struct TutorialStep {
  std::string title;
  std::string descriptionHtml;
  bool operator==(const TutorialStep&) const = default;
};

inline void to_json(nlohmann::json& j, const TutorialStep& s) {
  j = {{"title", s.title}, {"description", s.descriptionHtml}};
}
inline void from_json(const nlohmann::json& j, TutorialStep& s) {
  s.title = j.at("title").get<std::string>();
  s.descriptionHtml = j.at("description").get<std::string>();
}

/// True when every opening tag has a matching close in order. Void elements
/// (br, hr, img, ...) and self-closing tags need no close.
inline bool html_balanced(std::string_view html) {
  static const std::set<std::string> kVoid{"br", "hr", "img", "input", "meta", "link", "wbr", "col", "area", "source"};
  std::vector<std::string> stack;
  std::size_t i = 0;
  while ((i = html.find('<', i)) != std::string_view::npos) {
    auto end = html.find('>', i);
    if (end == std::string_view::npos) return false;
    std::string_view tag = html.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag.front() == '!') continue;  // comments, doctype
    const bool closing = tag.front() == '/';
    if (closing) tag.remove_prefix(1);
    const bool selfClosing = !tag.empty() && tag.back() == '/';
    std::size_t nameEnd = 0;
    while (nameEnd < tag.size() && (std::isalnum(static_cast<unsigned char>(tag[nameEnd])) || tag[nameEnd] == '-'))
      ++nameEnd;
    if (nameEnd == 0) return false;
    std::string name = text::lower(tag.substr(0, nameEnd));
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!selfClosing && !kVoid.contains(name)) {
      stack.push_back(name);
    }
  }
  return stack.empty();
}

namespace detail {

inline std::string coordination_verb(CoordinationType t) {
  switch (t) {
    case CoordinationType::Filter: return "filters";
    case CoordinationType::Brush: return "brushes";
    case CoordinationType::Highlight: return "highlights";
    case CoordinationType::Navigate: return "navigates";
  }
  return "updates";
}

inline std::string view_description(const SystemSpec& spec, const ViewStyleInfo& v) {
  using text::html_escape;
  std::string out;
  for (const auto& layer : v.layers) {
    if (!out.empty()) out += ' ';
    out += "<b>" + html_escape(layer.mark) + "</b> chart; ";
    for (std::size_t c = 0; c < layer.encoding.size(); ++c) {
      const auto& ch = layer.encoding[c];
      if (c) out += ", ";
      out += html_escape(ch.name) + " encodes <i>" + html_escape(ch.encoding.field) + "</i> (" +
             std::string(to_string(ch.encoding.fieldType)) + ")";
    }
    out += '.';
  }
  for (const auto& co : spec.coordinations) {
    if (co.sourceViewName != v.viewName) continue;
    const std::string target = co.targetViewName == v.viewName ? "this view" : html_escape(co.targetViewName);
    if (co.interaction.empty()) {
      out += " Interacting here " + coordination_verb(co.coordinationType) + " on " + target + ".";
      continue;
    }
    for (const auto& in : co.interaction) {
      const std::string effect = in.effect.empty() ? coordination_verb(co.coordinationType) : html_escape(in.effect);
      out += " Interacting here " + effect + " on " + target + ".";
    }
  }
  for (const auto& co : spec.coordinations) {
    if (co.targetViewName != v.viewName || co.sourceViewName == v.viewName) continue;
    out += " A selection in <i>" + html_escape(co.sourceViewName) + "</i> " + coordination_verb(co.coordinationType) +
           " this view.";
  }
  return out;
}

}  // namespace detail

/// Deterministic template tour used offline and as the fallback.
inline std::vector<TutorialStep> template_tutorial(const SystemSpec& spec) {
  using text::html_escape;
  std::vector<TutorialStep> steps;
  const std::string name = spec.systemInfo.name.empty() ? "This system" : spec.systemInfo.name;
  std::string overview = "<b>" + html_escape(name) + "</b> has " + std::to_string(spec.viewsInfo.size()) +
                         (spec.viewsInfo.size() == 1 ? " view" : " views");
  if (!spec.viewsInfo.empty()) {
    overview += ": ";
    for (std::size_t k = 0; k < spec.viewsInfo.size(); ++k) {
      if (k) overview += ", ";
      overview += "<i>" + html_escape(spec.viewsInfo[k].viewName) + "</i>";
    }
  }
  overview += ". " + std::to_string(spec.coordinations.size()) +
              (spec.coordinations.size() == 1 ? " coordination links" : " coordinations link") +
              " the views; the following steps introduce each view in turn.";
  steps.push_back({name, overview});
  for (const auto& v : spec.viewsInfo) steps.push_back({v.viewName, detail::view_description(spec, v)});
  return steps;
}

/// Reads a provider tour. The reply must hold a JSON array of
/// {title, description} with the overview first and then one step per view
/// titled with its viewName, each description non-empty balanced HTML.
inline std::vector<TutorialStep> parse_tutorial_reply(std::string_view reply, const SystemSpec& spec) {
  auto doc = detail::find_json(reply, "[");
  if (!doc || !doc->is_array()) fail(ErrorCode::MalformedTutorial, "reply holds no JSON array of steps");
  std::vector<TutorialStep> steps;
  for (std::size_t i = 0; i < doc->size(); ++i) {
    const auto& e = (*doc)[i];
    auto title = e.is_object() ? detail::string_field(e, {"title"}) : std::nullopt;
    auto desc = e.is_object() ? detail::string_field(e, {"description", "descriptionHtml"}) : std::nullopt;
    if (!title || !desc) fail(ErrorCode::MalformedTutorial, "step " + std::to_string(i) + " lacks title/description");
    if (text::trim(*desc).empty() || !html_balanced(*desc))
      fail(ErrorCode::MalformedTutorial, "step " + std::to_string(i) + " description is empty or unbalanced HTML");
    steps.push_back({*title, *desc});
  }
  if (steps.size() != spec.viewsInfo.size() + 1)
    fail(ErrorCode::MalformedTutorial, "expected " + std::to_string(spec.viewsInfo.size() + 1) + " steps, got " +
                                           std::to_string(steps.size()));
  for (std::size_t k = 0; k < spec.viewsInfo.size(); ++k)
    if (steps[k + 1].title != spec.viewsInfo[k].viewName)
      fail(ErrorCode::MalformedTutorial, "step " + std::to_string(k + 1) + " title '" + steps[k + 1].title +
                                             "' does not match view '" + spec.viewsInfo[k].viewName + "'");
  return steps;
}

struct TutorialResult {
  std::vector<TutorialStep> steps;
  bool usedTemplate = false;
  std::string warning;  ///< why the template was used, when it was
};

inline PromptDoc onboarding_prompt(const SystemSpec& spec) {
  return build_prompt(PromptKind::Onboarding,
                      {{std::string(prompts::kSpecificationData), serialize_spec(spec).dump(2)}});
}

/// One provider round-trip; provider or format failures fall back to the
/// template renderer and say so.
inline TutorialResult render_tutorial(const SystemSpec& spec, Provider& provider, const Limits& limits = {}) {
  TutorialResult out;
  try {
    out.steps = parse_tutorial_reply(provider.complete(onboarding_prompt(spec), limits), spec);
    return out;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ProviderError && e.code() != ErrorCode::MalformedTutorial) throw;
    out.warning = std::string(to_string(e.code())) + ": " + e.detail();
  }
  out.steps = template_tutorial(spec);
  out.usedTemplate = true;
  return out;
}

}  // namespace insightpilot
