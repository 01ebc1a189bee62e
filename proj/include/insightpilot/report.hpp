#pragma once

// Round reports: a textual summary with one item per step, then beamer
// slides with one frame per item.

#include <filesystem>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/png.hpp"
#include "insightpilot/provider.hpp"
#include "insightpilot/session.hpp"
#include "insightpilot/text.hpp"

namespace insightpilot {

struct ReportItem {
  std::string heading;
  std::vector<std::string> bullets;
  std::string imageName;
  bool operator==(const ReportItem&) const = default;
};

struct ReportDoc {
  std::string title;
  std::vector<ReportItem> items;
  std::string conclusion;
  bool operator==(const ReportDoc&) const = default;
};

inline void to_json(nlohmann::json& j, const ReportItem& i) {
  j = {{"heading", i.heading}, {"bullets", i.bullets}, {"imageName", i.imageName}};
}
inline void from_json(const nlohmann::json& j, ReportItem& i) {
  i.heading = j.at("heading").get<std::string>();
  i.bullets = j.value("bullets", std::vector<std::string>{});
  i.imageName = j.value("imageName", "");
}
inline void to_json(nlohmann::json& j, const ReportDoc& d) {
  j = {{"title", d.title}, {"items", d.items}, {"conclusion", d.conclusion}};
}
inline void from_json(const nlohmann::json& j, ReportDoc& d) {
  d.title = j.at("title").get<std::string>();
  d.items = j.at("items").get<std::vector<ReportItem>>();
  d.conclusion = j.value("conclusion", "");
}

/// Per-step source records (insight, type, value, viewName, imageName).
inline nlohmann::json historical_data(const std::vector<StepRecord>& records) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json e = {{"step", r.stepIndex}, {"viewName", r.focusedView}, {"imageName", r.snapshotRef}};
    if (!r.insights.empty()) {
      const auto& top = r.insights.front();
      e["insight"] = top.insight.description;
      e["type"] = to_string(top.insight.type);
      e["value"] = top.insight.parameters;
      e["explanation"] = top.explanation;
    } else {
      e["insight"] = "User interaction on " + r.focusedView;
      e["type"] = "interaction";
      e["value"] = r.interaction ? *r.interaction : nlohmann::json(nullptr);
    }
    out.push_back(std::move(e));
  }
  return out;
}

namespace detail {

inline std::string interaction_text(const nlohmann::json& in) {
  if (in.is_object() && in.contains("triples") && in["triples"].is_array()) {
    std::string out;
    for (const auto& t : in["triples"]) {
      if (!out.empty()) out += "; ";
      out += t.value("dimName", std::string("?")) + " = ";
      std::string vals;
      if (t.contains("value") && t["value"].is_array())
        for (const auto& v : t["value"]) vals += (vals.empty() ? "" : ", ") + value_as_text(v);
      out += vals;
    }
    if (!out.empty()) return "Selected " + out + ".";
  }
  return "Interaction: " + safe_dump(in) + ".";
}

}  // namespace detail

/// Report built from historical records alone (see historical_data).
inline ReportDoc report_from_history(const nlohmann::json& history, const std::string& task) {
  ReportDoc doc;
  doc.title = task.empty() ? "Insight Report" : "Insight Report: " + task;
  std::string summary;
  for (const auto& e : history) {
    ReportItem item;
    item.imageName = e.value("imageName", "");
    const std::string view = e.value("viewName", "");
    const std::string type = e.value("type", "");
    if (type != "interaction") {
      item.heading = text::title_case(type) + " in " + view;
      const std::string insight = e.value("insight", "");
      item.bullets.push_back(insight);
      if (const std::string ex = e.value("explanation", ""); !ex.empty()) item.bullets.push_back(ex);
      summary += (summary.empty() ? "" : " ") + insight;
    } else {
      item.heading = "Exploration of " + view;
      if (e.contains("value") && !e["value"].is_null()) item.bullets.push_back(detail::interaction_text(e["value"]));
    }
    doc.items.push_back(std::move(item));
  }
  doc.conclusion = "The round covered " + std::to_string(history.size()) +
                   (history.size() == 1 ? " step." : " steps.") + (summary.empty() ? "" : " " + summary);
  return doc;
}

inline ReportDoc template_report(const std::vector<StepRecord>& records, const std::string& task) {
  return report_from_history(historical_data(records), task);
}

/// Parses a provider report and checks it against the records: one item per
/// step in order, each imageName the step's snapshotRef.
inline ReportDoc parse_report_reply(std::string_view reply, const std::vector<StepRecord>& records) {
  auto doc = detail::find_json(reply, "{");
  if (!doc || !doc->is_object()) fail(ErrorCode::PlanParseError, "reply holds no JSON report object");
  ReportDoc out;
  try {
    out = doc->get<ReportDoc>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::PlanParseError, std::string("report shape: ") + e.what());
  }
  if (out.title.empty() || out.conclusion.empty()) fail(ErrorCode::PlanParseError, "report lacks a title or conclusion");
  if (out.items.size() != records.size())
    fail(ErrorCode::PlanParseError, "report has " + std::to_string(out.items.size()) + " items for " +
                                        std::to_string(records.size()) + " steps");
  for (std::size_t k = 0; k < records.size(); ++k)
    if (out.items[k].imageName != records[k].snapshotRef)
      fail(ErrorCode::PlanParseError, "item " + std::to_string(k + 1) + " image '" + out.items[k].imageName +
                                          "' is not step snapshot '" + records[k].snapshotRef + "'");
  return out;
}

inline constexpr std::string_view kTaskRequirementPrefix = "The analytical task was: ";

struct SummarizeOptions {
  std::string task;
  std::string otherRequirements;
  Limits limits;
};

struct SummaryResult {
  ReportDoc doc;
  bool usedTemplate = false;
  std::string warning;
};

inline SummaryResult summarize(const std::vector<StepRecord>& records, Provider& provider,
                               const SummarizeOptions& opts = {}) {
  if (records.empty()) fail(ErrorCode::EmptyRound, "the round has no steps to report");
  SummaryResult out;
  try {
    PromptInputs in{{std::string(prompts::kHistoricalData), historical_data(records).dump()}};
    if (!opts.otherRequirements.empty()) in[std::string(prompts::kOtherRequirements)] = opts.otherRequirements;
    if (!opts.task.empty() && opts.otherRequirements.empty())
      in[std::string(prompts::kOtherRequirements)] = std::string(kTaskRequirementPrefix) + opts.task;
    out.doc = parse_report_reply(provider.complete(build_prompt(PromptKind::Report, in), opts.limits), records);
    return out;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ProviderError && e.code() != ErrorCode::PlanParseError) throw;
    out.warning = std::string(to_string(e.code())) + ": " + e.detail();
  }
  out.doc = template_report(records, opts.task);
  out.usedTemplate = true;
  return out;
}

// ---------------------------------------------------------------------------
// LaTeX

inline constexpr std::string_view kDefaultLatexSettings = "\\usetheme{Madrid}\n\\usecolortheme{default}";

struct LatexStyle {
  std::string settings{kDefaultLatexSettings};
  std::string imageDir = "images";
  std::string author;
};

inline std::string image_path(const LatexStyle& style, const std::string& imageName) {
  return (style.imageDir.empty() ? "" : style.imageDir + "/") + text::file_stem(imageName) + ".png";
}

/// Beamer source: a title frame, one frame per item (bullets when present,
/// then the image), and a conclusion frame. With `strictImageRoot`, every
/// image must exist below it or MissingImage is raised.
inline std::string emit_latex(const ReportDoc& doc, const LatexStyle& style = {},
                              const std::optional<std::filesystem::path>& strictImageRoot = std::nullopt) {
  using text::latex_escape;
  std::ostringstream o;
  o << "\\documentclass{beamer}\n";
  o << "% settings:begin\n" << style.settings << (style.settings.empty() || style.settings.back() == '\n' ? "" : "\n")
    << "% settings:end\n";
  o << "\\title{" << latex_escape(doc.title) << "}\n";
  o << "\\author{" << latex_escape(style.author) << "}\n";
  o << "\\date{}\n";
  o << "\\begin{document}\n\n";
  o << "\\begin{frame}\n\\titlepage\n\\end{frame}\n\n";
  for (const auto& item : doc.items) {
    const std::string img = image_path(style, item.imageName);
    if (strictImageRoot && !std::filesystem::exists(*strictImageRoot / img))
      fail(ErrorCode::MissingImage, "no snapshot image for '" + item.imageName + "'", img);
    o << "\\begin{frame}\n\\frametitle{" << latex_escape(item.heading) << "}\n";
    if (!item.bullets.empty()) {
      o << "\\begin{itemize}\n";
      for (const auto& b : item.bullets) o << "\\item " << latex_escape(b) << "\n";
      o << "\\end{itemize}\n";
    }
    o << "\\begin{center}\n\\includegraphics[width=0.8\\textwidth,height=0.55\\textheight,keepaspectratio]{" << img
      << "}\n\\end{center}\n\\end{frame}\n\n";
  }
  o << "\\begin{frame}\n\\frametitle{Conclusion}\n" << latex_escape(doc.conclusion) << "\n\\end{frame}\n\n";
  o << "\\end{document}\n";
  return o.str();
}

struct LatexFinding {
  int line = 0;
  std::string message;
  bool operator==(const LatexFinding&) const = default;
};

inline std::size_t count_frames(std::string_view src) {
  std::size_t n = 0, pos = 0;
  while ((pos = src.find("\\begin{frame}", pos)) != std::string_view::npos) {
    ++n;
    pos += 13;
  }
  return n;
}

namespace detail {

inline const std::set<std::string>& latex_whitelist() {
  static const std::set<std::string> words{
      "documentclass", "usepackage", "usetheme", "usecolortheme", "usefonttheme", "useinnertheme",
      "useoutertheme", "setbeamertemplate", "setbeamercolor", "setbeamerfont", "title", "subtitle",
      "author", "institute", "date", "today", "begin", "end", "frametitle", "framesubtitle", "titlepage",
      "maketitle", "tableofcontents", "section", "subsection", "item", "includegraphics", "textbf",
      "textit", "texttt", "emph", "underline", "alert", "structure", "centering", "textwidth",
      "textheight", "linewidth", "columnwidth", "vspace", "hspace", "vfill", "hfill", "small",
      "footnotesize", "scriptsize", "tiny", "normalsize", "large", "Large", "LARGE", "huge", "Huge",
      "par", "newline", "textbackslash", "textasciitilde", "textasciicircum", "color", "textcolor",
      "url", "href", "caption", "label", "ref", "pause", "column", "columns", "quad", "qquad"};
  return words;
}

inline std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\') {
      ++i;
      continue;
    }
    if (line[i] == '%') return line.substr(0, i);
  }
  return line;
}

}  // namespace detail

/// Structural checks on beamer source: balanced environments, images that
/// exist below `imageRoot` (when given), and no commands outside the
/// whitelist or the settings block's own vocabulary.
inline std::vector<LatexFinding> check_latex(std::string_view src,
                                             const std::optional<std::filesystem::path>& imageRoot = std::nullopt) {
  std::vector<LatexFinding> findings;
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : src) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) lines.push_back(cur);
  }
  static const std::regex cmdRe(R"(\\([A-Za-z]+))");
  static const std::regex envRe(R"(\\(begin|end)\{([^}]*)\})");
  static const std::regex imgRe(R"(\\includegraphics(\[[^\]]*\])?\{([^}]*)\})");
  static const std::regex defRe(R"(\\(?:newcommand|renewcommand|providecommand|DeclareMathOperator)\*?\{?\\([A-Za-z]+))");

  std::set<std::string> allowed = detail::latex_whitelist();
  bool inSettings = false;
  std::vector<std::size_t> settingsLines;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string t = text::trim(lines[i]);
    if (t == "% settings:begin") inSettings = true;
    else if (t == "% settings:end") inSettings = false;
    else if (inSettings) settingsLines.push_back(i);
  }
  for (std::size_t i : settingsLines) {
    const std::string code = detail::strip_comment(lines[i]);
    for (std::sregex_iterator it(code.begin(), code.end(), cmdRe), end; it != end; ++it) allowed.insert((*it)[1]);
    for (std::sregex_iterator it(code.begin(), code.end(), defRe), end; it != end; ++it) allowed.insert((*it)[1]);
  }
  auto isSetting = [&](std::size_t i) {
    return std::find(settingsLines.begin(), settingsLines.end(), i) != settingsLines.end();
  };

  std::vector<std::pair<std::string, int>> stack;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int lineNo = static_cast<int>(i) + 1;
    const std::string code = detail::strip_comment(lines[i]);
    for (std::sregex_iterator it(code.begin(), code.end(), envRe), end; it != end; ++it) {
      const std::string kind = (*it)[1], env = (*it)[2];
      if (kind == "begin") {
        stack.emplace_back(env, lineNo);
      } else if (stack.empty()) {
        findings.push_back({lineNo, "\\end{" + env + "} without a matching \\begin"});
      } else if (stack.back().first != env) {
        findings.push_back({lineNo, "\\end{" + env + "} closes \\begin{" + stack.back().first + "} from line " +
                                        std::to_string(stack.back().second)});
        stack.pop_back();
      } else {
        stack.pop_back();
      }
    }
    if (!isSetting(i)) {
      for (std::sregex_iterator it(code.begin(), code.end(), cmdRe), end; it != end; ++it) {
        const std::string name = (*it)[1];
        // Escaped backslash pairs ("\\") are line breaks, not commands.
        const auto pos = static_cast<std::size_t>(it->position(0));
        if (pos > 0 && code[pos - 1] == '\\') continue;
        if (!allowed.contains(name)) findings.push_back({lineNo, "undefined command \\" + name});
      }
    }
    if (imageRoot) {
      for (std::sregex_iterator it(code.begin(), code.end(), imgRe), end; it != end; ++it) {
        const std::string path = (*it)[2];
        bool found = std::filesystem::exists(*imageRoot / path);
        for (const char* ext : {".png", ".pdf", ".jpg"})
          found = found || std::filesystem::exists(*imageRoot / (path + ext));
        if (!found) findings.push_back({lineNo, "image '" + path + "' does not exist"});
      }
    }
  }
  for (const auto& [env, lineNo] : stack)
    findings.push_back({lineNo, "\\begin{" + env + "} is never closed"});
  std::stable_sort(findings.begin(), findings.end(), [](const auto& a, const auto& b) { return a.line < b.line; });
  return findings;
}

/// Strips Markdown code fences a model may wrap around LaTeX.
inline std::string extract_latex(std::string_view reply) {
  std::string s(reply);
  auto start = s.find("\\documentclass");
  if (start == std::string::npos) return s;
  auto end = s.rfind("\\end{document}");
  if (end == std::string::npos) return s.substr(start);
  return s.substr(start, end + 14 - start) + "\n";
}

struct LatexResult {
  std::string source;
  bool usedTemplate = false;
  std::vector<LatexFinding> rejected;  ///< findings that sent provider output to the template
  std::string warning;
};

/// Asks the provider for slides, but only keeps them when they pass
/// check_latex and carry item-count + 2 frames.
inline LatexResult generate_latex(const ReportDoc& doc, const std::vector<StepRecord>& records, Provider& provider,
                                  const LatexStyle& style, const std::optional<std::filesystem::path>& imageRoot,
                                  const Limits& limits = {}) {
  LatexResult out;
  try {
    PromptInputs in{{std::string(prompts::kSummarizedReport), nlohmann::json(doc).dump()},
                    {std::string(prompts::kHistoricalData), historical_data(records).dump()}};
    if (!style.settings.empty()) in[std::string(prompts::kSettingRequirements)] = style.settings;
    std::string src = extract_latex(provider.complete(build_prompt(PromptKind::Latex, in), limits));
    out.rejected = check_latex(src, imageRoot);
    if (count_frames(src) != doc.items.size() + 2)
      out.rejected.push_back({0, "expected " + std::to_string(doc.items.size() + 2) + " frames, found " +
                                     std::to_string(count_frames(src))});
    if (out.rejected.empty()) {
      out.source = std::move(src);
      return out;
    }
    out.warning = "provider LaTeX failed structural checks";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ProviderError) throw;
    out.warning = std::string(to_string(e.code())) + ": " + e.detail();
  }
  out.source = emit_latex(doc, style);
  out.usedTemplate = true;
  return out;
}

struct WrittenReport {
  std::filesystem::path texPath;
  std::string source;
  ReportDoc doc;
  std::vector<LatexFinding> findings;
  std::vector<std::string> warnings;
};

/// Writes {outDir}/{name}.tex and one image per item: the client PNG when
/// the snapshot has one, else a rendered placeholder.
inline WrittenReport write_report(const SessionMatrix& session, int roundIndex, Provider& provider,
                                  const std::filesystem::path& outDir, const LatexStyle& style = {},
                                  const Limits& limits = {}) {
  namespace fs = std::filesystem;
  auto records = select_path(session, roundIndex);
  WrittenReport out;
  auto summary = summarize(records, provider, {session.task, "", limits});
  if (summary.usedTemplate) out.warnings.push_back("summary template used: " + summary.warning);
  out.doc = summary.doc;
  std::error_code ec;
  fs::create_directories(outDir / style.imageDir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + (outDir / style.imageDir).string() + ": " + ec.message());
  for (const auto& r : records) {
    auto it = session.snapshots.find(r.snapshotRef);
    std::string bytes;
    if (it != session.snapshots.end() && it->second.png) bytes = *it->second.png;
    else bytes = render_placeholder_png(it != session.snapshots.end() ? it->second.data : nlohmann::json::object());
    detail::write_file(outDir / image_path(style, r.snapshotRef), bytes);
  }
  auto latex = generate_latex(out.doc, records, provider, style, outDir, limits);
  if (latex.usedTemplate) out.warnings.push_back("LaTeX template used: " + latex.warning);
  out.source = latex.source;
  out.findings = check_latex(out.source, outDir);
  out.texPath = outDir / (text::file_stem(session.sessionId) + "_" + std::to_string(roundIndex) + ".tex");
  detail::write_file(out.texPath, out.source);
  return out;
}

}  // namespace insightpilot
