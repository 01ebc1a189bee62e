#include <gtest/gtest.h>

#include "insightpilot/mock_provider.hpp"
#include "insightpilot/report.hpp"
#include "support.hpp"

using namespace insightpilot;
using testsupport::TempDir;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::uint32_t be32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
  return v;
}

/// A closed round with `adopted` change-point steps and one interaction step.
SessionMatrix sample_session(int adopted) {
  auto spec = testsupport::superstore_spec();
  const auto& table = testsupport::superstore_table();
  auto s = start_session(spec, table, "Find sales trends over time", "rep-1", [] { return std::string("t0"); });
  Selection sel;
  sel.triples = {{"Sales|By Segment", "Segment", {"Consumer"}}};
  MockProvider mock;
  PlannedInsight cp{"change_point", "Sales Trend", "Sales", "Month", 0.9, {}, {}};
  auto rec = run_plans({cp}, spec, table, sel, s.task, mock).recommendations.at(0);
  for (int i = 0; i < adopted; ++i) {
    Snapshot snap;
    snap.data = {{"viewName", "Sales Trend"},
                 {"chart", "line"},
                 {"series", rec.insight.data},
                 {"highlight", {"2022-03"}}};
    record_step(s, spec, "Sales Trend", {{rec}, std::nullopt, "q"}, snap);
  }
  record_step(s, spec, "Sales|By Segment", {{}, nlohmann::json{{"triples", nlohmann::json(sel.triples)}}, ""});
  end_round(s);
  return s;
}

}  // namespace

TEST(Report, TemplateHasOneItemPerStep) {
  auto s = sample_session(2);
  auto path = select_path(s, 1);
  auto doc = template_report(path, s.task);
  EXPECT_EQ(doc.title, "Insight Report: Find sales trends over time");
  ASSERT_EQ(doc.items.size(), 3u);
  EXPECT_EQ(doc.items[0].imageName, "1_1_Sales Trend");
  EXPECT_EQ(doc.items[0].heading, "Change Point in Sales Trend");
  EXPECT_EQ(doc.items[2].heading, "Exploration of Sales|By Segment");
  EXPECT_EQ(doc.items[2].bullets, std::vector<std::string>{"Selected Segment = Consumer."});
  EXPECT_EQ(doc.conclusion.rfind("The round covered 3 steps.", 0), 0u);
}

TEST(Report, ReplyMustMatchSteps) {
  auto s = sample_session(1);
  auto path = select_path(s, 1);
  nlohmann::json good = template_report(path, "t");
  EXPECT_EQ(parse_report_reply("Here: " + good.dump(), path).items.size(), 2u);
  auto wrongImage = good;
  wrongImage["items"][0]["imageName"] = "x";
  EXPECT_EQ(code_of([&] { parse_report_reply(wrongImage.dump(), path); }), ErrorCode::PlanParseError);
  auto missing = good;
  missing["items"].erase(1);
  EXPECT_EQ(code_of([&] { parse_report_reply(missing.dump(), path); }), ErrorCode::PlanParseError);
  EXPECT_EQ(code_of([&] { parse_report_reply("none", path); }), ErrorCode::PlanParseError);
}

TEST(Report, SummarizeFallsBackAndRejectsEmpty) {
  auto s = sample_session(1);
  FailingProvider failing;
  auto r = summarize(select_path(s, 1), failing, {s.task, "", {}});
  EXPECT_TRUE(r.usedTemplate);
  EXPECT_EQ(r.doc.items.size(), 2u);
  EXPECT_EQ(code_of([&] { summarize({}, failing); }), ErrorCode::EmptyRound);
}

TEST(Latex, EmitHasItemsPlusTwoFramesAndPassesChecks) {
  auto s = sample_session(3);
  auto doc = template_report(select_path(s, 1), s.task);
  doc.items[0].bullets.push_back("Profit & loss: 50% up_{2}");
  auto src = emit_latex(doc);
  EXPECT_EQ(count_frames(src), doc.items.size() + 2);
  EXPECT_TRUE(check_latex(src).empty());
  EXPECT_NE(src.find("Profit \\& loss: 50\\% up\\_\\{2\\}"), std::string::npos);
  EXPECT_NE(src.find("images/1_1_Sales-20Trend.png"), std::string::npos);
  TempDir dir;
  EXPECT_EQ(code_of([&] { emit_latex(doc, {}, dir.path()); }), ErrorCode::MissingImage);
}

TEST(Latex, CheckerFindings) {
  const std::string src =
      "\\documentclass{beamer}\n% settings:begin\n\\usetheme{Madrid}\n\\setbeamercolor{x}{y}\n% settings:end\n"
      "\\begin{document}\n\\begin{frame}\n\\foo\n\\includegraphics{nothere.png}\n\\\\ \n\\begin{itemize}\n"
      "\\end{frame}\n\\end{document}\n";
  TempDir dir;
  auto f = check_latex(src, dir.path());
  auto has = [&](int line, std::string_view needle) {
    return std::any_of(f.begin(), f.end(),
                       [&](const auto& x) { return x.line == line && x.message.find(needle) != std::string::npos; });
  };
  EXPECT_TRUE(has(8, "undefined command \\foo"));
  EXPECT_TRUE(has(9, "image 'nothere.png' does not exist"));
  EXPECT_TRUE(has(11, "itemize") || has(12, "itemize"));
  EXPECT_FALSE(has(4, "setbeamercolor"));
  EXPECT_FALSE(has(10, "undefined"));
  EXPECT_TRUE(std::is_sorted(f.begin(), f.end(), [](const auto& a, const auto& b) { return a.line < b.line; }));
  EXPECT_TRUE(check_latex("\\documentclass{beamer}\n\\begin{document}\n\\end{document}\n").empty());
}

TEST(Latex, ProviderOutputNeedsCorrectFrameCount) {
  auto s = sample_session(1);
  auto path = select_path(s, 1);
  auto doc = template_report(path, "t");
  ScriptedProvider tooFew("```latex\n\\documentclass{beamer}\n\\begin{document}\n\\begin{frame}\nHi\n\\end{frame}\n"
                          "\\end{document}\n```");
  auto r = generate_latex(doc, path, tooFew, {}, std::nullopt);
  EXPECT_TRUE(r.usedTemplate);
  ASSERT_FALSE(r.rejected.empty());
  EXPECT_EQ(r.rejected.back().message, "expected 4 frames, found 1");
  ScriptedProvider good(emit_latex(doc));
  auto g = generate_latex(doc, path, good, {}, std::nullopt);
  EXPECT_FALSE(g.usedTemplate);
  EXPECT_EQ(extract_latex("noise " + emit_latex(doc) + " trailing"), emit_latex(doc));
}

TEST(Report, WriteReportWithMockProvider) {
  TempDir dir;
  auto s = sample_session(4);
  MockProvider mock;
  auto w = write_report(s, 1, mock, dir.path());
  EXPECT_EQ(w.texPath, dir.path() / "rep-2D1_1.tex");
  EXPECT_TRUE(std::filesystem::exists(w.texPath));
  EXPECT_EQ(count_frames(w.source), 5u + 2u);
  EXPECT_TRUE(w.findings.empty());
  EXPECT_TRUE(w.warnings.empty());
  for (const auto& r : select_path(s, 1)) {
    const auto png = testsupport::slurp(dir.path() / image_path({}, r.snapshotRef));
    ASSERT_GT(png.size(), 33u);
    EXPECT_EQ(png.substr(1, 3), "PNG");
    EXPECT_EQ(be32(png, 16), 800u);
    EXPECT_EQ(be32(png, 20), 450u);
  }
  EXPECT_EQ(code_of([&] { write_report(s, 2, mock, dir.path()); }), ErrorCode::UnknownRound);
}

TEST(Report, ClientPngIsWrittenVerbatim) {
  TempDir dir;
  auto spec = testsupport::superstore_spec();
  auto s = start_session(spec, testsupport::superstore_table(), "t", "rep-2");
  Snapshot snap;
  snap.png = render_placeholder_png({{"series", {{"keys", {"a", "b"}}, {"values", {1, 2}}}}}, 40, 30);
  record_step(s, spec, "Sales|By Segment", {{}, nlohmann::json::object(), ""}, snap);
  end_round(s);
  MockProvider mock;
  auto w = write_report(s, 1, mock, dir.path());
  EXPECT_EQ(testsupport::slurp(dir.path() / "images" / "1_1_Sales-7CBy-20Segment.png"), *snap.png);
  EXPECT_EQ(be32(*snap.png, 16), 40u);
}
