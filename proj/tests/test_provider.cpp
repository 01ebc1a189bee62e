#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "insightpilot/mock_provider.hpp"
#include "insightpilot/provider.hpp"
#include "support.hpp"

using namespace insightpilot;
namespace P = insightpilot::prompts;

namespace {

Error error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an Error";
  return Error(ErrorCode::InvalidArgument, "none");
}

PromptInputs type_selection_inputs() {
  return {{std::string(P::kCurrentSelection), "[]"},
          {std::string(P::kViewStyleInfo), "[]"},
          {std::string(P::kViewsCoordinationInfo), "[]"},
          {std::string(P::kAnalyticalTask), "find trends"},
          {std::string(P::kInsightFunctionApis), "[]"}};
}

}  // namespace

TEST(Prompt, OnboardingScaffold) {
  auto doc = build_prompt(PromptKind::Onboarding, {{std::string(P::kSpecificationData), "{\"a\":1}"}});
  auto text = doc.render();
  EXPECT_EQ(text.rfind("Here are the specifications of a visual analytics system.\n", 0), 0u);
  EXPECT_NE(text.find("{specification data}\n{\"a\":1}\n"), std::string::npos);
  EXPECT_NE(text.find("Please give your answer in the following format:"), std::string::npos);
  EXPECT_EQ(doc.body_of(P::kFormatRequirements), P::default_format(PromptKind::Onboarding));
}

TEST(Prompt, SectionOrderPerKind) {
  auto doc = build_prompt(PromptKind::TypeSelection, type_selection_inputs());
  std::vector<std::string> labels;
  for (const auto& s : doc.sections)
    if (!s.label.empty()) labels.push_back(s.label);
  EXPECT_EQ(labels, (std::vector<std::string>{"current selection", "view style info", "views coordination info",
                                              "analytical task", "insight function APIs", "format requirements"}));
  EXPECT_NE(doc.render().find("give a relevance score"), std::string::npos);
}

TEST(Prompt, MissingRequiredBlockIsNamed) {
  auto in = type_selection_inputs();
  in.erase(std::string(P::kViewStyleInfo));
  auto e = error_of([&] { build_prompt(PromptKind::TypeSelection, in); });
  EXPECT_EQ(e.code(), ErrorCode::MissingInput);
  EXPECT_EQ(e.path(), "view style info");
  EXPECT_EQ(error_of([] { build_prompt(PromptKind::Report, {{std::string(P::kHistoricalData), "  "}}); }).code(),
            ErrorCode::MissingInput);
  EXPECT_EQ(error_of([] { build_prompt(PromptKind::Latex, {}); }).path(), "summarized report");
  EXPECT_EQ(error_of([] { build_prompt(PromptKind::OpenQuestion, {}); }).path(), "question");
}

TEST(Prompt, OptionalBlocksAndCustomFormat) {
  auto doc = build_prompt(PromptKind::Report, {{std::string(P::kHistoricalData), "[]"},
                                               {std::string(P::kOtherRequirements), "Keep it short."},
                                               {std::string(P::kFormatRequirements), "Plain text."}});
  EXPECT_EQ(doc.body_of(P::kOtherRequirements), "Keep it short.");
  EXPECT_EQ(doc.formatRequirements, "Plain text.");
  auto bare = build_prompt(PromptKind::Report, {{std::string(P::kHistoricalData), "[]"}});
  EXPECT_EQ(bare.find(P::kOtherRequirements), nullptr);
  EXPECT_NE(bare.render().find("The amount of insight should be equal to the number of steps"), std::string::npos);
  auto assess = build_prompt(PromptKind::Assessment, {{std::string(P::kInsightResults), "[]"}});
  EXPECT_NE(assess.render().find("potential consequences, urgency and timeliness"), std::string::npos);
}

TEST(Braced, AppendixLiterals) {
  EXPECT_EQ(parse_braced_answers("{998}, {993}"), (std::vector<BracedValue>{998.0, 993.0}));
  EXPECT_EQ(parse_braced_answers("The trend has decreased. {-1}"), (std::vector<BracedValue>{-1.0}));
  EXPECT_EQ(parse_braced_answers("the No.1 value is {781}."), (std::vector<BracedValue>{781.0}));
}

TEST(Braced, EdgeCases) {
  EXPECT_TRUE(parse_braced_answers("no braces here").empty());
  EXPECT_EQ(parse_braced_answers("{ none }"), (std::vector<BracedValue>{std::string("none")}));
  EXPECT_EQ(parse_braced_answers("{a{b}c} {2"), (std::vector<BracedValue>{std::string("a{b}c")}));
  EXPECT_EQ(parse_braced_answers("{}"), (std::vector<BracedValue>{std::string("")}));
  EXPECT_EQ(format_braced({998.0, std::string("none"), 0.5}), "{998}, {none}, {0.5}");
  EXPECT_EQ(parse_braced_answers(format_braced({1.25, -3.0})), (std::vector<BracedValue>{1.25, -3.0}));
}

TEST(PlanReply, ReadsArrayInsideProse) {
  auto r = parse_plan_reply(
      "Sure! Here you go:\n```json\n[{'functionName': 'change_point', 'viewName': 'Sales Trend', "
      "'variableName': 'Sales', 'dimName': 'Month', 'relevance': 0.9},\n"
      " {\"functionName\": \"trend\", \"viewName\": \"Sales Trend\", \"variableName\": \"Sales\", \"dimName\": "
      "\"Month\", \"relevance\": \"1.4\"},\n {\"functionName\": \"trend\"}, 7]\n```");
  ASSERT_EQ(r.plans.size(), 2u);
  EXPECT_EQ(r.plans[0].functionName, "change_point");
  EXPECT_DOUBLE_EQ(r.plans[0].relevance, 0.9);
  EXPECT_DOUBLE_EQ(r.plans[1].relevance, 1.0);
  ASSERT_EQ(r.issues.size(), 3u);
  EXPECT_NE(r.issues[0].find("clamped"), std::string::npos);
  EXPECT_EQ(error_of([] { parse_plan_reply("I could not decide."); }).code(), ErrorCode::PlanParseError);
}

TEST(PlanReply, CrossViewFieldsAndJson) {
  auto r = parse_plan_reply(R"([{"functionName":"correlation","viewName":"A","variableName":"x","dimName":"t",
    "relevance":0.5,"pairedViewName":"B","pairedVariableName":"y"}])");
  ASSERT_EQ(r.plans.size(), 1u);
  EXPECT_EQ(r.plans[0].pairedViewName, "B");
  nlohmann::json j = r.plans[0];
  EXPECT_EQ(j.get<PlannedInsight>(), r.plans[0]);
}

TEST(AssessmentReply, SingleObjectWithAliases) {
  auto r = parse_assessment_reply(
      "{'viewsName': 'Sales|By Segment', 'fieldName': 'Segment', 'value': ['Consumer'], 'final_score': 0.83}");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(r[0].impactDefaulted);
  EXPECT_TRUE(r[0].relevanceDefaulted);
  EXPECT_EQ(r[0].impact, 0.5);
  ASSERT_TRUE(r[0].finalScore);
  EXPECT_DOUBLE_EQ(*r[0].finalScore, 0.83);
  ASSERT_EQ(r[0].annotationTriples.size(), 1u);
  EXPECT_EQ(r[0].annotationTriples[0], (AnnotationTriple{"Sales|By Segment", "Segment", {"Consumer"}}));
}

TEST(AssessmentReply, ArrayClampsAndCollectsAnnotations) {
  auto r = parse_assessment_reply(R"(Result: [{"insightId": "ins-1", "impact": 1.7, "relevance": 0.25,
      "description": "Sales jump in March.", "explanation": "Matters.",
      "annotations": [{"viewName": "Sales Trend", "dimName": "Month", "value": "2022-03"}, {"bad": 1}]}, 3])");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].insightRef, "ins-1");
  EXPECT_EQ(r[0].impact, 1.0);
  EXPECT_EQ(r[0].relevance, 0.25);
  EXPECT_EQ(r[0].warnings.size(), 1u);
  ASSERT_EQ(r[0].annotationTriples.size(), 1u);
  EXPECT_EQ(r[0].annotationTriples[0].value, std::vector<std::string>{"2022-03"});
  EXPECT_EQ(error_of([] { parse_assessment_reply("nothing"); }).code(), ErrorCode::PlanParseError);
}

TEST(Parsers, TotalOnRandomBytes) {
  testsupport::Gen g(99);
  for (int i = 0; i < 3000; ++i) {
    const std::string s = g.bytes(160);
    EXPECT_NO_FATAL_FAILURE(parse_braced_answers(s));
    for (auto f : {+[](std::string_view x) { (void)parse_plan_reply(x); },
                   +[](std::string_view x) { (void)parse_assessment_reply(x); }}) {
      try {
        f(s);
      } catch (const Error& e) {
        ASSERT_EQ(e.code(), ErrorCode::PlanParseError);
      }
    }
  }
}

TEST(Bounded, CapsConcurrentCalls) {
  struct Slow : Provider {
    std::atomic<int> active{0}, peak{0};
    std::string complete(const PromptDoc&, const Limits&) override {
      int now = ++active;
      for (int seen = peak; now > seen && !peak.compare_exchange_weak(seen, now);) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --active;
      return "ok";
    }
    std::string id() const override { return "slow"; }
  };
  auto slow = std::make_shared<Slow>();
  BoundedProvider bounded(slow, 2);
  std::vector<std::jthread> threads;
  PromptDoc doc;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&] {
      for (int k = 0; k < 4; ++k) EXPECT_EQ(bounded.complete(doc, {}), "ok");
    });
  threads.clear();
  EXPECT_LE(slow->peak.load(), 2);
  EXPECT_GE(slow->peak.load(), 1);
  EXPECT_EQ(bounded.id(), "slow");
}

TEST(MockProviders, FailingAndScripted) {
  FailingProvider failing;
  EXPECT_EQ(error_of([&] { failing.complete({}, {}); }).code(), ErrorCode::ProviderError);
  ScriptedProvider scripted("fixed");
  EXPECT_EQ(scripted.complete({}, {}), "fixed");
  EXPECT_TRUE(MockProvider().is_mock());
  EXPECT_FALSE(scripted.is_mock());
}
