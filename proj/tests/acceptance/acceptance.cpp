// Acceptance suite: one PASS/FAIL line per headline criterion.

#include <boost/math/distributions/binomial.hpp>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "../support.hpp"
#include "insightpilot/bench.hpp"
#include "insightpilot/mock_provider.hpp"
#include "insightpilot/recommend.hpp"
#include "insightpilot/service.hpp"
#include "insightpilot/tutorial.hpp"

using namespace insightpilot;
using nlohmann::json;
using testsupport::fixtures;
using testsupport::Gen;
using testsupport::TempDir;

namespace {

/// Thrown by `need` to end a criterion with a reason.
struct Unmet {
  std::string why;
};

void need(bool ok, const std::string& why) {
  if (!ok) throw Unmet{why};
}

template <class... Parts>
std::string str(const Parts&... parts) {
  std::ostringstream o;
  (o << ... << parts);
  return o.str();
}

int failures = 0;

void criterion(const std::string& name, double budgetSeconds, const std::function<void()>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string why;
  try {
    body();
  } catch (const Unmet& u) {
    why = u.why;
  } catch (const Error& e) {
    why = str("unexpected ", to_string(e.code()), ": ", e.detail());
  } catch (const std::exception& e) {
    why = str("unexpected exception: ", e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (why.empty() && secs >= budgetSeconds) why = str("took ", secs, " s, budget ", budgetSeconds, " s");
  if (why.empty()) {
    std::cout << "PASS " << name << " (" << std::fixed << std::setprecision(2) << secs << " s)\n";
  } else {
    ++failures;
    std::cout << "FAIL " << name << ": " << why << "\n";
  }
  std::cout.flush();
}

// Welch |t| from first principles for the change-point scan.
double welch_abs_t(const std::vector<double>& v, std::size_t k) {
  auto moments = [](auto b, auto e) {
    double n = static_cast<double>(e - b), m = 0, ss = 0;
    for (auto it = b; it != e; ++it) m += *it;
    m /= n;
    for (auto it = b; it != e; ++it) ss += (*it - m) * (*it - m);
    return std::make_pair(m, ss / (n - 1) / n);
  };
  auto [m1, q1] = moments(v.begin(), v.begin() + static_cast<long>(k));
  auto [m2, q2] = moments(v.begin() + static_cast<long>(k), v.end());
  return std::fabs(m2 - m1) / std::sqrt(q1 + q2);
}

const std::vector<InsightType> kSeriesTypes{InsightType::OutstandingNo1, InsightType::OutstandingTop2,
                                            InsightType::OutstandingLast, InsightType::Outlier,
                                            InsightType::ChangePoint,    InsightType::Trend,
                                            InsightType::Seasonality,    InsightType::Attribution,
                                            InsightType::Evenness};

json chosen(const Insight& in) {
  json out = json::object();
  for (const char* k : {"index", "indices", "period", "direction"})
    if (in.parameters.contains(k)) out[k] = in.parameters[k];
  return out;
}

void significance_bounds() {
  Gen g(2022);
  auto check = [](const Insight& in, bool pIsSignificance) {
    need(in.significance >= 0.0 && in.significance <= 1.0,
         str(to_string(in.type), " significance ", in.significance, " outside [0,1]"));
    const double want = pIsSignificance ? in.detail.pValue : 1.0 - in.detail.pValue;
    need(std::fabs(in.significance - want) <= 1e-15,
         str(to_string(in.type), " significance ", in.significance, " vs expected ", want));
  };
  for (int i = 0; i < 10000; ++i) {
    const auto n = static_cast<std::size_t>(g.integer(12, 40));
    auto v = g.series(n);
    for (auto t : kSeriesTypes) {
      std::vector<double> w = v;
      if (t == InsightType::Attribution || t == InsightType::Evenness)
        for (auto& x : w) x = std::fabs(x) + 0.5;  // shares need positive totals
      check(compute_series_insight(t, Series::of(w)), t == InsightType::Evenness);
    }
    check(correlation(Series::of(v), Series::of(g.series(n))), false);
    if (i % 10 == 0) {
      std::string csv = "k,v\n";
      for (std::size_t r = 0; r < n; ++r) csv += "k" + std::to_string(r % 5) + "," + text::format_number(v[r]) + "\n";
      Subject subject{{}, "k", "v", json::array()};
      check(value_retrieval(parse_csv("t", csv), subject, "k" + std::to_string(g.integer(0, 4))), false);
    }
  }
}

void oracle_equivalence() {
  Gen g(2023);
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::size_t>(g.integer(6, 10));
    auto v = g.coin(0.7) ? g.distinct_series(n) : g.series(n);
    if (stats::all_equal(v)) v = g.distinct_series(n);
    const auto argmax = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    const auto argmin = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    need(outstanding_no1(Series::of(v)).parameters["index"] == argmax, str("case ", i, ": no1 index != argmax"));
    need(outstanding_last(Series::of(v)).parameters["index"] == argmin, str("case ", i, ": last index != argmin"));
    auto d = g.coin(0.5) ? g.distinct_series(n) : std::vector<double>{};
    if (d.empty())
      for (std::size_t k = 0; k < n; ++k) d.push_back(g.normal(0, 1) + (k >= n / 2 ? g.uniform(0, 3) : 0.0));
    std::size_t best = 2;
    double bestT = -1;
    for (std::size_t k = 2; k + 2 <= n; ++k)
      if (double t = welch_abs_t(d, k); t > bestT + 1e-12) {
        bestT = t;
        best = k;
      }
    need(change_point(Series::of(d)).parameters["index"] == best, str("case ", i, ": change point != scan argmax"));
  }
}

void scale_shift_invariance() {
  Gen g(2024);
  const std::vector<InsightType> shiftable{InsightType::Outlier, InsightType::ChangePoint, InsightType::Trend,
                                           InsightType::Seasonality};
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::size_t>(g.integer(12, 30));
    auto v = g.distinct_series(n);
    const double c = g.uniform(0.1, 50.0), b = g.uniform(-100.0, 100.0);
    auto w = g.series(n);
    std::vector<double> scaled, shifted, wMoved;
    for (double x : v) {
      scaled.push_back(c * x);
      shifted.push_back(x + b);
    }
    for (double x : w) wMoved.push_back(c * x + b);
    for (auto t : kSeriesTypes) {
      auto base = compute_series_insight(t, Series::of(v));
      auto sc = compute_series_insight(t, Series::of(scaled));
      need(chosen(base) == chosen(sc), str("case ", i, ": ", to_string(t), " choice changed under scaling"));
      // share and evenness tests read the totals as counts
      if (t != InsightType::Attribution && t != InsightType::Evenness)
        need(std::fabs(base.significance - sc.significance) <= 1e-9,
             str("case ", i, ": ", to_string(t), " significance moved under scaling"));
      if (std::find(shiftable.begin(), shiftable.end(), t) != shiftable.end()) {
        auto sh = compute_series_insight(t, Series::of(shifted));
        need(chosen(base) == chosen(sh), str("case ", i, ": ", to_string(t), " choice changed under shift"));
        need(std::fabs(base.significance - sh.significance) <= 1e-9,
             str("case ", i, ": ", to_string(t), " significance moved under shift"));
      }
    }
    auto base = correlation(Series::of(v), Series::of(w));
    auto moved = correlation(Series::of(scaled), Series::of(wMoved));
    need(chosen(base) == chosen(moved) && std::fabs(base.significance - moved.significance) <= 1e-9,
         str("case ", i, ": correlation changed under scale/shift"));
  }
}

Selection consumer() {
  Selection s;
  s.triples = {{"Sales|By Segment", "Segment", {"Consumer"}}};
  return s;
}

void combined_score() {
  auto spec = testsupport::superstore_spec();
  const auto& table = testsupport::superstore_table();
  MockProvider mock;
  const std::string task = "Find sales trends over time";
  auto planned = plan(spec, consumer(), task, load_registry(fixtures() / "functions.json"), mock);
  auto exec = execute(planned.plans, spec, table, consumer());
  need(exec.insights.size() >= 5, str("only ", exec.insights.size(), " insights to score"));
  auto scored = assess(exec.insights, task, table, mock);
  for (const auto& s : scored) {
    const double want = 0.5 * s.insight.significance + 0.2 * s.impact + 0.3 * s.relevance;
    need(std::fabs(s.combined - want) <= 1e-12, str(s.insight.id, ": combined ", s.combined, " vs ", want));
  }
  AssessOptions sigOnly;
  sigOnly.weights = {1.0, 0.0, 0.0};
  auto bySig = assess(exec.insights, task, table, mock, sigOnly);
  auto expected = exec.insights;
  std::stable_sort(expected.begin(), expected.end(),
                   [](const auto& a, const auto& b) { return a.significance > b.significance; });
  need(bySig.size() == expected.size(), "ranking lost insights");
  for (std::size_t i = 0; i < expected.size(); ++i)
    need(bySig[i].insight.id == expected[i].id, str("rank ", i, " differs from the significance ranking"));
}

void superstore_reproduction() {
  auto once = [] {
    auto spec = parse_spec(testsupport::slurp(fixtures() / "specs" / "superstore.vaspec.json"));
    auto table = load_csv(fixtures() / "data" / "superstore.csv");
    PlannedInsight cp{"change_point", "Sales Trend", "Sales", "Month", 1, {}, {}};
    PlannedInsight corr{"correlation", "Sales Trend", "Sales", "Month", 1, "Profit Trend", "Profit"};
    PlannedInsight top{"outstanding_top2", "Sales|By State", "Sales", "State/Province", 1, {}, {}};
    auto out = execute({cp, corr, top}, spec, table, consumer());
    need(out.failures.empty(), "a fixture plan failed: " + (out.failures.empty() ? "" : out.failures[0].message));
    return out.insights;
  };
  auto ins = once();
  need(ins.size() == 3, "expected three insights");
  need(ins[0].parameters["key"] == "2022-03", "change point at " + ins[0].parameters["key"].dump());
  need(ins[1].parameters["direction"] == 1, "correlation direction " + ins[1].parameters["direction"].dump());
  need(ins[1].significance > 0.95, str("correlation significance ", ins[1].significance));
  need(ins[2].parameters["keys"] == json({"California", "New York"}), "top states " + ins[2].parameters["keys"].dump());
  auto again = once();
  for (std::size_t i = 0; i < ins.size(); ++i) need(json(ins[i]) == json(again[i]), "rerun differs");
}

void bench_self_validation() {
  bench::BenchConfig cfg;
  need(cfg.rowCounts == std::vector<int>{20, 50, 80, 100, 120, 150, 180, 200}, "unexpected default rows");
  bench::OracleProvider oracle;
  const auto start = std::chrono::steady_clock::now();
  auto exact = bench::run_suite(cfg, oracle, {std::nullopt, 4, {}});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  need(secs < 120.0, str("mock grid took ", secs, " s"));
  need(exact.cells.size() == 64, str(exact.cells.size(), " cells"));
  for (const auto& c : exact.cells)
    need(c.correct == 50 && c.trials == 50,
         str("oracle scored ", c.correct, "/", c.trials, " on ", to_string(c.task), " rows=", c.rows));

  bench::NoisyProvider noisy(0.2, cfg.seed);
  auto res = bench::run_suite(cfg, noisy, {std::nullopt, 4, {}});
  boost::math::binomial_distribution<double> dist(cfg.trials, 0.8);
  const double lo = boost::math::quantile(dist, 0.005);
  const double hi = boost::math::quantile(boost::math::complement(dist, 0.005));
  for (const auto& c : res.cells)
    need(c.trials == cfg.trials && c.correct >= lo && c.correct <= hi,
         str("noisy ", to_string(c.task), " rows=", c.rows, " scored ", c.correct, " outside [", lo, ", ", hi, "]"));
}

std::size_t question_for(const json& body, std::string_view fn, std::string_view view) {
  for (const auto& q : body["questions"])
    if (q["plan"]["functionName"] == fn && q["plan"]["viewName"] == view) return q["index"].get<std::size_t>();
  throw Unmet{str("no ", fn, " question on ", view)};
}

void end_to_end_session() {
  TempDir dir;
  ServiceConfig cfg;
  cfg.dataRoot = dir.path();
  cfg.registry = load_registry(fixtures() / "functions.json");
  cfg.clock = [] { return std::string("2024-01-01T00:00:00Z"); };
  Service svc(std::make_shared<MockProvider>(), cfg);
  svc.preload(fixtures() / "specs", fixtures() / "data");

  auto created = svc.post_session({{"specId", "superstore"}, {"datasetId", "superstore"},
                                   {"task", "Find sales trends over time"}});
  need(created.status == 201, "session: " + created.body.dump());
  const std::string id = created.body["sessionId"];
  auto sel = svc.post_selections(id, {{"triples", consumer().triples}});
  need(sel.status == 200 && !sel.body["questions"].empty(), "selection produced no questions");
  const std::pair<const char*, const char*> picks[] = {{"change_point", "Sales Trend"},
                                                       {"correlation", "Sales Trend"},
                                                       {"trend", "Sales Trend"},
                                                       {"outstanding_no1", "Sales|By State"}};
  for (const auto& [fn, view] : picks) {
    auto ans = svc.answer(id, static_cast<long long>(question_for(sel.body, fn, view)));
    need(ans.status == 200 && !ans.body["recommendations"].empty(), str(fn, " answer: ", ans.body.dump()));
    auto ad = svc.adopt(id, {{"insightId", ans.body["recommendations"][0]["insight"]["id"]}});
    need(ad.status == 201, str(fn, " adopt: ", ad.body.dump()));
  }
  auto ended = svc.end_round(id);
  need(ended.status == 200 && ended.body["n"] == 4, "end round: " + ended.body.dump());
  auto rep = svc.report(id, 1);
  need(rep.status == 201, "report: " + rep.body.dump());
  auto tex = svc.get_report(rep.body["name"]);
  need(tex.raw.has_value(), "report source missing");
  need(count_frames(*tex.raw) == 6, str(count_frames(*tex.raw), " frames"));
  const auto reportDir = svc.reports_root() / rep.body["name"].get<std::string>();
  auto findings = check_latex(*tex.raw, reportDir);
  need(findings.empty(), str(findings.size(), " LaTeX findings, first: ", findings.empty() ? "" : findings[0].message));

  auto loaded = load(svc.sessions_root(), id);
  need(loaded.rounds.size() == 1 && loaded.rounds[0].steps.size() == 4, "persisted session lacks the 4 steps");
  need(session_stream(loaded) == svc.stream(id).body, "persisted session differs from the live one");
  TempDir copy;
  persist(loaded, copy.path());
  need(same_session(loaded, load(copy.path(), id)), "persist/load round trip differs");
}

void parser_totality() {
  need(parse_braced_answers("{998}, {993}") == std::vector<BracedValue>{998.0, 993.0}, "\"{998}, {993}\" misparsed");
  need(parse_braced_answers("decreased. {-1}") == std::vector<BracedValue>{-1.0}, "\"decreased. {-1}\" misparsed");
  Gen g(2025);
  for (int i = 0; i < 10000; ++i) {
    const std::string s = g.bytes(200);
    (void)parse_braced_answers(s);
    for (auto f : {+[](const std::string& x) { (void)parse_plan_reply(x); },
                   +[](const std::string& x) { (void)parse_assessment_reply(x); }}) {
      try {
        f(s);
      } catch (const Error& e) {
        need(e.code() == ErrorCode::PlanParseError, str("input ", i, " raised ", to_string(e.code())));
      }
    }
  }
}

void tutorial_contract() {
  auto spec = testsupport::superstore_spec();
  MockProvider mock;
  auto t = render_tutorial(spec, mock);
  need(!t.usedTemplate, "mock tour fell back: " + t.warning);
  need(t.steps.size() == 1 + 9 && spec.viewsInfo.size() == 9, str(t.steps.size(), " steps"));
  for (std::size_t k = 0; k < 9; ++k)
    need(t.steps[k + 1].title == spec.viewsInfo[k].viewName,
         str("step ", k + 1, " title '", t.steps[k + 1].title, "'"));
}

}  // namespace

int main() {
  criterion("significance bounds (10000 series)", 60, significance_bounds);
  criterion("oracle equivalence (1000 arrays, n<=10)", 600, oracle_equivalence);
  criterion("scale/shift invariance (1000 cases)", 600, scale_shift_invariance);
  criterion("combined score weights", 600, combined_score);
  criterion("superstore fixture reproduction", 5, superstore_reproduction);
  criterion("benchmark harness self-validation", 600, bench_self_validation);
  criterion("end-to-end mock session", 10, end_to_end_session);
  criterion("parser totality (10000 inputs)", 600, parser_totality);
  criterion("tutorial contract", 600, tutorial_contract);
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " failing" : std::string("acceptance: all passed"))
            << "\n";
  return failures ? 1 : 0;
}
