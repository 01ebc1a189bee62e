#pragma once

// Native insight functions. Each one tests a pattern against a null
// hypothesis and reports significance = 1 - p (evenness reports p itself,
// see `evenness`). All functions are pure and deterministic.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/stats.hpp"
#include "insightpilot/tabular.hpp"
#include "insightpilot/text.hpp"

namespace insightpilot {

enum class InsightType {
  OutstandingNo1,
  OutstandingTop2,
  OutstandingLast,
  Outlier,
  ChangePoint,
  Trend,
  Seasonality,
  Correlation,
  Attribution,
  Evenness,
  CrossViewCorrelation,
  ValueRetrieval,
  TextSummary,
  KeyNodes,
  KeyLinks,
};

inline constexpr InsightType kAllInsightTypes[] = {
    InsightType::OutstandingNo1, InsightType::OutstandingTop2, InsightType::OutstandingLast,
    InsightType::Outlier,        InsightType::ChangePoint,     InsightType::Trend,
    InsightType::Seasonality,    InsightType::Correlation,     InsightType::Attribution,
    InsightType::Evenness,       InsightType::CrossViewCorrelation, InsightType::ValueRetrieval,
    InsightType::TextSummary,    InsightType::KeyNodes,        InsightType::KeyLinks,
};

inline std::string_view to_string(InsightType t) {
  switch (t) {
    case InsightType::OutstandingNo1: return "outstanding_no1";
    case InsightType::OutstandingTop2: return "outstanding_top2";
    case InsightType::OutstandingLast: return "outstanding_last";
    case InsightType::Outlier: return "outlier";
    case InsightType::ChangePoint: return "change_point";
    case InsightType::Trend: return "trend";
    case InsightType::Seasonality: return "seasonality";
    case InsightType::Correlation: return "correlation";
    case InsightType::Attribution: return "attribution";
    case InsightType::Evenness: return "evenness";
    case InsightType::CrossViewCorrelation: return "cross_view_correlation";
    case InsightType::ValueRetrieval: return "value_retrieval";
    case InsightType::TextSummary: return "text_summary";
    case InsightType::KeyNodes: return "key_nodes";
    case InsightType::KeyLinks: return "key_links";
  }
  return "unknown";
}

inline std::optional<InsightType> insight_type_from(std::string_view s) {
  for (auto t : kAllInsightTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

/// Text/graph types have no native statistic; they go through the provider.
constexpr bool is_provider_routed(InsightType t) {
  return t == InsightType::TextSummary || t == InsightType::KeyNodes || t == InsightType::KeyLinks;
}

constexpr bool is_cross_view(InsightType t) {
  return t == InsightType::Correlation || t == InsightType::CrossViewCorrelation;
}

/// Smallest series length each native function accepts.
constexpr std::size_t min_points(InsightType t) {
  switch (t) {
    case InsightType::OutstandingNo1: return 5;
    case InsightType::OutstandingTop2: return 6;
    case InsightType::OutstandingLast: return 5;
    case InsightType::Outlier: return 8;
    case InsightType::ChangePoint: return 6;
    case InsightType::Trend: return 4;
    case InsightType::Seasonality: return 12;
    case InsightType::Correlation:
    case InsightType::CrossViewCorrelation: return 4;
    case InsightType::Attribution: return 2;
    case InsightType::Evenness: return 3;
    default: return 1;
  }
}

struct Subject {
  SubspaceFilter subspace;
  std::string dimension;
  std::string measure;
  nlohmann::json context = nlohmann::json::array();  ///< prior insights or free text
};

struct SignificanceDetail {
  double pValue = 1.0;
  double statistic = 0.0;
  std::string method;
};

struct Insight {
  std::string id;
  InsightType type = InsightType::ValueRetrieval;
  nlohmann::json parameters = nlohmann::json::object();
  Subject subject;
  double significance = 0.0;
  std::string description;
  std::vector<std::string> views;
  SignificanceDetail detail;
  /// Keys and values the insight was computed over (report snapshots).
  Series data;
};

inline void to_json(nlohmann::json& j, const Subject& s) {
  j = {{"subspace", s.subspace}, {"dimension", s.dimension}, {"measure", s.measure}, {"context", s.context}};
}
inline void from_json(const nlohmann::json& j, Subject& s) {
  s.subspace = j.value("subspace", SubspaceFilter{});
  s.dimension = j.value("dimension", "");
  s.measure = j.value("measure", "");
  s.context = j.value("context", nlohmann::json::array());
}

/// JSON numbers cannot hold inf/nan; map them to strings.
inline nlohmann::json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline void to_json(nlohmann::json& j, const Insight& in) {
  j = {{"id", in.id},
       {"type", to_string(in.type)},
       {"parameters", in.parameters},
       {"subject", in.subject},
       {"significance", in.significance},
       {"description", in.description},
       {"views", in.views},
       {"pValue", in.detail.pValue},
       {"statistic", json_number(in.detail.statistic)},
       {"method", in.detail.method},
       {"data", in.data}};
}

inline void from_json(const nlohmann::json& j, Insight& in) {
  in.id = j.value("id", "");
  auto t = insight_type_from(j.at("type").get<std::string>());
  if (!t) fail(ErrorCode::SchemaError, "unknown insight type " + j.at("type").dump(), "type");
  in.type = *t;
  in.parameters = j.value("parameters", nlohmann::json::object());
  in.subject = j.value("subject", Subject{});
  in.significance = j.value("significance", 0.0);
  in.description = j.value("description", "");
  in.views = j.value("views", std::vector<std::string>{});
  in.detail.pValue = j.value("pValue", 1.0);
  in.detail.statistic = j.contains("statistic") ? number_from_json(j["statistic"]) : 0.0;
  in.detail.method = j.value("method", "");
  if (j.contains("data")) in.data = j["data"].get<Series>();
}

namespace detail {

inline void require_points(const Series& s, InsightType t) {
  if (s.size() < min_points(t))
    fail(ErrorCode::TooFewPoints, std::string(to_string(t)) + " needs at least " + std::to_string(min_points(t)) +
                                      " points, got " + std::to_string(s.size()));
  if (s.has_keys() && s.keys.size() != s.values.size())
    fail(ErrorCode::InvalidArgument, "series has " + std::to_string(s.keys.size()) + " keys for " +
                                         std::to_string(s.values.size()) + " values");
  for (double v : s.values)
    if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "series contains a non-finite value");
}

inline Insight base_insight(InsightType t, const Series& s) {
  Insight in;
  in.type = t;
  in.subject.dimension = s.dimension;
  in.subject.measure = s.measure;
  in.data = s;
  return in;
}

inline void set_p(Insight& in, double p, double statistic, std::string method) {
  in.detail.pValue = stats::clip01(p);
  in.detail.statistic = statistic;
  in.detail.method = std::move(method);
  in.significance = 1.0 - in.detail.pValue;
}

inline std::string dim_label(const Series& s) { return s.dimension.empty() ? "index" : s.dimension; }
inline std::string measure_label(const Series& s) { return s.measure.empty() ? "value" : s.measure; }

/// Indices ordered by value descending; equal values keep index order.
inline std::vector<std::size_t> rank_desc(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

struct LeaderTest {
  std::vector<double> p;  ///< per leader, rank order
  std::vector<double> z;
  std::string method;
};

/// Tests the `leaders` largest values against the long-tail null fitted to
/// the rest. With all values positive: OLS of log(value) on log(rank) over
/// the non-leaders; each leader's log residual is scored against the fit's
/// residual spread (Gaussian upper tail). Otherwise a z-score of each
/// leader against the remaining values.
inline LeaderTest leader_tail_test(std::span<const double> sortedDesc, std::size_t leaders) {
  LeaderTest out;
  const std::size_t n = sortedDesc.size();
  const bool positive = std::all_of(sortedDesc.begin(), sortedDesc.end(), [](double v) { return v > 0; });
  auto tail = [](double e, double sd) {
    if (sd > 0) return std::make_pair(stats::normal_upper_tail(e / sd), e / sd);
    double z = e > 0 ? std::numeric_limits<double>::infinity() : (e < 0 ? -std::numeric_limits<double>::infinity() : 0.0);
    return std::make_pair(e > 0 ? 0.0 : (e < 0 ? 1.0 : 0.5), z);
  };
  if (positive) {
    out.method = "power-law fit (log-rank OLS), Gaussian residual tail";
    std::vector<double> x, y;
    for (std::size_t r = leaders; r < n; ++r) {
      x.push_back(std::log(static_cast<double>(r + 1)));
      y.push_back(std::log(sortedDesc[r]));
    }
    const auto fit = stats::ols(x, y);
    const double dof = static_cast<double>(x.size()) - 2.0;
    double sd = 0.0;
    if (fit.syy > 0 && fit.sse > 1e-24 * fit.syy) sd = std::sqrt(fit.sse / dof);
    for (std::size_t r = 0; r < leaders; ++r) {
      const double predicted = fit.intercept + fit.slope * std::log(static_cast<double>(r + 1));
      auto [p, z] = tail(std::log(sortedDesc[r]) - predicted, sd);
      out.p.push_back(p);
      out.z.push_back(z);
    }
  } else {
    out.method = "zscore-fallback";
    std::vector<double> rest(sortedDesc.begin() + static_cast<std::ptrdiff_t>(leaders), sortedDesc.end());
    const double m = stats::mean(rest);
    const double sd = stats::all_equal(rest) ? 0.0 : std::sqrt(stats::sample_variance(rest));
    for (std::size_t r = 0; r < leaders; ++r) {
      auto [p, z] = tail(sortedDesc[r] - m, sd);
      out.p.push_back(p);
      out.z.push_back(z);
    }
  }
  return out;
}

}  // namespace detail

/// The single leading value against a long-tail null.
inline Insight outstanding_no1(const Series& s) {
  detail::require_points(s, InsightType::OutstandingNo1);
  Insight in = detail::base_insight(InsightType::OutstandingNo1, s);
  if (stats::all_equal(s.values)) {
    detail::set_p(in, 1.0, 0.0, "degenerate: all values equal");
    in.parameters = {{"index", nullptr}};
    in.description = "All " + detail::measure_label(s) + " values are equal; no item stands out.";
    return in;
  }
  const auto order = detail::rank_desc(s.values);
  std::vector<double> sorted;
  for (auto i : order) sorted.push_back(s.values[i]);
  auto test = detail::leader_tail_test(sorted, 1);
  detail::set_p(in, test.p[0], test.z[0], test.method);
  const std::size_t top = order[0];
  in.parameters = {{"index", top}, {"key", s.key_at(top)}, {"value", s.values[top]}};
  in.description = s.key_at(top) + " has the outstanding highest " + detail::measure_label(s) + " (" +
                   text::format_fixed(s.values[top], 2) + ").";
  return in;
}

/// The two leading values; p is the larger of the two leader tails, with
/// both leaders excluded from the null fit.
inline Insight outstanding_top2(const Series& s) {
  detail::require_points(s, InsightType::OutstandingTop2);
  Insight in = detail::base_insight(InsightType::OutstandingTop2, s);
  if (stats::all_equal(s.values)) {
    detail::set_p(in, 1.0, 0.0, "degenerate: all values equal");
    in.parameters = {{"indices", nlohmann::json::array()}};
    in.description = "All " + detail::measure_label(s) + " values are equal; no pair stands out.";
    return in;
  }
  const auto order = detail::rank_desc(s.values);
  std::vector<double> sorted;
  for (auto i : order) sorted.push_back(s.values[i]);
  auto test = detail::leader_tail_test(sorted, 2);
  const std::size_t weaker = test.p[1] >= test.p[0] ? 1 : 0;
  detail::set_p(in, std::max(test.p[0], test.p[1]), test.z[weaker], test.method);
  in.parameters = {{"indices", {order[0], order[1]}},
                   {"keys", {s.key_at(order[0]), s.key_at(order[1])}},
                   {"values", {s.values[order[0]], s.values[order[1]]}}};
  in.description = s.key_at(order[0]) + " and " + s.key_at(order[1]) + " lead " + detail::measure_label(s) + " (" +
                   text::format_fixed(s.values[order[0]], 2) + " and " + text::format_fixed(s.values[order[1]], 2) +
                   ").";
  return in;
}

/// The single trailing value: outstanding_no1 on the reflection max+min-v.
inline Insight outstanding_last(const Series& s) {
  detail::require_points(s, InsightType::OutstandingLast);
  Insight in = detail::base_insight(InsightType::OutstandingLast, s);
  if (stats::all_equal(s.values)) {
    detail::set_p(in, 1.0, 0.0, "degenerate: all values equal");
    in.parameters = {{"index", nullptr}};
    in.description = "All " + detail::measure_label(s) + " values are equal; no item trails.";
    return in;
  }
  const auto [mn, mx] = std::minmax_element(s.values.begin(), s.values.end());
  const double pivot = *mn + *mx;
  std::vector<double> reflected;
  for (double v : s.values) reflected.push_back(pivot - v);
  const auto order = detail::rank_desc(reflected);
  std::vector<double> sorted;
  for (auto i : order) sorted.push_back(reflected[i]);
  auto test = detail::leader_tail_test(sorted, 1);
  detail::set_p(in, test.p[0], test.z[0], test.method + " on reflected values");
  const std::size_t last = order[0];
  in.parameters = {{"index", last}, {"key", s.key_at(last)}, {"value", s.values[last]}};
  in.description = s.key_at(last) + " has the outstanding lowest " + detail::measure_label(s) + " (" +
                   text::format_fixed(s.values[last], 2) + ").";
  return in;
}

/// Leave-one-out z-score per point, two-sided normal tail, Bonferroni over
/// n; points with corrected p < 0.05 are flagged.
inline Insight outlier(const Series& s) {
  detail::require_points(s, InsightType::Outlier);
  Insight in = detail::base_insight(InsightType::Outlier, s);
  const std::size_t n = s.size();
  if (stats::all_equal(s.values)) {
    detail::set_p(in, 1.0, 0.0, "zero variance");
    in.parameters = {{"indices", nlohmann::json::array()}, {"keys", nlohmann::json::array()}};
    in.description = "No outliers: all " + detail::measure_label(s) + " values are equal.";
    return in;
  }
  double minP = 1.0, maxZ = 0.0;
  std::vector<std::size_t> flagged;
  std::vector<double> rest;
  rest.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    rest.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) rest.push_back(s.values[j]);
    double z;
    if (stats::all_equal(rest)) {
      z = s.values[i] == rest.front() ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      z = std::fabs(s.values[i] - stats::mean(rest)) / std::sqrt(stats::sample_variance(rest));
    }
    const double p = stats::clip01(2.0 * stats::normal_upper_tail(z) * static_cast<double>(n));
    if (p < 0.05) flagged.push_back(i);
    minP = std::min(minP, p);
    maxZ = std::max(maxZ, z);
  }
  detail::set_p(in, minP, maxZ, "leave-one-out z-score, two-sided normal tail, Bonferroni x n");
  nlohmann::json keys = nlohmann::json::array(), values = nlohmann::json::array();
  for (auto i : flagged) {
    keys.push_back(s.key_at(i));
    values.push_back(s.values[i]);
  }
  in.parameters = {{"indices", flagged}, {"keys", keys}, {"values", values}};
  if (flagged.empty()) {
    in.description = "No " + detail::measure_label(s) + " value is a significant outlier.";
  } else {
    std::string list;
    for (std::size_t i = 0; i < flagged.size(); ++i) list += (i ? ", " : "") + s.key_at(flagged[i]);
    in.description = "Outlying " + detail::measure_label(s) + " at " + list + ".";
  }
  return in;
}

namespace detail {

struct WelchSplit {
  double t = 0.0;
  double df = 1.0;
  double meanBefore = 0.0;
  double meanAfter = 0.0;
};

inline WelchSplit welch(std::span<const double> a, std::span<const double> b) {
  WelchSplit w;
  w.meanBefore = stats::mean(a);
  w.meanAfter = stats::mean(b);
  const double va = stats::all_equal(a) ? 0.0 : stats::sample_variance(a);
  const double vb = stats::all_equal(b) ? 0.0 : stats::sample_variance(b);
  const double qa = va / static_cast<double>(a.size());
  const double qb = vb / static_cast<double>(b.size());
  const double se2 = qa + qb;
  const double diff = w.meanAfter - w.meanBefore;
  if (se2 == 0.0) {
    const bool same = stats::all_equal(a) && stats::all_equal(b) && a.front() == b.front();
    w.t = same ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    w.df = static_cast<double>(a.size() + b.size() - 2);
    return w;
  }
  w.t = diff / std::sqrt(se2);
  const double denom = (qa * qa) / static_cast<double>(a.size() - 1) + (qb * qb) / static_cast<double>(b.size() - 1);
  w.df = denom > 0 ? se2 * se2 / denom : static_cast<double>(a.size() + b.size() - 2);
  return w;
}

}  // namespace detail

/// Scans every split k in [2, n-2] (k = first index of the suffix) and keeps
/// the one with the largest |Welch t|; earliest split wins ties.
inline Insight change_point(const Series& s) {
  detail::require_points(s, InsightType::ChangePoint);
  Insight in = detail::base_insight(InsightType::ChangePoint, s);
  const std::size_t n = s.size();
  if (stats::all_equal(s.values)) {
    detail::set_p(in, 1.0, 0.0, "zero variance");
    in.parameters = {{"index", nullptr}};
    in.description = detail::measure_label(s) + " is constant; no change point.";
    return in;
  }
  std::span<const double> v(s.values);
  std::size_t best = 2;
  detail::WelchSplit bestSplit;
  double bestAbs = -1.0;
  for (std::size_t k = 2; k + 2 <= n; ++k) {
    auto w = detail::welch(v.subspan(0, k), v.subspan(k));
    const double a = std::fabs(w.t);
    if (a > bestAbs) {
      bestAbs = a;
      best = k;
      bestSplit = w;
    }
  }
  detail::set_p(in, stats::t_two_sided_p(bestSplit.t, bestSplit.df), bestSplit.t,
                "max |Welch t| over splits, two-sided t (Welch-Satterthwaite df)");
  in.parameters = {{"index", best},
                   {"key", s.key_at(best)},
                   {"meanBefore", bestSplit.meanBefore},
                   {"meanAfter", bestSplit.meanAfter},
                   {"direction", bestSplit.meanAfter > bestSplit.meanBefore ? 1 : -1}};
  in.description = detail::measure_label(s) + " shows a change point at " + s.key_at(best) + ", moving from an average of " +
                   text::format_fixed(bestSplit.meanBefore, 2) + " to " + text::format_fixed(bestSplit.meanAfter, 2) + ".";
  return in;
}

/// OLS slope over the index with an exact two-sided t test (df = n - 2).
/// direction is sign(slope) when p < 0.05, else 0.
inline Insight trend(const Series& s) {
  detail::require_points(s, InsightType::Trend);
  Insight in = detail::base_insight(InsightType::Trend, s);
  const std::size_t n = s.size();
  std::vector<double> x(n);
  std::iota(x.begin(), x.end(), 0.0);
  const auto fit = stats::ols(x, s.values);
  double p = 1.0, t = 0.0, slope = fit.slope;
  if (stats::all_equal(s.values)) {
    slope = 0.0;
  } else if (fit.sse <= 1e-24 * fit.syy) {
    p = slope != 0.0 ? 0.0 : 1.0;
    t = slope != 0.0 ? std::copysign(std::numeric_limits<double>::infinity(), slope) : 0.0;
  } else {
    const double se = std::sqrt(fit.sse / static_cast<double>(n - 2) / fit.sxx);
    t = slope / se;
    p = stats::t_two_sided_p(t, static_cast<double>(n - 2));
  }
  detail::set_p(in, p, t, "OLS slope t test (df = n - 2)");
  const int direction = in.detail.pValue < 0.05 ? (slope > 0 ? 1 : (slope < 0 ? -1 : 0)) : 0;
  in.parameters = {{"slope", slope}, {"direction", direction}};
  const std::string m = detail::measure_label(s), d = detail::dim_label(s);
  if (direction > 0) in.description = m + " increases over " + d + ".";
  else if (direction < 0) in.description = m + " decreases over " + d + ".";
  else in.description = m + " shows no distinct increasing or decreasing trend over " + d + ".";
  return in;
}

/// Autocorrelation peak over lags [2, n/2]; p = 2(1 - Phi(r sqrt n)) with a
/// Bonferroni factor for the number of lags scanned.
inline Insight seasonality(const Series& s) {
  detail::require_points(s, InsightType::Seasonality);
  Insight in = detail::base_insight(InsightType::Seasonality, s);
  const std::size_t n = s.size();
  if (stats::all_equal(s.values)) {
    detail::set_p(in, 1.0, 0.0, "zero variance");
    in.parameters = {{"period", nullptr}};
    in.description = detail::measure_label(s) + " is constant; no seasonality.";
    return in;
  }
  const double m = stats::mean(s.values);
  double denom = 0.0;
  for (double v : s.values) denom += (v - m) * (v - m);
  std::size_t best = 2;
  double bestR = -std::numeric_limits<double>::infinity();
  const std::size_t maxLag = n / 2;
  for (std::size_t k = 2; k <= maxLag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) num += (s.values[t] - m) * (s.values[t + k] - m);
    const double r = num / denom;
    if (r > bestR) {
      bestR = r;
      best = k;
    }
  }
  const double lags = static_cast<double>(maxLag - 1);
  const double p = 2.0 * stats::normal_upper_tail(bestR * std::sqrt(static_cast<double>(n))) * lags;
  detail::set_p(in, p, bestR, "autocorrelation peak, normal tail, Bonferroni x lags");
  in.parameters = {{"period", best}, {"autocorrelation", bestR}};
  in.description = detail::measure_label(s) + " repeats with a period of " + std::to_string(best) + " " +
                   detail::dim_label(s) + " steps (autocorrelation " + text::format_fixed(bestR, 2) + ").";
  return in;
}

/// Pearson correlation with an exact t test. When the two series come
/// from different views the insight is typed cross_view_correlation.
inline Insight correlation(const Series& a, const Series& b) {
  if (a.size() != b.size())
    fail(ErrorCode::MisalignedSeries, "series lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.has_keys() && b.has_keys() && a.keys != b.keys)
    fail(ErrorCode::MisalignedSeries, "series are keyed on different dimension values");
  detail::require_points(a, InsightType::Correlation);
  detail::require_points(b, InsightType::Correlation);
  if (stats::all_equal(a.values) || stats::all_equal(b.values))
    fail(ErrorCode::ZeroVariance, "correlation needs non-constant series");
  Insight in = detail::base_insight(InsightType::Correlation, a);
  const std::size_t n = a.size();
  const double ma = stats::mean(a.values), mb = stats::mean(b.values);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.values[i] - ma, db = b.values[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const double r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  const double oneMinus = 1.0 - r * r;
  double p, t;
  if (oneMinus <= 1e-15) {
    p = 0.0;
    t = std::copysign(std::numeric_limits<double>::infinity(), r);
  } else {
    t = r * std::sqrt(static_cast<double>(n - 2) / oneMinus);
    p = stats::t_two_sided_p(t, static_cast<double>(n - 2));
  }
  detail::set_p(in, p, t, "Pearson r, two-sided t (df = n - 2)");
  const int direction = r > 0 ? 1 : (r < 0 ? -1 : 0);
  in.parameters = {{"r", r}, {"direction", direction}, {"measures", {a.measure, b.measure}}};
  in.subject.measure = a.measure;
  const std::string strength = std::fabs(r) >= 0.7 ? "strong" : (std::fabs(r) >= 0.4 ? "moderate" : "weak");
  in.description = detail::measure_label(a) + " and " + detail::measure_label(b) + " show a " + strength + " " +
                   (direction >= 0 ? "positive" : "negative") + " correlation (r = " + text::format_fixed(r, 2) + ").";
  return in;
}

namespace detail {

inline double checked_total(const Series& s) {
  double total = 0.0;
  for (double v : s.values) {
    if (v < 0) fail(ErrorCode::InvalidArgument, "aggregate shares need non-negative values");
    total += v;
  }
  if (!(total > 0)) fail(ErrorCode::ZeroTotal, "values sum to zero");
  return total;
}

}  // namespace detail

/// Share of the largest category against the uniform share 1/n with
/// multinomial variance over the total; two-sided normal tail.
inline Insight attribution(const Series& s) {
  detail::require_points(s, InsightType::Attribution);
  const double total = detail::checked_total(s);
  Insight in = detail::base_insight(InsightType::Attribution, s);
  const std::size_t n = s.size();
  const std::size_t lead = detail::rank_desc(s.values).front();
  const double share = s.values[lead] / total;
  const double p0 = 1.0 / static_cast<double>(n);
  const double sd = std::sqrt(p0 * (1.0 - p0) / total);
  const double z = (share - p0) / sd;
  detail::set_p(in, 2.0 * stats::normal_upper_tail(std::fabs(z)), z, "leader share z-test vs uniform (multinomial variance)");
  in.parameters = {{"index", lead}, {"key", s.key_at(lead)}, {"share", share}};
  in.description = s.key_at(lead) + " accounts for " + text::format_fixed(100.0 * share, 1) + "% of total " +
                   detail::measure_label(s) + ".";
  return in;
}

/// Chi-square goodness of fit against a uniform split. Significance is the
/// p-value itself: high means the values are consistent with evenness.
inline Insight evenness(const Series& s) {
  detail::require_points(s, InsightType::Evenness);
  const double total = detail::checked_total(s);
  Insight in = detail::base_insight(InsightType::Evenness, s);
  const double expected = total / static_cast<double>(s.size());
  double chi = 0.0;
  for (double v : s.values) chi += (v - expected) * (v - expected) / expected;
  const double p = stats::chi_square_upper_tail(chi, static_cast<double>(s.size() - 1));
  in.detail.pValue = p;
  in.detail.statistic = chi;
  in.detail.method = "chi-square goodness of fit vs uniform; significance = p (inverted: high = even)";
  in.significance = p;
  in.parameters = {{"chiSquare", chi}, {"even", p >= 0.05}};
  in.description = detail::measure_label(s) + (p >= 0.05 ? " is evenly distributed across " : " is unevenly distributed across ") +
                   detail::dim_label(s) + ".";
  return in;
}

/// Looks up the aggregated measure at `key` within the subject's subspace.
inline Insight value_retrieval(const Table& t, const Subject& subject, const std::string& key,
                               Aggregate agg = Aggregate::Sum) {
  Table sub = apply_subspace(t, subject.subspace);
  Series s = group_aggregate(sub, subject.dimension, subject.measure, agg);
  auto it = std::find(s.keys.begin(), s.keys.end(), key);
  if (it == s.keys.end())
    fail(ErrorCode::KeyNotFound, "'" + key + "' not found in " + subject.dimension + " within the subspace", key);
  const auto i = static_cast<std::size_t>(it - s.keys.begin());
  Insight in;
  in.type = InsightType::ValueRetrieval;
  in.subject = subject;
  in.data = s;
  in.detail = {0.0, s.values[i], "lookup"};
  in.significance = 1.0;
  in.parameters = {{"key", key}, {"value", s.values[i]}};
  in.description = subject.measure + " for " + key + " is " + text::format_fixed(s.values[i], 2) + ".";
  return in;
}

/// Dispatch for the single-series native functions.
inline Insight compute_series_insight(InsightType t, const Series& s) {
  switch (t) {
    case InsightType::OutstandingNo1: return outstanding_no1(s);
    case InsightType::OutstandingTop2: return outstanding_top2(s);
    case InsightType::OutstandingLast: return outstanding_last(s);
    case InsightType::Outlier: return outlier(s);
    case InsightType::ChangePoint: return change_point(s);
    case InsightType::Trend: return trend(s);
    case InsightType::Seasonality: return seasonality(s);
    case InsightType::Attribution: return attribution(s);
    case InsightType::Evenness: return evenness(s);
    default:
      fail(ErrorCode::InvalidArgument, std::string(to_string(t)) + " is not a single-series native function");
  }
}

}  // namespace insightpilot
