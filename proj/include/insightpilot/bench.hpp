#pragma once

// Harness that measures a provider's raw answers to insight questions
// against the native statistics, across table sizes.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/insights.hpp"
#include "insightpilot/provider.hpp"
#include "insightpilot/tabular.hpp"
#include "insightpilot/text.hpp"

namespace insightpilot::bench {

inline constexpr InsightType kBenchTasks[] = {
    InsightType::OutstandingNo1, InsightType::OutstandingTop2, InsightType::OutstandingLast, InsightType::Outlier,
    InsightType::ChangePoint,    InsightType::Trend,           InsightType::Seasonality,     InsightType::Correlation,
};

inline bool supported(InsightType t) {
  return std::find(std::begin(kBenchTasks), std::end(kBenchTasks), t) != std::end(kBenchTasks);
}

struct BenchConfig {
  std::vector<InsightType> tasks{std::begin(kBenchTasks), std::end(kBenchTasks)};
  std::vector<int> rowCounts{20, 50, 80, 100, 120, 150, 180, 200};
  int trials = 50;
  std::uint64_t seed = 2022;
  std::string providerId = "mock";
  /// Integer range for the outstanding tasks.
  int valueMin = 1;
  int valueMax = 1000;

  void validate() const {
    if (trials < 1) fail(ErrorCode::InvalidArgument, "trials must be at least 1");
    if (valueMin > valueMax) fail(ErrorCode::InvalidArgument, "value range is empty");
    for (std::size_t i = 0; i < rowCounts.size(); ++i) {
      if (rowCounts[i] <= 0) fail(ErrorCode::InvalidArgument, "row counts must be positive");
      if (i && rowCounts[i] <= rowCounts[i - 1]) fail(ErrorCode::InvalidArgument, "row counts must ascend");
    }
    for (auto t : tasks)
      if (!supported(t)) fail(ErrorCode::UnsupportedTask, std::string(to_string(t)) + " is not a benchmark task");
  }
};

using Answer = std::vector<BracedValue>;

struct Instance {
  InsightType task;
  int rows = 0;
  std::uint64_t seed = 0;
  std::string data;      ///< CSV shown to the provider
  std::string question;  ///< full prompt text
  Answer truth;
};

namespace detail {

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline std::string question_for(InsightType t) {
  switch (t) {
    case InsightType::OutstandingNo1:
      return "What is the outstanding No.1 value for an individual? Use {} to include the result. For example, if "
             "the No.1 value is 970, please output {970} at the end.";
    case InsightType::OutstandingTop2:
      return "What are the outstanding top 2 values for individuals? Use {} to include each result, largest first. "
             "For example, output {970}, {960} at the end.";
    case InsightType::OutstandingLast:
      return "What is the outstanding last (smallest) value for an individual? Use {} to include the result. For "
             "example, if the last value is 3, please output {3} at the end.";
    case InsightType::Outlier:
      return "Which indices hold outliers in the time series? Use {} to include each index in ascending order, for "
             "example {4}, {17}. If there is no outlier, output {none}.";
    case InsightType::ChangePoint:
      return "At which index does the level of the time series change most significantly? Give the first index "
             "after the change. Use {} to include the result, for example {12}.";
    case InsightType::Trend:
      return "What is the trend of the data in the time series over time? Output {1} for increased, {-1} for "
             "decreased and {0} when there is no distinct trend.";
    case InsightType::Seasonality:
      return "What is the period (in rows) of the strongest seasonality in the time series? Use {} to include the "
             "result, for example {7}.";
    case InsightType::Correlation:
      return "Are columns a and b correlated? Output {1} for a significant positive correlation, {-1} for a "
             "significant negative correlation and {0} for none.";
    default: break;
  }
  fail(ErrorCode::UnsupportedTask, std::string(to_string(t)) + " is not a benchmark task");
}

inline std::string preamble_for(InsightType t) {
  switch (t) {
    case InsightType::OutstandingNo1:
    case InsightType::OutstandingTop2:
    case InsightType::OutstandingLast:
      return "I have a table that shows the values for each individual, each belonging to one category, for a "
             "total of three categories.";
    case InsightType::Correlation: return "I have a table with two numeric columns a and b observed at each index.";
    default: return "I have a time series with one value per index.";
  }
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fmt2(double v) { return fixed(v, 2); }

}  // namespace detail

/// The prompt text for a task and data block.
inline std::string render_question(InsightType t, const std::string& data) {
  return detail::preamble_for(t) + "\nData:\n" + data + "\n" + "My question is: " + detail::question_for(t);
}

/// Task whose question appears in `prompt`, if any.
inline std::optional<InsightType> task_of_prompt(std::string_view prompt) {
  for (auto t : kBenchTasks)
    if (prompt.find(detail::question_for(t)) != std::string_view::npos) return t;
  return std::nullopt;
}

/// The CSV between "Data:" and the blank line that follows it.
inline std::string data_of_prompt(std::string_view prompt) {
  auto start = prompt.find("Data:\n");
  if (start == std::string_view::npos) return {};
  start += 6;
  auto end = prompt.find("\n\n", start);
  return std::string(prompt.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

/// Ground truth from the native functions; independent of any provider.
inline Answer oracle_answer(InsightType t, const std::string& csv) {
  Table table = parse_csv("bench", csv, {});
  auto col = [&](const char* name) {
    const auto& c = table.column(name, ErrorCode::UnknownMeasure);
    return Series::of(c.number, name);
  };
  switch (t) {
    case InsightType::OutstandingNo1:
    case InsightType::OutstandingLast: {
      auto s = col("value");
      auto in = t == InsightType::OutstandingNo1 ? outstanding_no1(s) : outstanding_last(s);
      // all-equal tables have no leader; every value is the answer
      return {in.parameters.contains("value") ? in.parameters["value"].get<double>() : s.values.front()};
    }
    case InsightType::OutstandingTop2: {
      auto s = col("value");
      auto in = outstanding_top2(s);
      if (!in.parameters.contains("values")) return {s.values.front(), s.values.front()};
      return {in.parameters["values"][0].get<double>(), in.parameters["values"][1].get<double>()};
    }
    case InsightType::Outlier: {
      auto in = outlier(col("value"));
      Answer a;
      for (const auto& i : in.parameters["indices"]) a.emplace_back(i.get<double>());
      std::sort(a.begin(), a.end(), [](const auto& x, const auto& y) { return std::get<double>(x) < std::get<double>(y); });
      if (a.empty()) a.emplace_back(std::string("none"));
      return a;
    }
    case InsightType::ChangePoint: {
      auto in = change_point(col("value"));
      if (in.parameters["index"].is_null()) return {std::string("none")};
      return {in.parameters["index"].get<double>()};
    }
    case InsightType::Trend: return {static_cast<double>(trend(col("value")).parameters["direction"].get<int>())};
    case InsightType::Seasonality: {
      auto in = seasonality(col("value"));
      if (in.parameters["period"].is_null()) return {std::string("none")};
      return {in.parameters["period"].get<double>()};
    }
    case InsightType::Correlation: {
      auto in = correlation(col("a"), col("b"));
      const int dir = in.detail.pValue < 0.05 ? in.parameters["direction"].get<int>() : 0;
      return {static_cast<double>(dir)};
    }
    default: fail(ErrorCode::UnsupportedTask, std::string(to_string(t)) + " is not a benchmark task");
  }
}

/// Deterministic per (task, n, seed). Outstanding tasks use the
/// category,individual_index,value layout with integers in the configured
/// range; time-series tasks use Gaussian walks rounded to two decimals.
inline Instance gen_instance(InsightType task, int n, std::uint64_t seed, int valueMin = 1, int valueMax = 1000) {
  if (!supported(task))
    fail(ErrorCode::UnsupportedTask, std::string(to_string(task)) + " has no native oracle for benchmarking");
  if (n < static_cast<int>(min_points(task)))
    fail(ErrorCode::TooFewPoints, std::string(to_string(task)) + " needs at least " +
                                      std::to_string(min_points(task)) + " rows");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::ostringstream csv;
  const auto un = static_cast<std::size_t>(n);
  switch (task) {
    case InsightType::OutstandingNo1:
    case InsightType::OutstandingTop2:
    case InsightType::OutstandingLast: {
      std::uniform_int_distribution<int> val(valueMin, valueMax), cat(1, 3);
      csv << "category,individual_index,value\n";
      for (int i = 0; i < n; ++i) csv << "\"category" << cat(rng) << "\"," << i << "," << val(rng) << "\n";
      break;
    }
    case InsightType::Correlation: {
      const double slope = std::vector<double>{-1.0, 0.0, 1.0}[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 2)(rng))];
      csv << "index,a,b\n";
      double a = 0.0;
      for (std::size_t i = 0; i < un; ++i) {
        a += gauss(rng);
        const double b = slope * a + gauss(rng) * 2.0;
        csv << i << "," << detail::fmt2(a) << "," << detail::fmt2(b) << "\n";
      }
      break;
    }
    default: {
      // Walk with an optional drift, level shift, season or spike.
      const double drift = (unit(rng) < 0.5 ? 0.0 : (unit(rng) < 0.5 ? -0.3 : 0.3));
      const std::size_t shiftAt = 2 + static_cast<std::size_t>(unit(rng) * static_cast<double>(un - 4));
      const double shift = task == InsightType::ChangePoint ? 5.0 + 5.0 * unit(rng) : 0.0;
      const int period = 4 + static_cast<int>(unit(rng) * 8);
      const std::size_t spike = static_cast<std::size_t>(unit(rng) * static_cast<double>(un));
      const bool spiky = task == InsightType::Outlier && unit(rng) < 0.5;
      csv << "index,value\n";
      double level = 50.0;
      for (std::size_t i = 0; i < un; ++i) {
        double v;
        if (task == InsightType::Seasonality) {
          v = 50.0 + 5.0 * std::sin(2.0 * M_PI * static_cast<double>(i) / period) + gauss(rng);
        } else if (task == InsightType::Outlier) {
          v = 50.0 + 2.0 * gauss(rng) + (spiky && i == spike ? 25.0 : 0.0);
        } else {
          level += drift + gauss(rng) * (task == InsightType::Trend ? 1.0 : 0.5);
          v = level + (i >= shiftAt ? shift : 0.0);
        }
        csv << i << "," << detail::fmt2(v) << "\n";
      }
    }
  }
  Instance inst;
  inst.task = task;
  inst.rows = n;
  inst.seed = seed;
  inst.data = csv.str();
  inst.question = render_question(task, inst.data);
  inst.truth = oracle_answer(task, inst.data);
  return inst;
}

inline PromptDoc bench_prompt(const Instance& inst) {
  return build_prompt(PromptKind::OpenQuestion, {{std::string(prompts::kQuestion), inst.question},
                                                 {std::string(prompts::kFormatRequirements),
                                                  "Answer in plain text and put each result inside {}."}});
}

inline bool answers_match(const Answer& expected, const Answer& got) {
  if (expected.size() != got.size()) return false;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].index() != got[i].index()) return false;
    if (std::holds_alternative<double>(expected[i])) {
      if (std::fabs(std::get<double>(expected[i]) - std::get<double>(got[i])) > 1e-6) return false;
    } else if (text::lower(std::get<std::string>(expected[i])) != text::lower(std::get<std::string>(got[i]))) {
      return false;
    }
  }
  return true;
}

struct TrialRecord {
  std::uint64_t seed = 0;
  Answer expected;
  Answer answered;
  bool correct = false;
  bool unparseable = false;
  bool transportFailure = false;
};

inline nlohmann::json answer_json(const Answer& a) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& v : a) {
    if (std::holds_alternative<double>(v)) out.push_back(std::get<double>(v));
    else out.push_back(std::get<std::string>(v));
  }
  return out;
}

inline Answer answer_from_json(const nlohmann::json& j) {
  Answer a;
  for (const auto& v : j) {
    if (v.is_number()) a.emplace_back(v.get<double>());
    else a.emplace_back(v.get<std::string>());
  }
  return a;
}

inline void to_json(nlohmann::json& j, const TrialRecord& t) {
  j = {{"seed", t.seed},
       {"expected", answer_json(t.expected)},
       {"answered", answer_json(t.answered)},
       {"correct", t.correct},
       {"unparseable", t.unparseable},
       {"transportFailure", t.transportFailure}};
}
inline void from_json(const nlohmann::json& j, TrialRecord& t) {
  t.seed = j.at("seed").get<std::uint64_t>();
  t.expected = answer_from_json(j.at("expected"));
  t.answered = answer_from_json(j.at("answered"));
  t.correct = j.at("correct").get<bool>();
  t.unparseable = j.value("unparseable", false);
  t.transportFailure = j.value("transportFailure", false);
}

/// One question; unparseable replies count as incorrect, transport failures
/// are flagged and left out of the denominator by the caller.
inline TrialRecord run_trial(Provider& provider, const Instance& inst, const Limits& limits = {}) {
  TrialRecord rec;
  rec.seed = inst.seed;
  rec.expected = inst.truth;
  std::string reply;
  try {
    reply = provider.complete(bench_prompt(inst), limits);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ProviderError) throw;
    rec.transportFailure = true;
    return rec;
  }
  rec.answered = parse_braced_answers(reply);
  rec.unparseable = rec.answered.empty();
  rec.correct = !rec.unparseable && answers_match(rec.expected, rec.answered);
  return rec;
}

struct BenchCell {
  InsightType task;
  int rows = 0;
  int correct = 0;
  int trials = 0;  ///< trials with a reply (transport failures excluded)
  int transportFailures = 0;
  std::vector<TrialRecord> perTrial;

  double accuracy() const { return trials ? static_cast<double>(correct) / trials : 0.0; }
};

inline void to_json(nlohmann::json& j, const BenchCell& c) {
  j = {{"task", to_string(c.task)},   {"rows", c.rows},
       {"correct", c.correct},        {"trials", c.trials},
       {"transportFailures", c.transportFailures}, {"perTrial", c.perTrial}};
}
inline void from_json(const nlohmann::json& j, BenchCell& c) {
  auto t = insight_type_from(j.at("task").get<std::string>());
  if (!t) fail(ErrorCode::SchemaError, "unknown task in bench record");
  c.task = *t;
  c.rows = j.at("rows").get<int>();
  c.correct = j.at("correct").get<int>();
  c.trials = j.at("trials").get<int>();
  c.transportFailures = j.value("transportFailures", 0);
  c.perTrial = j.at("perTrial").get<std::vector<TrialRecord>>();
}

struct BenchResult {
  std::vector<BenchCell> cells;
  const BenchCell* find(InsightType t, int rows) const {
    for (const auto& c : cells)
      if (c.task == t && c.rows == rows) return &c;
    return nullptr;
  }
};

inline std::uint64_t trial_seed(std::uint64_t seed, InsightType t, int rows, int trial) {
  return detail::mix(detail::mix(detail::mix(seed, static_cast<std::uint64_t>(t) + 1), static_cast<std::uint64_t>(rows)),
                     static_cast<std::uint64_t>(trial));
}

struct SuiteOptions {
  std::optional<std::filesystem::path> checkpoint;  ///< JSON-lines of finished cells
  unsigned parallelism = 1;
  Limits limits;
};

/// Runs the full (task, rowCount) grid. Finished cells are appended to the
/// checkpoint file and skipped when the suite is run again.
inline BenchResult run_suite(const BenchConfig& cfg, Provider& provider, const SuiteOptions& opts = {}) {
  cfg.validate();
  BenchResult result;
  std::vector<BenchCell> done;
  if (opts.checkpoint && std::filesystem::exists(*opts.checkpoint)) {
    std::ifstream in(*opts.checkpoint);
    std::string line;
    while (std::getline(in, line)) {
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;  // a torn final line from an interrupted run
      try {
        done.push_back(j.get<BenchCell>());
      } catch (const std::exception&) {
      }
    }
  }
  std::ofstream ckpt;
  if (opts.checkpoint) {
    ckpt.open(*opts.checkpoint, std::ios::app);
    if (!ckpt) fail(ErrorCode::IoError, "cannot open checkpoint " + opts.checkpoint->string());
  }
  for (auto task : cfg.tasks) {
    for (int rows : cfg.rowCounts) {
      auto prior = std::find_if(done.begin(), done.end(), [&](const auto& c) {
        return c.task == task && c.rows == rows && static_cast<int>(c.perTrial.size()) == cfg.trials;
      });
      if (prior != done.end()) {
        result.cells.push_back(*prior);
        continue;
      }
      BenchCell cell{task, rows, 0, 0, 0, std::vector<TrialRecord>(static_cast<std::size_t>(cfg.trials))};
      auto work = [&](int from, int step) {
        for (int k = from; k < cfg.trials; k += step) {
          auto inst = gen_instance(task, rows, trial_seed(cfg.seed, task, rows, k), cfg.valueMin, cfg.valueMax);
          cell.perTrial[static_cast<std::size_t>(k)] = run_trial(provider, inst, opts.limits);
        }
      };
      const unsigned workers = std::max(1u, opts.parallelism);
      if (workers == 1) {
        work(0, 1);
      } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, static_cast<int>(w), static_cast<int>(workers));
      }
      for (const auto& t : cell.perTrial) {
        if (t.transportFailure) {
          ++cell.transportFailures;
          continue;
        }
        ++cell.trials;
        if (t.correct) ++cell.correct;
      }
      if (ckpt.is_open()) ckpt << nlohmann::json(cell).dump() << "\n" << std::flush;
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

/// Writes bench_results.csv (task,rows,correct,trials,accuracy) and
/// bench_plot.json (one accuracy-vs-rows series per task) into `dir`.
inline void emit_results(const BenchResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  std::ofstream csv(dir / "bench_results.csv", std::ios::binary | std::ios::trunc);
  if (!csv) fail(ErrorCode::IoError, "cannot write " + (dir / "bench_results.csv").string());
  csv << "task,rows,correct,trials,accuracy\n";
  nlohmann::ordered_json plot = {{"xLabel", "rows"}, {"yLabel", "correct trials"}, {"series", nlohmann::json::array()}};
  for (const auto& c : result.cells) {
    csv << to_string(c.task) << "," << c.rows << "," << c.correct << "," << c.trials << ","
        << detail::fixed(c.accuracy(), 4) << "\n";
    auto& series = plot["series"];
    auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s["task"] == to_string(c.task); });
    if (it == series.end()) {
      series.push_back({{"task", to_string(c.task)}, {"rows", nlohmann::json::array()},
                        {"correct", nlohmann::json::array()}, {"trials", nlohmann::json::array()}});
      it = std::prev(series.end());
    }
    (*it)["rows"].push_back(c.rows);
    (*it)["correct"].push_back(c.correct);
    (*it)["trials"].push_back(c.trials);
  }
  if (!csv) fail(ErrorCode::IoError, "short write to bench_results.csv");
  std::ofstream pj(dir / "bench_plot.json", std::ios::binary | std::ios::trunc);
  if (!pj) fail(ErrorCode::IoError, "cannot write " + (dir / "bench_plot.json").string());
  pj << plot.dump(2) << "\n";
}

/// Answers by running the native functions on the data in the prompt.
class OracleProvider : public Provider {
 public:
  std::string complete(const PromptDoc& prompt, const Limits&) override {
    const std::string q = prompt.body_of(prompts::kQuestion);
    auto task = task_of_prompt(q);
    if (!task) return "I cannot tell which task this is.";
    return "The answer is " + format_braced(oracle_answer(*task, data_of_prompt(q))) + ".";
  }
  std::string id() const override { return "mock-oracle"; }
  bool is_mock() const override { return true; }
};

/// Oracle answers corrupted with probability `errorRate`, drawn from a hash
/// of (seed, prompt) so runs are reproducible.
class NoisyProvider : public Provider {
 public:
  explicit NoisyProvider(double errorRate = 0.2, std::uint64_t seed = 2022) : rate_(errorRate), seed_(seed) {}

  std::string complete(const PromptDoc& prompt, const Limits& limits) override {
    const std::string q = prompt.body_of(prompts::kQuestion);
    const double u =
        static_cast<double>(detail::mix(seed_, text::fnv1a(q)) >> 11) * (1.0 / 9007199254740992.0);
    auto task = task_of_prompt(q);
    if (!task || u >= rate_) return oracle_.complete(prompt, limits);
    Answer a = oracle_answer(*task, data_of_prompt(q));
    // Every corruption is guaranteed to differ from the truth.
    if (*task == InsightType::Trend || *task == InsightType::Correlation) {
      const double d = std::get<double>(a.front());
      a = {d >= 1.0 ? -1.0 : d + 1.0};
    } else if (std::holds_alternative<std::string>(a.front())) {
      a = {0.0};
    } else if (*task == InsightType::Outlier) {
      a = {std::string("none")};
    } else {
      a.back() = std::get<double>(a.back()) + 1.0;
    }
    return "The answer is " + format_braced(a) + ".";
  }
  std::string id() const override { return "mock-noisy"; }
  bool is_mock() const override { return true; }

 private:
  double rate_;
  std::uint64_t seed_;
  OracleProvider oracle_;
};

}  // namespace insightpilot::bench
