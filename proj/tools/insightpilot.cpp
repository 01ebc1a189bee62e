// Command-line entry point: HTTP server, spec validation, a terminal
// exploration loop, the benchmark harness and offline report generation.

#include <csignal>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "insightpilot/bench.hpp"
#include "insightpilot/http_provider.hpp"
#include "insightpilot/mock_provider.hpp"
#include "insightpilot/service.hpp"

namespace ip = insightpilot;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<ip::Provider> make_provider(const std::string& kind, unsigned parallelism) {
  std::shared_ptr<ip::Provider> inner;
  if (kind == "mock") inner = std::make_shared<ip::MockProvider>();
  else if (kind == "http") inner = std::make_shared<ip::HttpProvider>(ip::HttpProviderConfig::from_env());
  else ip::fail(ip::ErrorCode::InvalidArgument, "unknown provider '" + kind + "'");
  return std::make_shared<ip::BoundedProvider>(inner, static_cast<std::ptrdiff_t>(parallelism));
}

struct CommonPaths {
  std::string specs;
  std::string data;
  std::string functions;
  std::string root = "insightpilot-data";
  std::string provider = "mock";
  unsigned parallelism = 2;
};

void add_common(CLI::App* cmd, CommonPaths& p) {
  cmd->add_option("--specs", p.specs, "Directory of *.vaspec.json files")->check(CLI::ExistingDirectory);
  cmd->add_option("--data", p.data, "Directory of *.csv datasets")->check(CLI::ExistingDirectory);
  cmd->add_option("--functions", p.functions, "Insight function registry (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--root", p.root, "Directory for sessions and reports");
  cmd->add_option("--provider", p.provider, "mock | http")->check(CLI::IsMember({"mock", "http"}));
  cmd->add_option("--parallelism", p.parallelism, "Concurrent provider calls")->check(CLI::PositiveNumber);
}

ip::ServiceConfig service_config(const CommonPaths& p) {
  ip::ServiceConfig cfg;
  cfg.dataRoot = p.root;
  if (!p.functions.empty()) cfg.registry = ip::load_registry(p.functions);
  else std::cerr << "warning: no --functions registry given; selections will propose no questions\n";
  return cfg;
}

int print_error(const ip::Error& e) {
  std::cerr << "error: " << ip::to_string(e.code()) << ": " << e.detail();
  if (!e.path().empty()) std::cerr << " (at " << e.path() << ")";
  std::cerr << "\n";
  return 2;
}

int cmd_validate(const std::string& specPath, const std::string& csvPath) {
  std::ifstream in(specPath, std::ios::binary);
  if (!in) ip::fail(ip::ErrorCode::IoError, "cannot read " + specPath);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    ip::fail(ip::ErrorCode::SyntaxError, e.what(), "byte " + std::to_string(e.byte));
  }
  auto spec = ip::spec_from_json(doc);
  std::optional<std::vector<std::string>> columns;
  if (!csvPath.empty()) columns = ip::load_csv(csvPath).column_names();
  auto report = ip::validate_spec(spec, columns);
  for (const auto& f : report) std::cout << f.severity << " " << f.path << ": " << f.message << "\n";
  if (!report.empty()) return 1;
  std::cout << "ok: " << spec.viewsInfo.size() << " views, " << spec.coordinations.size() << " coordinations\n";
  return 0;
}

void print_response(const ip::ApiResponse& r) {
  std::cout << r.status << "\n";
  if (r.raw) std::cout << *r.raw;
  else std::cout << r.body.dump(2) << "\n";
}

/// Line protocol on stdin; each command mirrors one endpoint.
int cmd_explore(const CommonPaths& p, const std::string& specId, const std::string& datasetId, const std::string& task,
                const std::string& fixedClock) {
  auto cfg = service_config(p);
  if (!fixedClock.empty()) cfg.clock = [fixedClock] { return fixedClock; };
  ip::Service svc(make_provider(p.provider, p.parallelism), cfg);
  svc.preload(p.specs, p.data);
  nlohmann::json start = {{"specId", specId}, {"datasetId", datasetId}};
  if (!task.empty()) start["task"] = task;
  auto created = svc.post_session(start);
  std::cout << "> start\n";
  print_response(created);
  if (created.status != 201) return 1;
  const std::string id = created.body["sessionId"];
  std::vector<std::string> lastIds;

  std::string line;
  while (std::getline(std::cin, line)) {
    line = ip::text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::cout << "> " << line << "\n";
    std::istringstream words(line);
    std::string cmd;
    words >> cmd;
    std::string rest;
    std::getline(words, rest);
    rest = ip::text::trim(rest);
    ip::ApiResponse r;
    if (cmd == "quit" || cmd == "exit") break;
    if (cmd == "help") {
      std::cout << "commands: tutorial | select <json triples> | answer <k> | ask <text> | adopt <n|insightId> | end "
                   "| stream | report <round> | quit\n";
      continue;
    } else if (cmd == "tutorial") {
      r = svc.get_tutorial(specId);
    } else if (cmd == "select") {
      auto triples = nlohmann::json::parse(rest.empty() ? "[]" : rest, nullptr, false);
      if (triples.is_discarded()) {
        std::cout << "error: select expects a JSON array of {viewName, dimName, value}\n";
        continue;
      }
      r = svc.post_selections(id, {{"triples", triples}});
    } else if (cmd == "answer") {
      long long k = -1;
      std::istringstream(rest) >> k;
      r = svc.answer(id, k);
      lastIds.clear();
      if (r.status == 200)
        for (const auto& rec : r.body["recommendations"]) lastIds.push_back(rec["insight"]["id"]);
    } else if (cmd == "ask") {
      r = svc.ask(id, {{"text", rest}});
    } else if (cmd == "adopt") {
      std::string insightId = rest;
      if (!rest.empty() && std::all_of(rest.begin(), rest.end(), [](unsigned char c) { return std::isdigit(c); })) {
        const auto n = std::stoul(rest);
        insightId = n < lastIds.size() ? lastIds[n] : rest;
      }
      r = svc.adopt(id, {{"insightId", insightId}});
    } else if (cmd == "end") {
      r = svc.end_round(id);
    } else if (cmd == "stream") {
      r = svc.stream(id);
    } else if (cmd == "report") {
      int round = 0;
      std::istringstream(rest) >> round;
      r = svc.report(id, round);
    } else {
      std::cout << "unknown command '" << cmd << "' (try help)\n";
      continue;
    }
    print_response(r);
  }
  return 0;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!ip::text::trim(item).empty()) out.push_back(ip::text::trim(item));
  return out;
}

int cmd_bench(const std::string& tasks, const std::string& rows, int trials, std::uint64_t seed,
              const std::string& provider, double errorRate, const std::string& out, const std::string& checkpoint,
              unsigned jobs) {
  ip::bench::BenchConfig cfg;
  if (!tasks.empty()) {
    cfg.tasks.clear();
    for (const auto& t : split_list(tasks)) {
      auto type = ip::insight_type_from(t);
      if (!type) ip::fail(ip::ErrorCode::UnsupportedTask, "unknown task '" + t + "'");
      cfg.tasks.push_back(*type);
    }
  }
  if (!rows.empty()) {
    cfg.rowCounts.clear();
    for (const auto& r : split_list(rows)) cfg.rowCounts.push_back(std::stoi(r));
  }
  cfg.trials = trials;
  cfg.seed = seed;
  std::shared_ptr<ip::Provider> p;
  if (provider == "mock") p = std::make_shared<ip::bench::OracleProvider>();
  else if (provider == "noisy") p = std::make_shared<ip::bench::NoisyProvider>(errorRate, seed);
  else p = std::make_shared<ip::BoundedProvider>(std::make_shared<ip::HttpProvider>(ip::HttpProviderConfig::from_env()),
                                                 static_cast<std::ptrdiff_t>(jobs));
  ip::bench::SuiteOptions opts;
  if (!checkpoint.empty()) opts.checkpoint = checkpoint;
  opts.parallelism = jobs;
  auto result = ip::bench::run_suite(cfg, *p, opts);
  ip::bench::emit_results(result, out);
  for (const auto& c : result.cells)
    std::cout << ip::to_string(c.task) << " rows=" << c.rows << " " << c.correct << "/" << c.trials
              << (c.transportFailures ? " transport-failures=" + std::to_string(c.transportFailures) : "") << "\n";
  std::cout << "wrote " << (fs::path(out) / "bench_results.csv").string() << "\n";
  return 0;
}

int cmd_report(const CommonPaths& p, const std::string& sessionId, int round, const std::string& out) {
  auto session = ip::load(fs::path(p.root) / "sessions", sessionId);
  auto provider = make_provider(p.provider, p.parallelism);
  const fs::path dir = out.empty() ? fs::path(p.root) / "reports" /
                                         (ip::text::file_stem(sessionId) + "_" + std::to_string(round))
                                   : fs::path(out);
  auto written = ip::write_report(session, round, *provider, dir);
  for (const auto& w : written.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& f : written.findings) std::cerr << "latex line " << f.line << ": " << f.message << "\n";
  std::cout << written.texPath.string() << "\n";
  return written.findings.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-initiative visual analytics assistant"};
  app.require_subcommand(1);

  CommonPaths serveP;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  add_common(serve, serveP);
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(1, 65535));

  std::string specPath, csvPath;
  auto* validate = app.add_subcommand("validate-spec", "Check a view specification document");
  validate->add_option("spec", specPath)->required()->check(CLI::ExistingFile);
  validate->add_option("--data", csvPath, "CSV whose columns the fields must name")->check(CLI::ExistingFile);

  CommonPaths exploreP;
  std::string specId = "superstore", datasetId = "superstore", task, clock;
  auto* explore = app.add_subcommand("explore", "Interactive session on stdin");
  add_common(explore, exploreP);
  explore->add_option("--spec-id", specId);
  explore->add_option("--dataset-id", datasetId);
  explore->add_option("--task", task, "Analysis task (proposed when omitted)");
  explore->add_option("--fixed-clock", clock, "Timestamp used for every step");

  std::string tasks, rows, out = "bench-out", checkpoint, provider = "mock";
  int trials = 50;
  std::uint64_t seed = 2022;
  double errorRate = 0.2;
  unsigned jobs = 1;
  auto* bench = app.add_subcommand("bench", "Score a provider's answers against the native functions");
  bench->add_option("--tasks", tasks, "Comma-separated task names");
  bench->add_option("--rows", rows, "Comma-separated ascending row counts");
  bench->add_option("--trials", trials)->check(CLI::PositiveNumber);
  bench->add_option("--seed", seed);
  bench->add_option("--provider", provider, "mock | noisy | http")->check(CLI::IsMember({"mock", "noisy", "http"}));
  bench->add_option("--error-rate", errorRate, "Corruption rate for the noisy provider")->check(CLI::Range(0.0, 1.0));
  bench->add_option("--out", out);
  bench->add_option("--checkpoint", checkpoint, "Resumable progress file");
  bench->add_option("--jobs", jobs)->check(CLI::PositiveNumber);

  CommonPaths reportP;
  std::string sessionId, reportOut;
  int round = 1;
  auto* report = app.add_subcommand("report", "Write the LaTeX report for a stored session round");
  add_common(report, reportP);
  report->add_option("--session", sessionId)->required();
  report->add_option("--round", round)->check(CLI::PositiveNumber);
  report->add_option("--out", reportOut);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      auto cfg = service_config(serveP);
      ip::Service svc(make_provider(serveP.provider, serveP.parallelism), cfg);
      svc.preload(serveP.specs, serveP.data);
      httplib::Server srv;
      svc.bind(srv);
      static httplib::Server* running = &srv;
      std::signal(SIGINT, [](int) { running->stop(); });
      std::signal(SIGTERM, [](int) { running->stop(); });
      std::cerr << "listening on http://" << host << ":" << port << "\n";
      if (!srv.listen(host, port)) ip::fail(ip::ErrorCode::IoError, "cannot listen on port " + std::to_string(port));
      return 0;
    }
    if (*validate) return cmd_validate(specPath, csvPath);
    if (*explore) return cmd_explore(exploreP, specId, datasetId, task, clock);
    if (*bench) return cmd_bench(tasks, rows, trials, seed, provider, errorRate, out, checkpoint, jobs);
    if (*report) return cmd_report(reportP, sessionId, round, reportOut);
  } catch (const ip::Error& e) {
    return print_error(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
