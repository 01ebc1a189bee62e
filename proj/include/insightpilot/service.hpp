#pragma once

// HTTP API over live exploration sessions. Handlers are plain methods that
// return (status, body) so tests can drive them without a socket; bind()
// mounts them on an httplib server.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <boost/beast/core/detail/base64.hpp>
#include <httplib.h>
#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/mock_provider.hpp"
#include "insightpilot/provider.hpp"
#include "insightpilot/recommend.hpp"
#include "insightpilot/report.hpp"
#include "insightpilot/session.hpp"
#include "insightpilot/spec.hpp"
#include "insightpilot/tabular.hpp"
#include "insightpilot/tutorial.hpp"

namespace insightpilot {

/// One HTTP status per error code.
inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::SyntaxError:
    case ErrorCode::SchemaError:
    case ErrorCode::RaggedRow:
    case ErrorCode::EmptyFile: return 400;
    case ErrorCode::NotFound:
    case ErrorCode::UnknownRound:
    case ErrorCode::KeyNotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::NoOpenRound:
    case ErrorCode::RoundStillOpen:
    case ErrorCode::EmptyRound: return 409;
    case ErrorCode::ProviderError:
    case ErrorCode::PlanParseError:
    case ErrorCode::MalformedTutorial: return 502;
    case ErrorCode::IoError:
    case ErrorCode::CorruptSession:
    case ErrorCode::MissingImage: return 500;
    case ErrorCode::UnknownView:
    case ErrorCode::UnknownDim:
    case ErrorCode::UnknownMeasure:
    case ErrorCode::TypeMismatch:
    case ErrorCode::EmptyBase:
    case ErrorCode::TooFewPoints:
    case ErrorCode::DegenerateDistribution:
    case ErrorCode::ZeroVariance:
    case ErrorCode::MisalignedSeries:
    case ErrorCode::ZeroTotal:
    case ErrorCode::SubjectResolutionError:
    case ErrorCode::AnnotationTargetMissing:
    case ErrorCode::MissingInput:
    case ErrorCode::UnsupportedTask:
    case ErrorCode::InvalidArgument: return 422;
  }
  return 500;
}

struct ApiResponse {
  ApiResponse() = default;
  ApiResponse(int s, nlohmann::json b) : status(s), body(std::move(b)) {}

  int status = 200;
  nlohmann::json body = nlohmann::json::object();
  /// Set for non-JSON payloads (the .tex download).
  std::optional<std::string> raw;
  std::string contentType = "application/json";
};

/// {code, message, detail}; provider-side failures also name the chat channel
/// so the client shows them in the conversation.
inline ApiResponse error_response(const Error& e) {
  ApiResponse r;
  r.status = http_status(e.code());
  r.body = {{"code", to_string(e.code())}, {"message", e.detail()}};
  r.body["detail"] = e.path().empty() ? nlohmann::json(nullptr) : nlohmann::json{{"path", e.path()}};
  if (e.code() == ErrorCode::ProviderError || e.code() == ErrorCode::PlanParseError) r.body["channel"] = "chat";
  return r;
}

struct ServiceConfig {
  std::filesystem::path dataRoot = "insightpilot-data";  ///< sessions/ and reports/ live here
  Registry registry;
  PlanOptions planOptions;
  AssessOptions assessOptions;
  LatexStyle latexStyle;
  std::size_t recommendationLimit = 5;
  Clock clock = utc_now;
  std::string corsOrigin = "*";
};

class Service {
 public:
  Service(std::shared_ptr<Provider> provider, ServiceConfig cfg)
      : provider_(std::move(provider)), cfg_(std::move(cfg)) {}

  // -- stores -----------------------------------------------------------------

  void add_dataset(Table t) {
    std::unique_lock lock(mu_);
    auto id = t.name();
    datasets_.insert_or_assign(id, std::make_shared<const Table>(std::move(t)));
  }

  std::string add_spec(SystemSpec spec, std::string id = {}) {
    auto report = validate_spec(spec);
    if (!report.empty()) fail(ErrorCode::SchemaError, report.front().message, report.front().path);
    if (id.empty()) id = slug(spec.systemInfo.name);
    std::unique_lock lock(mu_);
    specs_.insert_or_assign(id, std::make_shared<const SystemSpec>(std::move(spec)));
    return id;
  }

  /// Registers every *.vaspec.json (id = name before the first dot) and
  /// every *.csv (id = stem) found in the given directories.
  void preload(const std::filesystem::path& specDir, const std::filesystem::path& dataDir) {
    namespace fs = std::filesystem;
    if (fs::is_directory(specDir))
      for (const auto& e : fs::directory_iterator(specDir)) {
        const auto name = e.path().filename().string();
        if (!name.ends_with(".vaspec.json")) continue;
        add_spec(parse_spec(detail::read_file(e.path())), name.substr(0, name.find('.')));
      }
    if (fs::is_directory(dataDir))
      for (const auto& e : fs::directory_iterator(dataDir))
        if (e.path().extension() == ".csv") add_dataset(load_csv(e.path()));
  }

  // -- handlers ---------------------------------------------------------------

  ApiResponse post_spec(const nlohmann::json& body) {
    return guard([&] {
      const bool wrapped = body.is_object() && body.contains("spec");
      const auto& doc = wrapped ? body["spec"] : body;
      SystemSpec spec = spec_from_json(nlohmann::ordered_json::parse(doc.dump()));
      std::string id = wrapped ? body.value("id", std::string{}) : std::string{};
      id = add_spec(std::move(spec), id);
      return ApiResponse{201, {{"specId", id}}};
    });
  }

  ApiResponse get_spec(const std::string& id) {
    return guard([&] { return ApiResponse{200, nlohmann::json::parse(serialize_spec(*spec(id)).dump())}; });
  }

  ApiResponse get_tutorial(const std::string& id) {
    return guard([&] {
      auto sp = spec(id);
      auto t = render_tutorial(*sp, *provider_);
      ApiResponse r{200, {{"specId", id}, {"steps", t.steps}, {"usedTemplate", t.usedTemplate}}};
      if (!t.warning.empty()) r.body["warnings"] = {t.warning};
      return r;
    });
  }

  /// {specId, datasetId, task?}. A missing task is proposed by the provider
  /// and flagged.
  ApiResponse post_session(const nlohmann::json& body) {
    return guard([&] {
      if (!body.is_object()) fail(ErrorCode::InvalidArgument, "body must be an object");
      const auto specId = body.value("specId", std::string{});
      const auto datasetId = body.value("datasetId", std::string{});
      auto sp = spec(specId);
      auto table = dataset(datasetId);
      std::string task = text::trim(body.value("task", std::string{}));
      std::vector<std::string> warnings;
      const bool proposed = task.empty();
      if (proposed) task = propose_task(*sp, warnings);
      auto live = std::make_shared<Live>();
      live->spec = sp;
      live->table = table;
      live->matrix = start_session(*sp, *table, task, fresh_session_id(), cfg_.clock);
      live->matrix.specId = specId;
      live->matrix.datasetId = datasetId;
      live->matrix.taskProposed = proposed;
      persist(live->matrix, sessions_root());
      const auto id = live->matrix.sessionId;
      {
        std::unique_lock lock(mu_);
        sessions_[id] = live;
      }
      ApiResponse r{201, {{"sessionId", id}, {"task", task}, {"taskProposed", proposed}}};
      if (!warnings.empty()) r.body["warnings"] = warnings;
      return r;
    });
  }

  /// {triples}. Plans and proposes questions; nothing is computed unless
  /// `eager`. Earlier triples of the round become the retained context.
  ApiResponse post_selections(const std::string& id, const nlohmann::json& body, bool eager = false) {
    return with_session(id, [&](Live& s) {
      if (!body.is_object()) fail(ErrorCode::InvalidArgument, "body must be an object");
      std::vector<SelectionTriple> triples;
      const auto raw = body.value("triples", nlohmann::json::array());
      if (!raw.is_array()) fail(ErrorCode::InvalidArgument, "triples must be an array", "triples");
      for (std::size_t i = 0; i < raw.size(); ++i) {
        try {
          triples.push_back(raw[i].get<SelectionTriple>());
        } catch (const Error& e) {
          fail(ErrorCode::InvalidArgument, e.detail(), "triples[" + std::to_string(i) + "]");
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorCode::InvalidArgument, e.what(), "triples[" + std::to_string(i) + "]");
        }
      }
      Selection next;
      next.context = s.selection.context;
      for (const auto& t : s.selection.triples) next.context.push_back(t);
      next.context = merge_triples(next.context);
      next.triples = std::move(triples);
      validate_selection(*s.spec, next);

      std::vector<std::string> warnings;
      PlanResult planned;
      try {
        planned = plan(*s.spec, next, s.matrix.task, cfg_.registry, *provider_, cfg_.planOptions);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ProviderError && e.code() != ErrorCode::PlanParseError) throw;
        warnings.push_back(std::string(to_string(e.code())) + ": " + e.detail() + "; offline planner used");
        MockProvider offline;
        planned = plan(*s.spec, next, s.matrix.task, cfg_.registry, offline, cfg_.planOptions);
      }
      s.selection = std::move(next);
      s.plans = std::move(planned.plans);
      s.questions = propose_questions(s.plans);

      ApiResponse r;
      nlohmann::json qs = nlohmann::json::array();
      for (std::size_t k = 0; k < s.questions.size(); ++k)
        qs.push_back({{"index", k}, {"text", s.questions[k]}, {"plan", s.plans[k]}});
      r.body = {{"questions", qs}, {"plans", s.plans}, {"issues", planned.issues}, {"warnings", warnings}};
      if (eager) {
        auto out = compute(s, s.plans, "");
        r.body["recommendations"] = out.first;
        for (auto& w : out.second) r.body["warnings"].push_back(w);
      }
      return r;
    });
  }

  /// Runs the k-th proposed question's plan (0-based).
  ApiResponse answer(const std::string& id, long long k) {
    return with_session(id, [&](Live& s) {
      if (k < 0 || static_cast<std::size_t>(k) >= s.plans.size())
        fail(ErrorCode::NotFound, "no proposed question " + std::to_string(k), std::to_string(k));
      const auto uk = static_cast<std::size_t>(k);
      auto out = compute(s, {s.plans[uk]}, s.questions[uk]);
      return ApiResponse{200, {{"question", s.questions[uk]}, {"recommendations", out.first}, {"warnings", out.second}}};
    });
  }

  /// {text}: free-form follow-up. Provider failure is a 502 for the chat panel.
  ApiResponse ask(const std::string& id, const nlohmann::json& body) {
    return with_session(id, [&](Live& s) {
      const std::string q = body.is_object() ? text::trim(body.value("text", std::string{})) : std::string{};
      if (q.empty()) fail(ErrorCode::InvalidArgument, "question text is empty", "text");
      nlohmann::json recs = nlohmann::json::array();
      for (const auto& sc : s.recent)
        recs.push_back({{"description", sc.insight.description}, {"type", to_string(sc.insight.type)},
                        {"annotation", sc.annotation}});
      nlohmann::json state = {{"task", s.matrix.task},
                              {"selection", {{"triples", s.selection.triples}, {"context", s.selection.context}}},
                              {"recommendations", recs}};
      auto reply = provider_->complete(
          build_prompt(PromptKind::OpenQuestion,
                       {{std::string(prompts::kQuestion), q}, {std::string(prompts::kCurrentState), state.dump()}}),
          cfg_.assessOptions.limits);
      std::string answer = text::trim(reply);
      std::vector<AnnotationTriple> highlights;
      std::vector<std::string> warnings;
      auto obj = detail::find_json(reply, "{");
      if (obj && obj->is_object()) {
        answer = detail::string_field(*obj, {"answer"}).value_or(answer);
        if (obj->contains("highlights") && (*obj)["highlights"].is_array()) {
          for (const auto& h : (*obj)["highlights"]) {
            try {
              auto t = h.get<AnnotationTriple>();
              if (detail::triple_resolves(*s.spec, t)) highlights.push_back(std::move(t));
              else warnings.push_back("highlight on '" + t.viewName + "'/'" + t.dimName + "' dropped");
            } catch (const std::exception&) {
              warnings.push_back("malformed highlight dropped");
            }
          }
        }
      }
      return ApiResponse{200, {{"answer", answer}, {"highlights", highlights}, {"warnings", warnings}}};
    });
  }

  /// {insightId, image?}: records an offered insight as the next step.
  /// image is a base64 PNG; without one the report renders a placeholder.
  ApiResponse adopt(const std::string& id, const nlohmann::json& body) {
    return with_session(id, [&](Live& s) {
      const std::string insightId = body.is_object() ? body.value("insightId", std::string{}) : std::string{};
      auto it = s.offered.find(insightId);
      if (it == s.offered.end()) fail(ErrorCode::NotFound, "insight '" + insightId + "' was not offered", "insightId");
      if (s.adopted.contains(insightId)) fail(ErrorCode::Conflict, "insight '" + insightId + "' is already adopted");
      const auto& [scored, question] = it->second;
      Snapshot snap;
      const std::string view = scored.insight.views.empty() ? std::string{} : scored.insight.views.front();
      snap.data = snapshot_data(*s.spec, view, scored);
      if (body.contains("image") && body["image"].is_string()) snap.png = decode_png(body["image"].get<std::string>());
      const auto& rec = record_step(s.matrix, *s.spec, view, {{scored}, std::nullopt, question}, std::move(snap));
      s.adopted.insert(insightId);
      nlohmann::json out = rec;
      out["round"] = s.matrix.rounds.back().index;
      persist(s.matrix, sessions_root());
      return ApiResponse{201, out};
    });
  }

  ApiResponse end_round(const std::string& id) {
    return with_session(id, [&](Live& s) {
      auto sum = insightpilot::end_round(s.matrix);
      s.selection = {};
      s.plans.clear();
      s.questions.clear();
      persist(s.matrix, sessions_root());
      return ApiResponse{200, {{"round", sum.index}, {"n", sum.n}, {"closed", true}}};
    });
  }

  ApiResponse stream(const std::string& id) {
    return with_session(id, [&](Live& s) { return ApiResponse{200, session_stream(s.matrix)}; });
  }

  /// Summarizes a closed round and writes reports/{name}/{name}.tex.
  ApiResponse report(const std::string& id, int round) {
    return with_session(id, [&](Live& s) {
      const std::string name = text::file_stem(s.matrix.sessionId) + "_" + std::to_string(round);
      auto written = write_report(s.matrix, round, *provider_, reports_root() / name, cfg_.latexStyle,
                                  cfg_.assessOptions.limits);
      nlohmann::json findings = nlohmann::json::array();
      for (const auto& f : written.findings) findings.push_back({{"line", f.line}, {"message", f.message}});
      return ApiResponse{201,
                         {{"name", name},
                          {"url", "/reports/" + name + ".tex"},
                          {"frames", count_frames(written.source)},
                          {"report", written.doc},
                          {"findings", findings},
                          {"warnings", written.warnings}}};
    });
  }

  ApiResponse get_report(const std::string& name) {
    return guard([&] {
      static const std::regex ok("[A-Za-z0-9_.-]+");
      if (!std::regex_match(name, ok) || name.find("..") != std::string::npos)
        fail(ErrorCode::NotFound, "no report '" + name + "'");
      const auto path = reports_root() / name / (name + ".tex");
      if (!std::filesystem::exists(path)) fail(ErrorCode::NotFound, "no report '" + name + "'");
      ApiResponse r;
      r.raw = detail::read_file(path);
      r.contentType = "application/x-tex";
      return r;
    });
  }

  /// Mounts every endpoint plus CORS headers and preflight handling.
  void bind(httplib::Server& srv) {
    srv.set_default_headers({{"Access-Control-Allow-Origin", cfg_.corsOrigin},
                             {"Access-Control-Allow-Headers", "Content-Type"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    auto send = [](httplib::Response& res, const ApiResponse& r) {
      res.status = r.status;
      if (r.raw) res.set_content(*r.raw, r.contentType);
      else res.set_content(r.body.dump(), "application/json; charset=utf-8");
    };
    auto parse = [send](const httplib::Request& req, httplib::Response& res, nlohmann::json& out) {
      if (req.body.empty()) {
        out = nlohmann::json::object();
        return true;
      }
      out = nlohmann::json::parse(req.body, nullptr, false);
      if (!out.is_discarded()) return true;
      send(res, error_response(Error(ErrorCode::SyntaxError, "request body is not valid JSON")));
      return false;
    };
    srv.Post("/specs", [=, this](const auto& req, auto& res) {
      nlohmann::json b;
      if (parse(req, res, b)) send(res, post_spec(b));
    });
    srv.Get(R"(/specs/([^/]+))", [=, this](const auto& req, auto& res) { send(res, get_spec(req.matches[1])); });
    srv.Get(R"(/specs/([^/]+)/tutorial)",
            [=, this](const auto& req, auto& res) { send(res, get_tutorial(req.matches[1])); });
    srv.Post("/sessions", [=, this](const auto& req, auto& res) {
      nlohmann::json b;
      if (parse(req, res, b)) send(res, post_session(b));
    });
    srv.Post(R"(/sessions/([^/]+)/selections)", [=, this](const auto& req, auto& res) {
      nlohmann::json b;
      if (parse(req, res, b))
        send(res, post_selections(req.matches[1], b, req.has_param("mode") && req.get_param_value("mode") == "eager"));
    });
    srv.Post(R"(/sessions/([^/]+)/questions/(-?\d{1,18})/answer)", [=, this](const auto& req, auto& res) {
      send(res, answer(req.matches[1], std::stoll(req.matches[2])));
    });
    srv.Post(R"(/sessions/([^/]+)/ask)", [=, this](const auto& req, auto& res) {
      nlohmann::json b;
      if (parse(req, res, b)) send(res, ask(req.matches[1], b));
    });
    srv.Post(R"(/sessions/([^/]+)/adopt)", [=, this](const auto& req, auto& res) {
      nlohmann::json b;
      if (parse(req, res, b)) send(res, adopt(req.matches[1], b));
    });
    srv.Post(R"(/sessions/([^/]+)/rounds/end)",
             [=, this](const auto& req, auto& res) { send(res, end_round(req.matches[1])); });
    srv.Get(R"(/sessions/([^/]+)/stream)", [=, this](const auto& req, auto& res) { send(res, stream(req.matches[1])); });
    srv.Post(R"(/sessions/([^/]+)/rounds/(\d{1,9})/report)", [=, this](const auto& req, auto& res) {
      send(res, report(req.matches[1], std::stoi(req.matches[2])));
    });
    srv.Get(R"(/reports/([^/]+)\.tex)", [=, this](const auto& req, auto& res) { send(res, get_report(req.matches[1])); });
    srv.set_exception_handler([send](const auto&, auto& res, std::exception_ptr) {
      send(res, ApiResponse{500, {{"code", "InternalError"}, {"message", "unexpected server error"}}});
    });
  }

  std::filesystem::path sessions_root() const { return cfg_.dataRoot / "sessions"; }
  std::filesystem::path reports_root() const { return cfg_.dataRoot / "reports"; }
  const ServiceConfig& config() const { return cfg_; }

 private:
  /// Conversation state beyond the persisted matrix.
  struct Live {
    std::mutex mu;
    std::shared_ptr<const SystemSpec> spec;
    std::shared_ptr<const Table> table;
    SessionMatrix matrix;
    Selection selection;
    std::vector<PlannedInsight> plans;
    std::vector<std::string> questions;
    std::map<std::string, std::pair<ScoredInsight, std::string>> offered;  ///< id -> (insight, question)
    std::vector<ScoredInsight> recent;
    std::set<std::string> adopted;
  };

  static std::string slug(const std::string& name) {
    std::string out;
    for (unsigned char c : name) {
      if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
      else if (!out.empty() && out.back() != '-') out += '-';
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out.empty() ? "spec" : out;
  }

  template <class F>
  ApiResponse guard(F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      return error_response(e);
    } catch (const nlohmann::json::exception& e) {
      return error_response(Error(ErrorCode::InvalidArgument, e.what()));
    }
  }

  template <class F>
  ApiResponse with_session(const std::string& id, F&& f) {
    return guard([&] {
      auto live = session(id);
      std::lock_guard lock(live->mu);
      return f(*live);
    });
  }

  std::shared_ptr<const SystemSpec> spec(const std::string& id) {
    std::shared_lock lock(mu_);
    auto it = specs_.find(id);
    if (it == specs_.end()) fail(ErrorCode::NotFound, "no spec '" + id + "'", "specId");
    return it->second;
  }

  std::shared_ptr<const Table> dataset(const std::string& id) {
    std::shared_lock lock(mu_);
    auto it = datasets_.find(id);
    if (it == datasets_.end()) fail(ErrorCode::NotFound, "no dataset '" + id + "'", "datasetId");
    return it->second;
  }

  /// In memory, or reloaded from disk after a restart.
  std::shared_ptr<Live> session(const std::string& id) {
    {
      std::shared_lock lock(mu_);
      if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
    }
    static const std::regex ok("[A-Za-z0-9_.-]+");
    if (!std::regex_match(id, ok) || !std::filesystem::exists(session_dir(sessions_root(), id) / "session.json"))
      fail(ErrorCode::NotFound, "no session '" + id + "'", "sessionId");
    auto live = std::make_shared<Live>();
    live->matrix = load(sessions_root(), id);
    live->matrix.clock = cfg_.clock;
    live->spec = spec(live->matrix.specId);
    live->table = dataset(live->matrix.datasetId);
    for (const auto& r : live->matrix.rounds)
      for (const auto& st : r.steps)
        for (const auto& in : st.insights) live->adopted.insert(in.insight.id);
    std::unique_lock lock(mu_);
    return sessions_.try_emplace(id, live).first->second;
  }

  /// The id counter restarts with the process; skip ids already on disk.
  std::string fresh_session_id() {
    for (;;) {
      auto id = next_session_id();
      std::shared_lock lock(mu_);
      if (!sessions_.contains(id) && !std::filesystem::exists(session_dir(sessions_root(), id))) return id;
    }
  }

  std::string propose_task(const SystemSpec& sp, std::vector<std::string>& warnings) {
    std::set<std::string> measures, dims;
    for (const auto& v : sp.viewsInfo)
      for (const auto& l : v.layers)
        for (const auto& c : l.encoding)
          (c.encoding.fieldType == FieldType::Quantitative ? measures : dims).insert(c.encoding.field);
    nlohmann::json state = {{"measures", measures}, {"dimensions", dims}};
    auto doc = build_prompt(PromptKind::OpenQuestion,
                            {{std::string(prompts::kQuestion),
                              "Propose one analysis task, in one sentence, for a user exploring this system."},
                             {std::string(prompts::kCurrentState), state.dump()}});
    std::string reply;
    try {
      reply = provider_->complete(doc, cfg_.assessOptions.limits);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ProviderError) throw;
      warnings.push_back("ProviderError: " + e.detail() + "; offline task proposal used");
      reply = mock::open_question(doc);
    }
    auto obj = detail::find_json(reply, "{");
    if (obj && obj->is_object())
      if (auto a = detail::string_field(*obj, {"answer"}); a && !text::trim(*a).empty()) return *a;
    return text::trim(reply).empty() ? "Explore the data for notable patterns." : text::trim(reply);
  }

  std::pair<std::vector<ScoredInsight>, std::vector<std::string>> compute(Live& s,
                                                                          const std::vector<PlannedInsight>& plans,
                                                                          const std::string& question) {
    ExecuteOptions eo;
    auto out = run_plans(plans, *s.spec, *s.table, s.selection, s.matrix.task, *provider_, cfg_.assessOptions, eo,
                         cfg_.recommendationLimit);
    std::vector<std::string> warnings;
    for (const auto& f : out.failures)
      warnings.push_back(std::string(to_string(f.code)) + ": " + f.plan.functionName + " on '" + f.plan.viewName +
                         "': " + f.message);
    std::set<std::string> seen;
    for (const auto& r : out.recommendations) {
      for (const auto& w : r.warnings)
        if (seen.insert(w).second) warnings.push_back(w);
      s.offered.insert_or_assign(r.insight.id, std::make_pair(r, question));
    }
    s.recent = out.recommendations;
    return {out.recommendations, warnings};
  }

  static nlohmann::json snapshot_data(const SystemSpec& sp, const std::string& view, const ScoredInsight& sc) {
    std::string chart = "bar";
    if (const auto* v = sp.find_view(view); v && !v->layers.empty() && v->layers.front().mark == "line") chart = "line";
    nlohmann::json keys = nlohmann::json::array(), values = nlohmann::json::array();
    for (std::size_t i = 0; i < sc.insight.data.size(); ++i) {
      keys.push_back(sc.insight.data.key_at(i));
      values.push_back(sc.insight.data.values[i]);
    }
    nlohmann::json highlight = nlohmann::json::array();
    for (const auto& t : sc.annotation)
      if (t.viewName == view)
        for (const auto& v : t.value) highlight.push_back(v);
    return {{"viewName", view},
            {"chart", chart},
            {"series", {{"keys", keys}, {"values", values}}},
            {"highlight", highlight}};
  }

  static std::string decode_png(const std::string& b64) {
    namespace b64ns = boost::beast::detail::base64;
    std::string clean;
    for (char c : b64)
      if (!std::isspace(static_cast<unsigned char>(c))) clean += c;
    if (auto comma = clean.find(','); clean.starts_with("data:") && comma != std::string::npos)
      clean.erase(0, comma + 1);
    std::string out(b64ns::decoded_size(clean.size()), '\0');
    auto [written, read] = b64ns::decode(out.data(), clean.data(), clean.size());
    out.resize(written);
    static const std::string sig("\x89PNG\r\n\x1a\n", 8);
    if (read != clean.size() || !out.starts_with(sig))
      fail(ErrorCode::InvalidArgument, "image must be a base64-encoded PNG", "image");
    return out;
  }

  std::shared_ptr<Provider> provider_;
  ServiceConfig cfg_;
  std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const SystemSpec>> specs_;
  std::map<std::string, std::shared_ptr<const Table>> datasets_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
};

}  // namespace insightpilot
