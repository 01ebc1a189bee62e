#pragma once

// Exploration provenance: rounds of adopted insights and raw interactions,
// with snapshots and checksummed on-disk persistence.
//
// A SessionMatrix is not internally synchronized; callers serialize
// mutations per session (the service holds one mutex per session).

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/recommend.hpp"
#include "insightpilot/spec.hpp"
#include "insightpilot/tabular.hpp"
#include "insightpilot/text.hpp"

namespace insightpilot {

/// Returns an ISO-8601 timestamp. Injectable for deterministic tests.
using Clock = std::function<std::string()>;

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Stand-in for a screenshot: the focused view's data plus an optional
/// client-supplied PNG.
struct Snapshot {
  nlohmann::json data = nlohmann::json::object();
  std::optional<std::string> png;  ///< raw PNG bytes
  bool operator==(const Snapshot&) const = default;
};

struct StepRecord {
  int stepIndex = 0;
  std::string focusedView;
  std::vector<ScoredInsight> insights;
  /// Self-motivated interaction (e.g. a raw selection) when no insight was adopted.
  std::optional<nlohmann::json> interaction;
  std::string question;
  std::string snapshotRef;
  std::string timestamp;
};

inline void to_json(nlohmann::json& j, const StepRecord& s) {
  j = {{"stepIndex", s.stepIndex},   {"focusedView", s.focusedView}, {"insights", s.insights},
       {"question", s.question},     {"snapshotRef", s.snapshotRef}, {"timestamp", s.timestamp}};
  j["interaction"] = s.interaction ? *s.interaction : nlohmann::json(nullptr);
}
inline void from_json(const nlohmann::json& j, StepRecord& s) {
  s.stepIndex = j.at("stepIndex").get<int>();
  s.focusedView = j.at("focusedView").get<std::string>();
  s.insights = j.at("insights").get<std::vector<ScoredInsight>>();
  s.question = j.value("question", "");
  s.snapshotRef = j.at("snapshotRef").get<std::string>();
  s.timestamp = j.value("timestamp", "");
  if (j.contains("interaction") && !j["interaction"].is_null()) s.interaction = j["interaction"];
  else s.interaction.reset();
}

struct Round {
  int index = 0;
  std::vector<StepRecord> steps;
  bool closed = false;
};

inline void to_json(nlohmann::json& j, const Round& r) {
  j = {{"index", r.index}, {"closed", r.closed}, {"steps", r.steps}};
}
inline void from_json(const nlohmann::json& j, Round& r) {
  r.index = j.at("index").get<int>();
  r.closed = j.at("closed").get<bool>();
  r.steps = j.at("steps").get<std::vector<StepRecord>>();
}

inline std::string snapshot_ref(int round, int step, std::string_view viewName) {
  return std::to_string(round) + "_" + std::to_string(step) + "_" + std::string(viewName);
}

struct SessionMatrix {
  std::string sessionId;
  std::string specId;
  std::string datasetId;
  std::string task;
  bool taskProposed = false;
  /// When the last round is closed, the next record_step opens round m+1.
  bool autoOpenRounds = true;
  std::vector<Round> rounds;
  std::map<std::string, Snapshot> snapshots;  ///< keyed by snapshotRef
  Clock clock = utc_now;

  const Round* open_round() const {
    return !rounds.empty() && !rounds.back().closed ? &rounds.back() : nullptr;
  }
  std::size_t m() const { return rounds.size(); }
};

/// Everything except the clock and snapshot bytes.
inline nlohmann::json session_body(const SessionMatrix& s) {
  return {{"sessionId", s.sessionId},     {"specId", s.specId},
          {"datasetId", s.datasetId},     {"task", s.task},
          {"taskProposed", s.taskProposed}, {"autoOpenRounds", s.autoOpenRounds},
          {"rounds", s.rounds}};
}

/// Stream shape: rounds and step summaries for the interaction view.
inline nlohmann::json session_stream(const SessionMatrix& s) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : s.rounds) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& st : r.steps) {
      nlohmann::json node = {{"stepIndex", st.stepIndex},
                             {"focusedView", st.focusedView},
                             {"snapshotRef", st.snapshotRef},
                             {"timestamp", st.timestamp},
                             {"question", st.question}};
      if (!st.insights.empty()) {
        node["insightId"] = st.insights.front().insight.id;
        node["type"] = to_string(st.insights.front().insight.type);
        node["description"] = st.insights.front().insight.description;
      } else {
        node["interaction"] = st.interaction ? *st.interaction : nlohmann::json(nullptr);
      }
      steps.push_back(std::move(node));
    }
    rounds.push_back({{"index", r.index}, {"closed", r.closed}, {"n", r.steps.size()}, {"steps", steps}});
  }
  return {{"sessionId", s.sessionId}, {"task", s.task}, {"m", s.rounds.size()}, {"rounds", rounds}};
}

inline std::string next_session_id() {
  static std::atomic<unsigned> counter{0};
  char buf[24];
  std::snprintf(buf, sizeof buf, "session-%04u", ++counter);
  return buf;
}

/// Opens round 1 after checking the spec against the dataset columns.
inline SessionMatrix start_session(const SystemSpec& spec, const Table& table, std::string task,
                                   std::string sessionId = {}, Clock clock = utc_now) {
  auto report = validate_spec(spec, table.column_names());
  if (!report.empty()) fail(ErrorCode::SchemaError, report.front().message, report.front().path);
  SessionMatrix s;
  s.sessionId = sessionId.empty() ? next_session_id() : std::move(sessionId);
  s.datasetId = table.name();
  s.task = std::move(task);
  s.clock = std::move(clock);
  s.rounds.push_back({1, {}, false});
  return s;
}

/// Step content: adopted insights, or a raw interaction descriptor.
struct StepPayload {
  std::vector<ScoredInsight> insights;
  std::optional<nlohmann::json> interaction;
  std::string question;
};

/// Appends a step to the open round and stores its snapshot under the
/// assigned snapshotRef.
inline const StepRecord& record_step(SessionMatrix& s, const SystemSpec& spec, const std::string& focusedView,
                                     StepPayload payload, Snapshot snapshot = {}) {
  if (!spec.find_view(focusedView)) fail(ErrorCode::UnknownView, "no view named '" + focusedView + "'", focusedView);
  if (payload.insights.empty() && !payload.interaction)
    fail(ErrorCode::InvalidArgument, "a step records insights or an interaction");
  if (!s.open_round()) {
    if (!s.autoOpenRounds || s.rounds.empty()) fail(ErrorCode::NoOpenRound, "no analysis round is open");
    s.rounds.push_back({static_cast<int>(s.rounds.size()) + 1, {}, false});
  }
  Round& r = s.rounds.back();
  StepRecord rec;
  rec.stepIndex = static_cast<int>(r.steps.size()) + 1;
  rec.focusedView = focusedView;
  rec.insights = std::move(payload.insights);
  rec.interaction = std::move(payload.interaction);
  rec.question = std::move(payload.question);
  rec.snapshotRef = snapshot_ref(r.index, rec.stepIndex, focusedView);
  rec.timestamp = s.clock ? s.clock() : std::string{};
  s.snapshots[rec.snapshotRef] = std::move(snapshot);
  r.steps.push_back(std::move(rec));
  return r.steps.back();
}

struct RoundSummary {
  int index = 0;
  std::size_t n = 0;
};

inline RoundSummary end_round(SessionMatrix& s) {
  if (!s.open_round()) fail(ErrorCode::NoOpenRound, "no analysis round is open");
  Round& r = s.rounds.back();
  r.closed = true;
  return {r.index, r.steps.size()};
}

/// The closed round's steps in order: the report input.
inline std::vector<StepRecord> select_path(const SessionMatrix& s, int roundIndex) {
  if (roundIndex < 1 || roundIndex > static_cast<int>(s.rounds.size()))
    fail(ErrorCode::UnknownRound, "no round " + std::to_string(roundIndex), std::to_string(roundIndex));
  const Round& r = s.rounds[static_cast<std::size_t>(roundIndex - 1)];
  if (!r.closed) fail(ErrorCode::RoundStillOpen, "round " + std::to_string(roundIndex) + " is still open");
  return r.steps;
}

// ---------------------------------------------------------------------------
// Persistence: {root}/{id}/session.json + {root}/{id}/snapshots/

namespace detail {

inline void write_file(const std::filesystem::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + p.string(), p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "short write to " + p.string(), p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + p.string(), p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline std::filesystem::path session_dir(const std::filesystem::path& root, const std::string& id) {
  return root / text::file_stem(id);
}

inline void persist(const SessionMatrix& s, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const fs::path dir = session_dir(root, s.sessionId);
  std::error_code ec;
  fs::create_directories(dir / "snapshots", ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message(), dir.string());
  for (const auto& [ref, snap] : s.snapshots) {
    const fs::path base = dir / "snapshots" / text::file_stem(ref);
    detail::write_file(fs::path(base.string() + ".json"), snap.data.dump(2));
    if (snap.png) detail::write_file(fs::path(base.string() + ".png"), *snap.png);
  }
  const std::string body = session_body(s).dump();
  nlohmann::json doc = {{"checksum", text::hex64(text::fnv1a(body))}, {"body", nlohmann::json::parse(body)}};
  // Write then rename so a crash never leaves a half-written session.json.
  const fs::path tmp = dir / "session.json.tmp";
  detail::write_file(tmp, doc.dump(2));
  fs::rename(tmp, dir / "session.json", ec);
  if (ec) fail(ErrorCode::IoError, "cannot replace session.json: " + ec.message(), dir.string());
}

inline SessionMatrix load(const std::filesystem::path& root, const std::string& sessionId) {
  namespace fs = std::filesystem;
  const fs::path dir = session_dir(root, sessionId);
  const fs::path file = dir / "session.json";
  if (!fs::exists(file)) fail(ErrorCode::IoError, "no session '" + sessionId + "' under " + root.string(), sessionId);
  const std::string raw = detail::read_file(file);
  auto doc = nlohmann::json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("checksum") || !doc.contains("body") ||
      !doc["checksum"].is_string())
    fail(ErrorCode::CorruptSession, "session.json is not a valid session document", file.string());
  const std::string body = doc["body"].dump();
  if (text::hex64(text::fnv1a(body)) != doc["checksum"].get<std::string>())
    fail(ErrorCode::CorruptSession, "checksum mismatch", file.string());
  SessionMatrix s;
  try {
    const auto& b = doc["body"];
    s.sessionId = b.at("sessionId").get<std::string>();
    s.specId = b.value("specId", "");
    s.datasetId = b.value("datasetId", "");
    s.task = b.value("task", "");
    s.taskProposed = b.value("taskProposed", false);
    s.autoOpenRounds = b.value("autoOpenRounds", true);
    s.rounds = b.at("rounds").get<std::vector<Round>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptSession, std::string("session body: ") + e.what(), file.string());
  } catch (const Error& e) {
    fail(ErrorCode::CorruptSession, "session body: " + e.detail(), file.string());
  }
  for (const auto& r : s.rounds) {
    for (const auto& st : r.steps) {
      const fs::path base = dir / "snapshots" / text::file_stem(st.snapshotRef);
      Snapshot snap;
      const fs::path js(base.string() + ".json"), png(base.string() + ".png");
      if (fs::exists(js)) {
        snap.data = nlohmann::json::parse(detail::read_file(js), nullptr, false);
        if (snap.data.is_discarded()) fail(ErrorCode::CorruptSession, "snapshot " + js.string() + " is not JSON");
      }
      if (fs::exists(png)) snap.png = detail::read_file(png);
      s.snapshots[st.snapshotRef] = std::move(snap);
    }
  }
  return s;
}

/// Structural equality on everything persisted.
inline bool same_session(const SessionMatrix& a, const SessionMatrix& b) {
  return session_body(a) == session_body(b) && a.snapshots == b.snapshots;
}

}  // namespace insightpilot
