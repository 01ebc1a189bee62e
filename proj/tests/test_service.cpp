#include <gtest/gtest.h>

#include <boost/beast/core/detail/base64.hpp>
#include <thread>

#include "insightpilot/mock_provider.hpp"
#include "insightpilot/service.hpp"
#include "support.hpp"

using namespace insightpilot;
using nlohmann::json;
using testsupport::fixtures;
using testsupport::TempDir;

namespace {

ServiceConfig config(const std::filesystem::path& root) {
  ServiceConfig cfg;
  cfg.dataRoot = root;
  cfg.registry = load_registry(fixtures() / "functions.json");
  cfg.clock = [] { return std::string("2024-01-01T00:00:00Z"); };
  return cfg;
}

std::unique_ptr<Service> make_service(const std::filesystem::path& root,
                                      std::shared_ptr<Provider> p = std::make_shared<MockProvider>()) {
  auto svc = std::make_unique<Service>(std::move(p), config(root));
  svc->preload(fixtures() / "specs", fixtures() / "data");
  return svc;
}

std::string base64(const std::string& bytes) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

const json kConsumer = {{"triples", {{{"viewName", "Sales|By Segment"}, {"dimName", "Segment"}, {"value", {"Consumer"}}}}}};

std::string start(Service& svc, const std::string& task = "Find sales trends over time") {
  auto r = svc.post_session({{"specId", "superstore"}, {"datasetId", "superstore"}, {"task", task}});
  EXPECT_EQ(r.status, 201) << r.body.dump();
  return r.body.value("sessionId", "");
}

std::size_t question_index(const json& body, std::string_view fn, std::string_view view) {
  for (const auto& q : body["questions"])
    if (q["plan"]["functionName"] == fn && q["plan"]["viewName"] == view) return q["index"].get<std::size_t>();
  ADD_FAILURE() << "no " << fn << " question on " << view;
  return 0;
}

}  // namespace

TEST(StatusMap, ErrorCodesToHttp) {
  EXPECT_EQ(http_status(ErrorCode::SchemaError), 400);
  EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::UnknownRound), 404);
  EXPECT_EQ(http_status(ErrorCode::Conflict), 409);
  EXPECT_EQ(http_status(ErrorCode::RoundStillOpen), 409);
  EXPECT_EQ(http_status(ErrorCode::ProviderError), 502);
  EXPECT_EQ(http_status(ErrorCode::CorruptSession), 500);
  EXPECT_EQ(http_status(ErrorCode::UnknownView), 422);
  auto r = error_response(Error(ErrorCode::ProviderError, "down", "x"));
  EXPECT_EQ(r.body, json({{"code", "ProviderError"}, {"message", "down"}, {"detail", {{"path", "x"}}}, {"channel", "chat"}}));
  EXPECT_TRUE(error_response(Error(ErrorCode::NotFound, "gone")).body["detail"].is_null());
}

TEST(Specs, UploadFetchAndTutorial) {
  TempDir dir;
  auto svc = make_service(dir.path());
  auto raw = json::parse(testsupport::slurp(fixtures() / "specs" / "superstore.vaspec.json"));
  auto created = svc->post_spec(raw);
  EXPECT_EQ(created.status, 201);
  EXPECT_EQ(created.body["specId"], "superstore-sales-dashboard");
  EXPECT_EQ(svc->post_spec({{"id", "mine"}, {"spec", raw}}).body["specId"], "mine");
  auto got = svc->get_spec("mine");
  EXPECT_EQ(got.status, 200);
  EXPECT_EQ(got.body["viewsInfo"].size(), 9u);
  EXPECT_EQ(svc->get_spec("nope").status, 404);

  auto broken = raw;
  broken["coordinations"][0]["targetViewName"] = "Ghost";
  auto bad = svc->post_spec(broken);
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(bad.body["code"], "SchemaError");
  EXPECT_EQ(bad.body["detail"]["path"], "coordinations[0].targetViewName");

  auto tour = svc->get_tutorial("superstore");
  EXPECT_EQ(tour.status, 200);
  EXPECT_EQ(tour.body["steps"].size(), 10u);
  EXPECT_EQ(tour.body["usedTemplate"], false);
}

TEST(Sessions, CreateWithAndWithoutTask) {
  TempDir dir;
  auto svc = make_service(dir.path());
  auto id = start(*svc);
  EXPECT_TRUE(std::filesystem::exists(session_dir(dir.path() / "sessions", id) / "session.json"));
  auto proposed = svc->post_session({{"specId", "superstore"}, {"datasetId", "superstore"}});
  EXPECT_EQ(proposed.status, 201);
  EXPECT_TRUE(proposed.body["taskProposed"].get<bool>());
  EXPECT_FALSE(proposed.body["task"].get<std::string>().empty());
  EXPECT_EQ(svc->post_session({{"specId", "superstore"}, {"datasetId", "nope"}}).status, 404);
  EXPECT_EQ(svc->post_session(json::array()).status, 422);
  EXPECT_EQ(svc->stream("missing").status, 404);
  EXPECT_EQ(svc->stream("../etc").status, 404);
}

TEST(Sessions, FullRoundToReport) {
  TempDir dir;
  auto svc = make_service(dir.path());
  auto id = start(*svc);

  auto badSel = svc->post_selections(id, {{"triples", {{{"viewName", "Ghost"}, {"dimName", "Segment"}, {"value", {"x"}}}}}});
  EXPECT_EQ(badSel.status, 422);
  EXPECT_EQ(badSel.body["code"], "UnknownView");

  auto sel = svc->post_selections(id, kConsumer);
  ASSERT_EQ(sel.status, 200) << sel.body.dump();
  ASSERT_FALSE(sel.body["questions"].empty());
  EXPECT_FALSE(sel.body.contains("recommendations"));
  const auto k = question_index(sel.body, "change_point", "Sales Trend");
  EXPECT_EQ(sel.body["questions"][k]["text"], "Is there a significant change point in Sales over Month?");

  EXPECT_EQ(svc->answer(id, 999).status, 404);
  EXPECT_EQ(svc->answer(id, -1).status, 404);
  auto ans = svc->answer(id, static_cast<long long>(k));
  ASSERT_EQ(ans.status, 200) << ans.body.dump();
  ASSERT_EQ(ans.body["recommendations"].size(), 1u);
  const auto& rec = ans.body["recommendations"][0];
  EXPECT_EQ(rec["insight"]["parameters"]["key"], "2022-03");
  const std::string insightId = rec["insight"]["id"];

  EXPECT_EQ(svc->report(id, 1).status, 409);
  EXPECT_EQ(svc->adopt(id, {{"insightId", "ins-nope"}}).status, 404);
  EXPECT_EQ(svc->adopt(id, {{"insightId", insightId}, {"image", "bm90IGEgcG5n"}}).status, 422);
  const std::string png = render_placeholder_png({{"series", {{"keys", {"a"}}, {"values", {1}}}}}, 20, 10);
  auto adopted = svc->adopt(id, {{"insightId", insightId}, {"image", "data:image/png;base64," + base64(png)}});
  ASSERT_EQ(adopted.status, 201) << adopted.body.dump();
  EXPECT_EQ(adopted.body["round"], 1);
  EXPECT_EQ(adopted.body["snapshotRef"], "1_1_Sales Trend");
  EXPECT_EQ(svc->adopt(id, {{"insightId", insightId}}).status, 409);

  EXPECT_EQ(svc->ask(id, {{"text", "  "}}).status, 422);
  auto asked = svc->ask(id, {{"text", "Why did sales jump?"}});
  ASSERT_EQ(asked.status, 200);
  EXPECT_NE(asked.body["answer"].get<std::string>().find("Why did sales jump?"), std::string::npos);
  EXPECT_FALSE(asked.body["highlights"].empty());

  auto eager = svc->post_selections(id, {{"triples", {{{"viewName", "Sales|By Category"}, {"dimName", "Category"},
                                                       {"value", {"Technology"}}}}}},
                                    true);
  ASSERT_EQ(eager.status, 200);
  ASSERT_FALSE(eager.body["recommendations"].empty());
  EXPECT_LE(eager.body["recommendations"].size(), 5u);
  const std::string second = eager.body["recommendations"][0]["insight"]["id"];
  EXPECT_EQ(svc->adopt(id, {{"insightId", second}}).status, 201);

  auto ended = svc->end_round(id);
  EXPECT_EQ(ended.body, json({{"round", 1}, {"n", 2}, {"closed", true}}));
  EXPECT_EQ(svc->end_round(id).status, 409);
  EXPECT_EQ(svc->report(id, 2).status, 404);

  auto rep = svc->report(id, 1);
  ASSERT_EQ(rep.status, 201) << rep.body.dump();
  EXPECT_EQ(rep.body["frames"], 4);
  EXPECT_TRUE(rep.body["findings"].empty());
  const std::string name = rep.body["name"];
  EXPECT_EQ(rep.body["url"], "/reports/" + name + ".tex");
  EXPECT_EQ(testsupport::slurp(dir.path() / "reports" / name / "images" / "1_1_Sales-20Trend.png"), png);
  auto tex = svc->get_report(name);
  EXPECT_EQ(tex.status, 200);
  EXPECT_EQ(tex.contentType, "application/x-tex");
  ASSERT_TRUE(tex.raw);
  EXPECT_EQ(count_frames(*tex.raw), 4u);
  EXPECT_EQ(svc->get_report("..").status, 404);

  auto st = svc->stream(id);
  EXPECT_EQ(st.body["rounds"][0]["n"], 2);
}

TEST(Sessions, ReloadAfterRestartAndFreshIds) {
  TempDir dir;
  std::string id;
  {
    auto svc = make_service(dir.path());
    id = start(*svc);
    auto sel = svc->post_selections(id, kConsumer);
    auto ans = svc->answer(id, static_cast<long long>(question_index(sel.body, "change_point", "Sales Trend")));
    ASSERT_EQ(svc->adopt(id, {{"insightId", ans.body["recommendations"][0]["insight"]["id"]}}).status, 201);
  }
  auto svc = make_service(dir.path());
  auto st = svc->stream(id);
  ASSERT_EQ(st.status, 200);
  EXPECT_EQ(st.body["rounds"][0]["steps"].size(), 1u);
  EXPECT_NE(start(*svc), id);
  EXPECT_EQ(svc->end_round(id).status, 200);
}

TEST(Sessions, ProviderFailuresDegrade) {
  TempDir dir;
  auto svc = make_service(dir.path(), std::make_shared<FailingProvider>());
  auto created = svc->post_session({{"specId", "superstore"}, {"datasetId", "superstore"}});
  ASSERT_EQ(created.status, 201);
  EXPECT_EQ(created.body["warnings"].size(), 1u);
  const std::string id = created.body["sessionId"];
  auto sel = svc->post_selections(id, kConsumer, true);
  ASSERT_EQ(sel.status, 200);
  EXPECT_FALSE(sel.body["questions"].empty());
  EXPECT_EQ(sel.body["warnings"][0].get<std::string>().rfind("ProviderError", 0), 0u);
  for (const auto& r : sel.body["recommendations"]) EXPECT_EQ(r["scoring"], "fallback");
  auto asked = svc->ask(id, {{"text", "why?"}});
  EXPECT_EQ(asked.status, 502);
  EXPECT_EQ(asked.body["channel"], "chat");
  EXPECT_EQ(svc->get_tutorial("superstore").body["usedTemplate"], true);
}

TEST(Http, LiveServerRoutesAndCors) {
  TempDir dir;
  auto svc = make_service(dir.path());
  httplib::Server srv;
  svc->bind(srv);
  const int port = srv.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto pre = cli.Options("/sessions");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Origin"), "*");

  auto bad = cli.Post("/sessions", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["code"], "SyntaxError");

  auto made = cli.Post("/sessions", json({{"specId", "superstore"}, {"datasetId", "superstore"}, {"task", "sales"}}).dump(),
                       "application/json");
  ASSERT_TRUE(made);
  ASSERT_EQ(made->status, 201);
  const std::string id = json::parse(made->body)["sessionId"];
  auto sel = cli.Post("/sessions/" + id + "/selections?mode=eager", kConsumer.dump(), "application/json");
  ASSERT_TRUE(sel);
  EXPECT_EQ(sel->status, 200);
  EXPECT_TRUE(json::parse(sel->body).contains("recommendations"));
  auto ans = cli.Post("/sessions/" + id + "/questions/0/answer");
  ASSERT_TRUE(ans);
  EXPECT_EQ(ans->status, 200);
  auto huge = cli.Post("/sessions/" + id + "/questions/99999999999999999/answer");
  ASSERT_TRUE(huge);
  EXPECT_EQ(huge->status, 404);
  auto tour = cli.Get("/specs/superstore/tutorial");
  ASSERT_TRUE(tour);
  EXPECT_EQ(json::parse(tour->body)["steps"].size(), 10u);
  auto stream = cli.Get("/sessions/" + id + "/stream");
  ASSERT_TRUE(stream);
  EXPECT_EQ(stream->get_header_value("Access-Control-Allow-Origin"), "*");
  auto missing = cli.Get("/reports/none_1.tex");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  srv.stop();
  th.join();
}
