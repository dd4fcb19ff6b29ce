#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "rankforge/annotation.hpp"
#include "rankforge/dataset.hpp"
#include "rankforge/service.hpp"
#include "scripted_client.hpp"
#include "temp_dir.hpp"

using namespace rankforge;
using nlohmann::json;

namespace {

std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("item" + std::to_string(i));
  return ids;
}

std::map<std::string, double> quality_for(const std::vector<std::string>& ids) {
  std::map<std::string, double> q;
  for (std::size_t i = 0; i < ids.size(); ++i) q[ids[i]] = static_cast<double>((i * 11) % ids.size());
  return q;
}

std::string create_body(std::size_t n, std::size_t n_sub = 6) {
  return json{{"item_ids", make_ids(n)}, {"n_sub", n_sub}}.dump();
}

// Answers tasks directly through the service object, best quality first.
void answer_all(AnnotationService& svc, const std::string& sid, const std::map<std::string, double>& q) {
  for (;;) {
    const ApiResult t = svc.task(sid);
    if (t.status == 409) return;
    ASSERT_EQ(t.status, 200);
    json answer;
    if (t.body["kind"] == "compare") {
      const std::string a = t.body["id_a"], b = t.body["id_b"];
      answer = {{"choice", q.at(a) > q.at(b) ? a : b}};
    } else {
      std::vector<std::string> order = t.body["ids"];
      std::sort(order.begin(), order.end(), [&](auto& x, auto& y) { return q.at(x) > q.at(y); });
      answer = {{"order", order}};
    }
    ASSERT_EQ(svc.respond(sid, json{{"task_token", t.body["task_token"]}, {"response", answer}}.dump()).status, 200);
  }
}

}  // namespace

TEST(Service, CreateSession) {
  TempDir dir;
  AnnotationService svc({dir.path(), ""});
  const ApiResult r = svc.create_session(create_body(12));
  ASSERT_EQ(r.status, 201) << r.body.dump();
  EXPECT_EQ(r.body["api_version"], 1);
  EXPECT_EQ(r.body["phase"], "initial_sort");
  EXPECT_EQ(r.body["n_items"], 12);
  const std::string sid = r.body["session_id"];
  EXPECT_TRUE(std::filesystem::exists(svc.snapshot_path(sid)));

  const ApiResult again = svc.create_session(create_body(12));
  EXPECT_NE(again.body["session_id"], r.body["session_id"]);

  EXPECT_EQ(svc.create_session(json{{"item_ids", {"a", "b", "a"}}}.dump()).status, 400);
  EXPECT_EQ(svc.create_session(create_body(12, 1)).status, 400);
  EXPECT_EQ(svc.create_session(create_body(12, 13)).status, 400);
  EXPECT_EQ(svc.create_session("{not json").status, 400);
  EXPECT_EQ(svc.create_session(json{{"n_sub", 6}}.dump()).status, 400);
  EXPECT_EQ(svc.create_session(json{{"item_ids", {"../etc"}}}.dump()).status, 400);
  EXPECT_EQ(svc.create_session(json{{"item_ids", json::array()}}.dump()).status, 400);
}

TEST(Service, TaskAndTokens) {
  TempDir dir;
  AnnotationService svc({dir.path(), ""});
  const std::string sid = svc.create_session(create_body(12)).body["session_id"];
  EXPECT_EQ(svc.task("missing").status, 404);
  EXPECT_EQ(svc.task("../x").status, 404);

  const ApiResult t = svc.task(sid);
  ASSERT_EQ(t.status, 200);
  EXPECT_EQ(t.body["kind"], "sort_sublist");
  EXPECT_EQ(t.body["ids"].size(), 6u);
  const std::string token = t.body["task_token"];
  EXPECT_EQ(svc.task(sid).body["task_token"], token);  // reads do not change state

  const json answer = {{"task_token", token}, {"response", {{"order", t.body["ids"]}}}};
  const ApiResult ok = svc.respond(sid, answer.dump());
  ASSERT_EQ(ok.status, 200) << ok.body.dump();
  EXPECT_EQ(ok.body["progress"]["answered"], 1);
  EXPECT_NE(ok.body["task_token"], token);

  // Double submit: the second copy carries a stale token.
  const std::string before = svc.task(sid).body.dump();
  EXPECT_EQ(svc.respond(sid, answer.dump()).status, 409);
  EXPECT_EQ(svc.task(sid).body.dump(), before);
}

TEST(Service, MalformedResponses) {
  TempDir dir;
  AnnotationService svc({dir.path(), ""});
  const std::string sid = svc.create_session(create_body(12)).body["session_id"];
  const std::string token = svc.task(sid).body["task_token"];
  EXPECT_EQ(svc.respond(sid, "nope").status, 400);
  EXPECT_EQ(svc.respond(sid, json{{"response", {{"order", {"item0"}}}}}.dump()).status, 400);
  EXPECT_EQ(svc.respond(sid, json{{"task_token", token}}.dump()).status, 400);
  EXPECT_EQ(svc.respond(sid, json{{"task_token", token}, {"response", {{"order", {"item0"}}}}}.dump()).status, 400);
  EXPECT_EQ(svc.respond(sid, json{{"task_token", token}, {"response", {{"choice", "item0"}}}}.dump()).status, 400);
  EXPECT_EQ(svc.respond(sid, json{{"task_token", token}, {"response", {{"order", 5}}}}.dump()).status, 400);
  EXPECT_EQ(svc.respond("missing", json{{"task_token", token}}.dump()).status, 404);
  EXPECT_EQ(svc.task(sid).body["task_token"], token);
}

TEST(Service, UndoRestoresProgress) {
  TempDir dir;
  AnnotationService svc({dir.path(), ""});
  const std::string sid = svc.create_session(create_body(12)).body["session_id"];
  const ApiResult t0 = svc.task(sid);
  EXPECT_EQ(svc.respond(sid, json{{"task_token", t0.body["task_token"]}, {"undo", true}}.dump()).status, 409);

  svc.respond(sid, json{{"task_token", t0.body["task_token"]}, {"response", {{"order", t0.body["ids"]}}}}.dump());
  const ApiResult t1 = svc.task(sid);
  const ApiResult undone = svc.respond(sid, json{{"task_token", t1.body["task_token"]}, {"undo", true}}.dump());
  ASSERT_EQ(undone.status, 200);
  EXPECT_EQ(undone.body["progress"], t0.body["progress"]);
  EXPECT_EQ(svc.task(sid).body.dump(), t0.body.dump());
}

TEST(Service, ExportAndOverlay) {
  TempDir dir;
  AnnotationService svc({dir.path(), ""});
  const auto ids = make_ids(14);
  const auto q = quality_for(ids);
  const std::string sid = svc.create_session(json{{"item_ids", ids}, {"n_sub", 4}}.dump()).body["session_id"];
  EXPECT_EQ(svc.export_ranking(sid).status, 409);
  answer_all(svc, sid, q);
  EXPECT_EQ(svc.task(sid).status, 409);
  EXPECT_EQ(svc.manifest(sid).body["phase"], "done");

  const ApiResult e = svc.export_ranking(sid);
  ASSERT_EQ(e.status, 200);
  std::set<int> ranks;
  for (const auto& r : e.body["ranking"]) {
    ranks.insert(r["rank"].get<int>());
    // Perfect answers: rank order equals quality order.
    EXPECT_EQ(r["rank"].get<int>(), static_cast<int>(q.at(r["id"])) + 1);
  }
  EXPECT_EQ(ranks.size(), 14u);
  EXPECT_EQ(*ranks.begin(), 1);
  EXPECT_EQ(*ranks.rbegin(), 14);
  EXPECT_EQ(svc.export_ranking(sid).body.dump(), e.body.dump());
  EXPECT_TRUE(std::filesystem::exists(svc.export_path(sid)));
  EXPECT_EQ(svc.export_ranking("nope").status, 404);

  // Undo is still possible from the completed state.
  const std::string token = svc.manifest(sid).body["task_token"];
  EXPECT_EQ(svc.respond(sid, json{{"task_token", token}, {"undo", true}}.dump()).status, 200);
  EXPECT_EQ(svc.export_ranking(sid).status, 409);
}

TEST(Service, DatasetSessionsExportFullDataset) {
  TempDir dir;
  SyntheticConfig cfg;
  cfg.n = 10;
  cfg.d = 3;
  cfg.informative_dim = 3;
  const RankedDataset ds = generate_synthetic(cfg);
  save_dataset(ds, dir / "d.jsonl");
  AnnotationService svc({dir / "data", ""});
  const ApiResult r = svc.create_session(json{{"dataset", (dir / "d.jsonl").string()}, {"n_sub", 3}}.dump());
  ASSERT_EQ(r.status, 201) << r.body.dump();
  std::map<std::string, double> q;
  for (const auto& it : ds.items) q[it.id] = *it.latent_quality;
  const std::string sid = r.body["session_id"];
  answer_all(svc, sid, q);
  ASSERT_EQ(svc.export_ranking(sid).status, 200);
  const RankedDataset exported = load_dataset(svc.export_path(sid));
  EXPECT_EQ(exported.ranks(), ds.ranks());
  EXPECT_EQ(exported.provenance, Provenance::annotation_export);
  EXPECT_EQ(svc.create_session(json{{"dataset", (dir / "missing.jsonl").string()}}.dump()).status, 400);
}

TEST(Service, NewInstanceResumesFromDisk) {
  TempDir dir;
  std::string sid, token;
  {
    AnnotationService svc({dir.path(), ""});
    sid = svc.create_session(create_body(12)).body["session_id"];
    const ApiResult t = svc.task(sid);
    svc.respond(sid, json{{"task_token", t.body["task_token"]}, {"response", {{"order", t.body["ids"]}}}}.dump());
    token = svc.task(sid).body["task_token"];
  }
  AnnotationService fresh({dir.path(), ""});
  const ApiResult t = fresh.task(sid);
  EXPECT_EQ(t.body["task_token"], token);
  EXPECT_EQ(t.body["progress"]["answered"], 1);
}

TEST(ServiceHttp, ScriptedSessionSurvivesRestart) {
  TempDir a, b;
  const auto ids = make_ids(30);
  const auto q = quality_for(ids);
  const ScriptResult plain = run_scripted_session({a.path(), ""}, ids, q, 6, 0);
  const ScriptResult restarted = run_scripted_session({b.path(), ""}, ids, q, 6, 17);
  EXPECT_EQ(plain.responses, restarted.responses);
  EXPECT_EQ(plain.export_body["ranking"], restarted.export_body["ranking"]);
  EXPECT_EQ(plain.export_body["ranking"].size(), 30u);
}

TEST(ServiceHttp, RoutesAndImages) {
  TempDir dir;
  std::filesystem::create_directories(dir / "img");
  std::ofstream(dir / "img" / "item3.png", std::ios::binary) << "PNGDATA";
  TestServer server({dir / "data", (dir / "img").string()});
  auto client = server.client();

  auto r = client.Get("/items/item3/image");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "PNGDATA");
  EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(client.Get("/items/item4/image")->status, 404);

  r = client.Post("/sessions", create_body(12), "application/json");
  ASSERT_EQ(r->status, 201);
  const std::string sid = json::parse(r->body)["session_id"];
  EXPECT_EQ(client.Get("/sessions/" + sid)->status, 200);
  EXPECT_EQ(client.Get("/sessions/" + sid + "/task")->status, 200);
  EXPECT_EQ(client.Get("/sessions/" + sid + "/export")->status, 409);
  EXPECT_EQ(client.Get("/sessions/unknown/task")->status, 404);
  EXPECT_EQ(client.Post("/sessions/" + sid + "/response", "{}", "application/json")->status, 400);
  EXPECT_EQ(json::parse(client.Get("/sessions/" + sid)->body)["api_version"], 1);
}

TEST(ServiceHttp, UrlTemplateRedirects) {
  TempDir dir;
  TestServer server({dir.path(), "https://cdn.example/img/{id}.jpg"});
  auto r = server.client().Get("/items/abc/image");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 302);
  EXPECT_EQ(r->get_header_value("Location"), "https://cdn.example/img/abc.jpg");
}
