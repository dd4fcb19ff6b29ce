#include "rankforge/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "rankforge/dataset.hpp"
#include "rankforge/metrics.hpp"

namespace rankforge {

using nlohmann::json;

namespace {

constexpr int kSnapshotVersion = 1;

// Worst-case compares to merge lists of these sizes down to one.
std::size_t merge_bound(std::vector<std::size_t> sizes) {
  std::size_t total = 0;
  while (sizes.size() > 1) {
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i + 1 < sizes.size(); i += 2) {
      total += sizes[i] + sizes[i + 1] - 1;
      next.push_back(sizes[i] + sizes[i + 1]);
    }
    if (sizes.size() % 2) next.push_back(sizes.back());
    sizes = std::move(next);
  }
  return total;
}

std::string kind_name(Task::Kind k) { return k == Task::Kind::compare ? "compare" : "sort"; }

Task::Kind kind_from(const std::string& s) {
  if (s == "compare") return Task::Kind::compare;
  if (s == "sort") return Task::Kind::sort_sublist;
  throw std::invalid_argument("unknown log entry kind '" + s + "'");
}

Phase phase_from(const std::string& s) {
  if (s == "initial_sort") return Phase::initial_sort;
  if (s == "merging") return Phase::merging;
  if (s == "done") return Phase::done;
  throw std::invalid_argument("unknown phase '" + s + "'");
}

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::initial_sort: return "initial_sort";
    case Phase::merging: return "merging";
    case Phase::done: return "done";
  }
  return "done";
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

AnnotationSession AnnotationSession::create(std::string session_id, std::vector<std::string> ids,
                                            std::size_t n_sub, std::uint64_t seed,
                                            std::int64_t created_ms) {
  if (ids.empty()) throw std::invalid_argument("annotation session needs at least one item");
  if (n_sub < 2) throw std::invalid_argument("n_sub must be >= 2");
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw std::invalid_argument("duplicate item id '" + id + "'");

  AnnotationSession s;
  s.session_id_ = std::move(session_id);
  s.item_ids_ = std::move(ids);
  s.n_sub_ = n_sub;
  s.seed_ = seed;
  s.created_ms_ = s.updated_ms_ = created_ms;
  // Seeded assignment to sublists: with input order kept, the odd list
  // carried into late rounds would always hold the same trailing items.
  std::vector<std::string> shuffled = s.item_ids_;
  RngStream(seed, 0).derive("sublists").shuffle(shuffled);
  for (std::size_t start = 0; start < shuffled.size(); start += n_sub) {
    const std::size_t stop = std::min(shuffled.size(), start + n_sub);
    s.lists_.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(start),
                          shuffled.begin() + static_cast<std::ptrdiff_t>(stop));
    s.sorted_.push_back(stop - start == 1);
  }
  s.settle();
  return s;
}

AnnotationSession AnnotationSession::replay(std::string session_id, std::vector<std::string> ids,
                                            std::size_t n_sub, std::uint64_t seed,
                                            std::int64_t created_ms,
                                            const std::vector<LogEntry>& log) {
  AnnotationSession s = create(std::move(session_id), std::move(ids), n_sub, seed, created_ms);
  for (const auto& entry : log) s.apply(entry);
  return s;
}

void AnnotationSession::settle() {
  if (phase_ == Phase::initial_sort) {
    if (!std::all_of(sorted_.begin(), sorted_.end(), [](bool b) { return b; })) return;
    sorted_.clear();
    phase_ = Phase::merging;
    merged_.clear();
    cursor_ = left_pos_ = right_pos_ = 0;
    output_.clear();
  }
  if (phase_ != Phase::merging) return;
  for (;;) {
    if (cursor_ >= lists_.size()) {
      lists_ = std::move(merged_);
      merged_.clear();
      cursor_ = 0;
    }
    if (lists_.size() == 1 && merged_.empty() && cursor_ == 0) {
      phase_ = Phase::done;
      return;
    }
    if (cursor_ + 1 == lists_.size()) {  // odd list out waits for the next round
      merged_.push_back(lists_[cursor_]);
      ++cursor_;
      continue;
    }
    const List& left = lists_[cursor_];
    const List& right = lists_[cursor_ + 1];
    if (left_pos_ < left.size() && right_pos_ < right.size()) return;  // needs a Compare
    for (; left_pos_ < left.size(); ++left_pos_) output_.push_back(left[left_pos_]);
    for (; right_pos_ < right.size(); ++right_pos_) output_.push_back(right[right_pos_]);
    finish_pair();
  }
}

void AnnotationSession::finish_pair() {
  merged_.push_back(std::move(output_));
  output_.clear();
  cursor_ += 2;
  left_pos_ = right_pos_ = 0;
}

Task AnnotationSession::current_task() const {
  Task t;
  t.answered = answered();
  t.estimated_remaining = estimated_remaining();
  switch (phase_) {
    case Phase::done: throw std::logic_error("session complete");
    case Phase::initial_sort:
      for (std::size_t i = 0; i < lists_.size(); ++i)
        if (!sorted_[i]) {
          t.kind = Task::Kind::sort_sublist;
          t.ids = lists_[i];
          return t;
        }
      throw std::logic_error("initial_sort without unsorted sub-lists");
    case Phase::merging:
      t.kind = Task::Kind::compare;
      t.id_a = lists_[cursor_][left_pos_];
      t.id_b = lists_[cursor_ + 1][right_pos_];
      return t;
  }
  throw std::logic_error("unreachable phase");
}

std::size_t AnnotationSession::estimated_remaining() const {
  switch (phase_) {
    case Phase::done: return 0;
    case Phase::initial_sort: {
      std::vector<std::size_t> sizes;
      for (const auto& l : lists_) sizes.push_back(l.size());
      const auto unsorted =
          static_cast<std::size_t>(std::count(sorted_.begin(), sorted_.end(), false));
      return unsorted + merge_bound(sizes);
    }
    case Phase::merging: {
      std::size_t total = 0;
      std::vector<std::size_t> next;
      for (const auto& m : merged_) next.push_back(m.size());
      for (std::size_t c = cursor_; c < lists_.size(); c += 2) {
        if (c + 1 == lists_.size()) {
          next.push_back(lists_[c].size());
          break;
        }
        const std::size_t a = lists_[c].size(), b = lists_[c + 1].size();
        if (c == cursor_)
          total += (a - left_pos_) + (b - right_pos_) - 1;
        else
          total += a + b - 1;
        next.push_back(a + b);
      }
      return total + merge_bound(next);
    }
  }
  return 0;
}

// Every check precedes the first mutation, so a rejected entry leaves the
// session unchanged.
void AnnotationSession::apply(const LogEntry& entry) {
  const Task task = current_task();
  if (entry.kind != task.kind)
    throw std::invalid_argument("response kind " + kind_name(entry.kind) + " does not match task " +
                                kind_name(task.kind));
  if (entry.kind == Task::Kind::sort_sublist) {
    std::vector<std::string> a = entry.order, b = task.ids;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw std::invalid_argument("sort response is not a permutation of the task ids");
    for (std::size_t i = 0; i < lists_.size(); ++i)
      if (!sorted_[i]) {
        lists_[i] = entry.order;
        sorted_[i] = true;
        break;
      }
  } else {
    if (entry.id_a != task.id_a || entry.id_b != task.id_b)
      throw std::invalid_argument("response refers to a stale comparison");
    if (entry.choice == task.id_a) {
      output_.push_back(task.id_a);
      ++left_pos_;
    } else if (entry.choice == task.id_b) {
      output_.push_back(task.id_b);
      ++right_pos_;
    } else {
      throw std::invalid_argument("choice '" + entry.choice + "' is neither compared item");
    }
  }
  log_.push_back(entry);
  updated_ms_ = entry.timestamp_ms;
  settle();
}

void AnnotationSession::submit(const Response& response, std::optional<std::int64_t> timestamp_ms) {
  const Task task = current_task();
  LogEntry entry;
  entry.kind = response.kind;
  entry.timestamp_ms = timestamp_ms ? *timestamp_ms : now_ms();
  if (response.kind == Task::Kind::sort_sublist) {
    entry.order = response.order;
  } else {
    entry.id_a = task.id_a;
    entry.id_b = task.id_b;
    entry.choice = response.choice;
  }
  apply(entry);  // validates fully before touching state
}

void AnnotationSession::undo() {
  if (log_.empty()) throw std::logic_error("nothing to undo");
  std::vector<LogEntry> kept(log_.begin(), log_.end() - 1);
  *this = replay(session_id_, item_ids_, n_sub_, seed_, created_ms_, kept);
}

const std::vector<std::string>& AnnotationSession::final_order() const {
  if (phase_ != Phase::done) throw std::logic_error("session incomplete");
  return lists_.front();
}

std::map<std::string, int> AnnotationSession::export_ranking() const {
  const auto& order = final_order();
  std::map<std::string, int> ranks;
  const auto n = static_cast<int>(order.size());
  for (int pos = 0; pos < n; ++pos) ranks[order[static_cast<std::size_t>(pos)]] = n - pos;
  return ranks;
}

std::vector<std::string> AnnotationSession::held_ids() const {
  std::vector<std::string> all;
  if (phase_ == Phase::merging) {
    for (const auto& m : merged_) all.insert(all.end(), m.begin(), m.end());
    all.insert(all.end(), output_.begin(), output_.end());
    for (std::size_t c = cursor_; c < lists_.size(); ++c) {
      const auto& l = lists_[c];
      std::size_t from = 0;
      if (c == cursor_) from = left_pos_;
      if (c == cursor_ + 1) from = right_pos_;
      all.insert(all.end(), l.begin() + static_cast<std::ptrdiff_t>(from), l.end());
    }
  } else {
    for (const auto& l : lists_) all.insert(all.end(), l.begin(), l.end());
  }
  std::sort(all.begin(), all.end());
  return all;
}

json AnnotationSession::to_json() const {
  json log = json::array();
  for (const auto& e : log_) {
    json j = {{"kind", kind_name(e.kind)}, {"timestamp_ms", e.timestamp_ms}};
    if (e.kind == Task::Kind::sort_sublist)
      j["order"] = e.order;
    else {
      j["id_a"] = e.id_a;
      j["id_b"] = e.id_b;
      j["choice"] = e.choice;
    }
    log.push_back(std::move(j));
  }
  std::vector<int> sorted(sorted_.begin(), sorted_.end());
  return {{"version", kSnapshotVersion},
          {"session_id", session_id_},
          {"item_ids", item_ids_},
          {"n_sub", n_sub_},
          {"seed", seed_},
          {"phase", to_string(phase_)},
          {"lists", lists_},
          {"sorted", sorted},
          {"merged", merged_},
          {"cursor", cursor_},
          {"left_pos", left_pos_},
          {"right_pos", right_pos_},
          {"output", output_},
          {"created_ms", created_ms_},
          {"updated_ms", updated_ms_},
          {"comparison_log", log}};
}

AnnotationSession AnnotationSession::from_json(const json& j) {
  if (j.value("version", -1) != kSnapshotVersion)
    throw std::invalid_argument("unsupported session snapshot version");
  AnnotationSession s;
  s.session_id_ = j.at("session_id").get<std::string>();
  s.item_ids_ = j.at("item_ids").get<std::vector<std::string>>();
  s.n_sub_ = j.at("n_sub").get<std::size_t>();
  s.seed_ = j.at("seed").get<std::uint64_t>();
  s.phase_ = phase_from(j.at("phase").get<std::string>());
  s.lists_ = j.at("lists").get<std::vector<List>>();
  for (int b : j.at("sorted").get<std::vector<int>>()) s.sorted_.push_back(b != 0);
  s.merged_ = j.at("merged").get<std::vector<List>>();
  s.cursor_ = j.at("cursor").get<std::size_t>();
  s.left_pos_ = j.at("left_pos").get<std::size_t>();
  s.right_pos_ = j.at("right_pos").get<std::size_t>();
  s.output_ = j.at("output").get<List>();
  s.created_ms_ = j.at("created_ms").get<std::int64_t>();
  s.updated_ms_ = j.at("updated_ms").get<std::int64_t>();
  for (const auto& e : j.at("comparison_log")) {
    LogEntry entry;
    entry.kind = kind_from(e.at("kind").get<std::string>());
    entry.timestamp_ms = e.at("timestamp_ms").get<std::int64_t>();
    if (entry.kind == Task::Kind::sort_sublist) {
      entry.order = e.at("order").get<std::vector<std::string>>();
    } else {
      entry.id_a = e.at("id_a").get<std::string>();
      entry.id_b = e.at("id_b").get<std::string>();
      entry.choice = e.at("choice").get<std::string>();
    }
    s.log_.push_back(std::move(entry));
  }
  return s;
}

std::string AnnotationSession::state_token() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_name(to_json().dump())));
  return buf;
}

void save_session(const AnnotationSession& s, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << s.to_json().dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

AnnotationSession load_session(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return AnnotationSession::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": malformed session snapshot: " + e.what());
  }
}

NoisyOracle::NoisyOracle(double beta, std::map<std::string, double> latent, std::uint64_t seed)
    : beta_(beta), latent_(std::move(latent)), rng_(RngStream(seed, 0).derive("oracle")) {
  if (!(beta >= 0)) throw std::invalid_argument("oracle beta must be >= 0");
}

double NoisyOracle::quality(const std::string& id) const {
  auto it = latent_.find(id);
  if (it == latent_.end()) throw std::invalid_argument("oracle has no latent value for '" + id + "'");
  return it->second;
}

bool NoisyOracle::prefers(const std::string& a, const std::string& b) {
  const double qa = quality(a), qb = quality(b);
  if (std::isinf(beta_)) return qa > qb;
  return rng_.uniform() < sigmoid(beta_ * (qa - qb));
}

SimulationStats simulate(AnnotationSession& session, NoisyOracle& oracle) {
  for (const auto& id : session.item_ids())
    if (!oracle.covers(id)) throw std::invalid_argument("oracle has no latent value for '" + id + "'");
  SimulationStats stats;
  std::int64_t clock = 0;
  while (session.phase() != Phase::done) {
    const Task task = session.current_task();
    if (task.kind == Task::Kind::sort_sublist) {
      std::vector<std::string> order;
      for (const auto& id : task.ids) {
        std::size_t lo = 0, hi = order.size();
        while (lo < hi) {
          const std::size_t mid = (lo + hi) / 2;
          ++stats.comparisons;
          if (oracle.prefers(id, order[mid]))
            hi = mid;
          else
            lo = mid + 1;
        }
        order.insert(order.begin() + static_cast<std::ptrdiff_t>(lo), id);
      }
      session.submit(Response::sorted(std::move(order)), clock++);
    } else {
      ++stats.comparisons;
      ++stats.compare_tasks;
      const bool a_wins = oracle.prefers(task.id_a, task.id_b);
      session.submit(Response::chose(a_wins ? task.id_a : task.id_b), clock++);
    }
  }
  const auto ranks = session.export_ranking();
  if (ranks.size() >= 2) {
    std::vector<int> exported;
    std::vector<double> latent;
    for (const auto& [id, r] : ranks) {
      exported.push_back(r);
      latent.push_back(oracle.quality(id));
    }
    stats.spc = spearman(dense_ranks(latent), std::vector<double>(exported.begin(), exported.end()));
  }
  return stats;
}

}  // namespace rankforge
