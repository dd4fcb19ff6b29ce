#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankforge/numerics.hpp"

namespace rankforge {

// Merge-sort ranking annotation.
//
// Items are cut into sub-lists of n_sub. Each sub-list is ordered in one
// task (best first), then adjacent lists are merged pairwise: every Compare
// task shows the heads of the two lists and the chosen item moves to the
// output. Rounds repeat until one list remains.

enum class Phase { initial_sort, merging, done };
std::string to_string(Phase p);

struct Task {
  enum class Kind { sort_sublist, compare };
  Kind kind = Kind::sort_sublist;
  std::vector<std::string> ids;  // sort_sublist
  std::string id_a, id_b;        // compare: heads of the left and right list
  std::size_t answered = 0;
  std::size_t estimated_remaining = 0;
};

struct Response {
  Task::Kind kind = Task::Kind::sort_sublist;
  std::vector<std::string> order;  // best first
  std::string choice;

  static Response sorted(std::vector<std::string> order) {
    return {Task::Kind::sort_sublist, std::move(order), {}};
  }
  static Response chose(std::string id) { return {Task::Kind::compare, {}, std::move(id)}; }
};

struct LogEntry {
  Task::Kind kind = Task::Kind::compare;
  std::vector<std::string> order;  // sort_sublist answer
  std::string id_a, id_b, choice;  // compare answer
  std::int64_t timestamp_ms = 0;

  bool operator==(const LogEntry&) const = default;
};

class AnnotationSession {
 public:
  // Throws std::invalid_argument on empty or duplicate ids or n_sub < 2.
  static AnnotationSession create(std::string session_id, std::vector<std::string> ids,
                                  std::size_t n_sub = 6, std::uint64_t seed = 0,
                                  std::int64_t created_ms = 0);
  // Rebuilds a session by re-applying `log` to a fresh one.
  static AnnotationSession replay(std::string session_id, std::vector<std::string> ids,
                                  std::size_t n_sub, std::uint64_t seed, std::int64_t created_ms,
                                  const std::vector<LogEntry>& log);

  // Throws std::logic_error("session complete") once done.
  Task current_task() const;
  // Validates against the current task first; on error the state is unchanged.
  void submit(const Response& response, std::optional<std::int64_t> timestamp_ms = std::nullopt);
  // Reverts the most recent response. Throws std::logic_error if none.
  void undo();

  // Item id -> rank, best item = n. Throws std::logic_error unless done.
  std::map<std::string, int> export_ranking() const;
  // Final list, best first (done only).
  const std::vector<std::string>& final_order() const;

  Phase phase() const { return phase_; }
  const std::string& id() const { return session_id_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  std::size_t n_sub() const { return n_sub_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<LogEntry>& log() const { return log_; }
  std::size_t undo_depth() const { return log_.size(); }
  std::size_t answered() const { return log_.size(); }
  std::size_t estimated_remaining() const;
  std::int64_t created_ms() const { return created_ms_; }
  std::int64_t updated_ms() const { return updated_ms_; }
  // Every id currently held anywhere in the state (sorted), for invariants.
  std::vector<std::string> held_ids() const;

  nlohmann::json to_json() const;
  static AnnotationSession from_json(const nlohmann::json& j);
  // Hex hash of the serialized state; changes with every accepted response.
  std::string state_token() const;

  bool operator==(const AnnotationSession&) const = default;

 private:
  using List = std::vector<std::string>;

  void apply(const LogEntry& entry);
  void settle();
  void finish_pair();

  std::string session_id_;
  std::vector<std::string> item_ids_;
  std::size_t n_sub_ = 6;
  std::uint64_t seed_ = 0;
  Phase phase_ = Phase::initial_sort;
  std::vector<List> lists_;       // current round's inputs
  std::vector<bool> sorted_;      // initial_sort only
  std::vector<List> merged_;      // current round's outputs so far
  std::size_t cursor_ = 0;        // left list of the pair being merged
  std::size_t left_pos_ = 0;
  std::size_t right_pos_ = 0;
  List output_;
  std::vector<LogEntry> log_;
  std::int64_t created_ms_ = 0;
  std::int64_t updated_ms_ = 0;
};

// Atomic: writes `path`.tmp then renames over `path`.
void save_session(const AnnotationSession& s, const std::filesystem::path& path);
AnnotationSession load_session(const std::filesystem::path& path);

// Simulated annotator: picks a over b with probability
// sigmoid(beta * (q_a - q_b)); beta = +infinity never errs.
class NoisyOracle {
 public:
  NoisyOracle(double beta, std::map<std::string, double> latent, std::uint64_t seed);
  bool prefers(const std::string& a, const std::string& b);
  double beta() const { return beta_; }
  bool covers(const std::string& id) const { return latent_.count(id) > 0; }
  double quality(const std::string& id) const;

 private:
  double beta_;
  std::map<std::string, double> latent_;
  RngStream rng_;
};

struct SimulationStats {
  std::size_t comparisons = 0;  // every oracle query, sorting and merging
  std::size_t compare_tasks = 0;
  double spc = 1.0;             // exported ranks vs latent order
};

// Sorts sub-lists by binary insertion and answers each Compare with one
// oracle draw. Throws std::invalid_argument if the oracle lacks an id.
SimulationStats simulate(AnnotationSession& session, NoisyOracle& oracle);

std::int64_t now_ms();

}  // namespace rankforge
