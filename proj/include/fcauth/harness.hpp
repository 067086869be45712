#pragma once

// Dolev-Yao network simulation. Parties exchange wire messages only through
// a Channel; the adversary sits on the channel and sees bytes, never party
// state. Every run is a pure function of its ScenarioConfig.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "fcauth/attacks.hpp"
#include "fcauth/barman.hpp"
#include "fcauth/biofuzz.hpp"
#include "fcauth/improved.hpp"
#include "fcauth/wire.hpp"

namespace fcauth::harness {

enum class Scheme { kBarman, kImproved };
std::string_view scheme_name(Scheme s);
Scheme parse_scheme(std::string_view s);  // throws UsageError

// One scripted adversary step. `label` and `occurrence` (0-based, counted
// per label over the whole run) select the message a step applies to.
struct AdversaryAction {
  enum class Kind { kObserve, kDrop, kModify, kReplay, kInject };

  Kind kind = Kind::kObserve;
  std::string label;
  std::uint32_t occurrence = 0;
  std::string field;        // modify
  std::uint32_t bit = 0;    // modify: bit index within the field, MSB first
  std::uint32_t delay = 0;  // replay: ticks after the original delivery
  // inject: an encoded wire message delivered to `receiver` at tick `at`,
  // appearing to come from `sender`.
  std::string sender;
  std::string receiver;
  std::string hex;
  std::uint32_t at = 0;

  static AdversaryAction observe(std::string label, std::uint32_t occurrence = 0);
  static AdversaryAction drop(std::string label, std::uint32_t occurrence = 0);
  static AdversaryAction modify(std::string label, std::string field, std::uint32_t bit,
                                std::uint32_t occurrence = 0);
  static AdversaryAction replay(std::string label, std::uint32_t delay, std::uint32_t occurrence = 0);
  static AdversaryAction inject(std::string sender, std::string receiver, const wire::Message& m, std::uint32_t at);
};

struct ScenarioConfig {
  Scheme scheme = Scheme::kImproved;
  std::uint32_t n_users = 1;
  std::uint32_t n_servers = 1;
  std::uint32_t sessions_per_user = 1;
  std::uint64_t seed = 42;
  std::uint32_t max_delay = 5;  // delta T, ticks
  std::uint32_t latency = 1;    // ticks per hop
  bio::CodecParams codec;
  double flip_prob = 0.02;    // per-bit noise of each biometric capture
  std::uint32_t max_captures = 3;  // captures per login before giving up
  std::vector<AdversaryAction> script;

  // Throws UsageError on an unusable configuration.
  void validate() const;
};

// JSON object; every key optional. Keys: scheme, n_users, n_servers,
// sessions, seed, delta_t, latency, codec.r, bio.flip_prob, bio.secret_bits,
// bio.max_captures, script (list of action objects).
ScenarioConfig parse_config(std::string_view json_text);
ScenarioConfig load_config(const std::filesystem::path& path);
// FCAUTH_SEED if set and numeric, otherwise `fallback`.
std::uint64_t default_seed(std::uint64_t fallback = 42);

struct Event {
  std::uint64_t seq = 0;
  std::string sender;
  std::string receiver;
  std::string label;
  Bytes bytes;
  std::uint32_t declared_bits = 0;
  std::uint32_t time = 0;  // delivery tick
  std::string action;      // empty for honest delivery

  friend bool operator==(const Event&, const Event&) = default;
};

struct Transcript {
  std::vector<Event> events;

  // One JSON object per line, bytes hex-encoded.
  std::string to_jsonl() const;
  static Transcript from_jsonl(std::string_view text);  // throws UsageError
  friend bool operator==(const Transcript&, const Transcript&) = default;
};

void dump_transcript(const Transcript& t, const std::filesystem::path& path);
Transcript load_transcript(const std::filesystem::path& path);

enum class Status { kIdle, kAccept, kReject, kTimeout };
std::string_view status_name(Status s);

struct PartyOutcome {
  Status status = Status::kIdle;
  std::optional<Reason> reason;
  std::string detail;
  std::optional<Digest> session_key;
  std::uint32_t accepts = 0;
  std::vector<Reason> later_rejects;  // rejections after the first decision
};

struct SessionOutcome {
  std::uint32_t index = 0;
  std::string user;
  std::string server;
  Identity user_id;
  Identity server_id;
  PartyOutcome user_side;
  PartyOutcome server_side;
  PartyOutcome rc_side;  // improved only
  std::uint32_t captures = 0;

  // Both endpoints hold the same key. A server key without a completed user
  // side is provisional and does not count as established.
  bool keys_agree() const;
  std::optional<Digest> established_key() const;
};

struct RunResult {
  Transcript transcript;
  std::vector<SessionOutcome> sessions;
  PrimitiveCounters login_counters;  // producing the first message
  PrimitiveCounters auth_counters;   // every later handler
};

// Registration over the secure channel, then every scripted or honest login
// over the open channel. Protocol rejections are outcomes; only config and
// script errors throw.
RunResult run_session(const ScenarioConfig& config);

// A captured message in flight, as the adversary sees it.
struct Delivery {
  std::uint32_t time = 0;
  std::uint64_t order = 0;
  std::string sender;
  std::string receiver;
  wire::Message message;
  std::uint32_t session = 0;
  std::string action;
};

// Executes a script against the traffic it is shown. Holds copies of wire
// messages only.
class Adversary {
 public:
  explicit Adversary(std::vector<AdversaryAction> script) : script_(std::move(script)), fired_(script_.size()) {}

  // Deliveries resulting from one honest send (none if dropped).
  std::vector<Delivery> intercept(Delivery d);
  // Inject actions as deliveries; each is handed out once.
  std::vector<Delivery> take_injections();
  // Throws UsageError naming the first action that never applied.
  void check_all_fired() const;

  const std::vector<Delivery>& observed() const { return observed_; }
  // Everything the adversary knows, as JSON.
  std::string serialize() const;

 private:
  std::vector<AdversaryAction> script_;
  std::vector<bool> fired_;
  std::map<std::string, std::uint32_t> seen_;
  std::vector<Delivery> observed_;
};

// Time-ordered message queue between parties. Every delivery that leaves the
// channel is logged to the transcript.
class Channel {
 public:
  Channel(Adversary& adversary, std::uint32_t latency) : adversary_(adversary), latency_(latency) {}

  void schedule_injections();
  void send(std::string sender, std::string receiver, wire::Message m, std::uint32_t session, std::uint32_t now);
  std::optional<Delivery> next();
  const Transcript& transcript() const { return transcript_; }

 private:
  void enqueue(Delivery d);
  struct Later {
    bool operator()(const Delivery& a, const Delivery& b) const {
      return a.time != b.time ? a.time > b.time : a.order > b.order;
    }
  };

  Adversary& adversary_;
  std::uint32_t latency_;
  std::uint64_t order_ = 0;
  std::priority_queue<Delivery, std::vector<Delivery>, Later> queue_;
  Transcript transcript_;
};

// ---- attack trials --------------------------------------------------------------

// One seeded trial: a victim logs in honestly, the insider adversary works
// from the public transcript (and, for impersonation, the victim's stolen
// card). The report compares recovered values against harness-held truth.
attacks::AttackReport anonymity_trial(Scheme scheme, std::uint64_t seed, bool same_server = true);
attacks::AttackReport impersonation_trial(Scheme scheme, std::uint64_t seed, bool know_victim_id = true);

}  // namespace fcauth::harness
