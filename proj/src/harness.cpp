#include "fcauth/harness.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fcauth::harness {

using nlohmann::ordered_json;

std::string_view scheme_name(Scheme s) { return s == Scheme::kBarman ? "barman" : "improved"; }

Scheme parse_scheme(std::string_view s) {
  if (s == "barman") return Scheme::kBarman;
  if (s == "improved") return Scheme::kImproved;
  throw UsageError("unknown scheme '" + std::string(s) + "' (expected barman or improved)");
}

std::string_view status_name(Status s) {
  switch (s) {
    case Status::kIdle: return "idle";
    case Status::kAccept: return "accept";
    case Status::kReject: return "reject";
    case Status::kTimeout: return "timeout";
  }
  return "?";
}

// ---- script actions --------------------------------------------------------------

AdversaryAction AdversaryAction::observe(std::string label, std::uint32_t occurrence) {
  AdversaryAction a;
  a.kind = Kind::kObserve;
  a.label = std::move(label);
  a.occurrence = occurrence;
  return a;
}

AdversaryAction AdversaryAction::drop(std::string label, std::uint32_t occurrence) {
  AdversaryAction a = observe(std::move(label), occurrence);
  a.kind = Kind::kDrop;
  return a;
}

AdversaryAction AdversaryAction::modify(std::string label, std::string field, std::uint32_t bit,
                                        std::uint32_t occurrence) {
  AdversaryAction a = observe(std::move(label), occurrence);
  a.kind = Kind::kModify;
  a.field = std::move(field);
  a.bit = bit;
  return a;
}

AdversaryAction AdversaryAction::replay(std::string label, std::uint32_t delay, std::uint32_t occurrence) {
  AdversaryAction a = observe(std::move(label), occurrence);
  a.kind = Kind::kReplay;
  a.delay = delay;
  return a;
}

AdversaryAction AdversaryAction::inject(std::string sender, std::string receiver, const wire::Message& m,
                                        std::uint32_t at) {
  AdversaryAction a;
  a.kind = Kind::kInject;
  a.label = m.label;
  a.sender = std::move(sender);
  a.receiver = std::move(receiver);
  a.hex = to_hex(m.encode());
  a.at = at;
  return a;
}

namespace {

std::string_view kind_name(AdversaryAction::Kind k) {
  switch (k) {
    case AdversaryAction::Kind::kObserve: return "observe";
    case AdversaryAction::Kind::kDrop: return "drop";
    case AdversaryAction::Kind::kModify: return "modify";
    case AdversaryAction::Kind::kReplay: return "replay";
    case AdversaryAction::Kind::kInject: return "inject";
  }
  return "?";
}

AdversaryAction::Kind parse_kind(std::string_view s) {
  for (auto k : {AdversaryAction::Kind::kObserve, AdversaryAction::Kind::kDrop, AdversaryAction::Kind::kModify,
                 AdversaryAction::Kind::kReplay, AdversaryAction::Kind::kInject}) {
    if (kind_name(k) == s) return k;
  }
  throw UsageError("unknown adversary action '" + std::string(s) + "'");
}

std::string describe(const AdversaryAction& a) {
  std::string s = std::string(kind_name(a.kind)) + "(" + a.label;
  if (a.kind == AdversaryAction::Kind::kInject) return s + " -> " + a.receiver + " @" + std::to_string(a.at) + ")";
  s += "#" + std::to_string(a.occurrence);
  if (a.kind == AdversaryAction::Kind::kModify) s += "." + a.field + " bit " + std::to_string(a.bit);
  if (a.kind == AdversaryAction::Kind::kReplay) s += " +" + std::to_string(a.delay);
  return s + ")";
}

// Restores declared field sizes after a raw decode by round-tripping through
// the typed message when the label is known.
template <class Msg>
std::optional<wire::Message> retype(const wire::Message& m) {
  auto typed = Msg::from_wire(m);
  if (!typed) return std::nullopt;
  return typed->to_wire();
}

wire::Message with_declared_sizes(const wire::Message& m) {
  std::optional<wire::Message> out;
  if (m.label == "login") out = retype<barman::LoginRequest>(m);
  if (m.label == "reply") out = retype<barman::ServerReply>(m);
  if (m.label == "M1") out = retype<improved::MsgM1>(m);
  if (m.label == "M2") out = retype<improved::MsgM2>(m);
  if (m.label == "M3") out = retype<improved::MsgM3>(m);
  if (m.label == "M4") out = retype<improved::MsgM4>(m);
  // Typed re-encoding must not alter bytes; fall back to the raw message.
  if (out && out->encode() == m.encode()) return *out;
  return m;
}

}  // namespace

// ---- configuration ----------------------------------------------------------

void ScenarioConfig::validate() const {
  if (n_users == 0 || n_servers == 0) throw UsageError("n_users and n_servers must be >= 1");
  if (n_users > 4096 || n_servers > 4096) throw UsageError("n_users and n_servers are capped at 4096");
  if (sessions_per_user == 0) throw UsageError("sessions must be >= 1");
  if (max_captures == 0) throw UsageError("bio.max_captures must be >= 1");
  if (!(flip_prob >= 0.0 && flip_prob <= 0.5)) throw UsageError("bio.flip_prob must lie in [0, 0.5]");
  codec.validate();
  if (codec.secret_bits != Digest::kBits) throw UsageError("protocol runs require bio.secret_bits = 160");
}

ScenarioConfig parse_config(std::string_view json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  ScenarioConfig c;
  try {
    if (j.contains("scheme")) c.scheme = parse_scheme(j["scheme"].get<std::string>());
    c.n_users = j.value("n_users", c.n_users);
    c.n_servers = j.value("n_servers", c.n_servers);
    c.sessions_per_user = j.value("sessions", c.sessions_per_user);
    c.seed = j.value("seed", c.seed);
    c.max_delay = j.value("delta_t", c.max_delay);
    c.latency = j.value("latency", c.latency);
    if (auto it = j.find("codec"); it != j.end()) c.codec.repetition = it->value("r", c.codec.repetition);
    if (auto it = j.find("bio"); it != j.end()) {
      c.flip_prob = it->value("flip_prob", c.flip_prob);
      c.codec.secret_bits = it->value("secret_bits", c.codec.secret_bits);
      c.max_captures = it->value("max_captures", c.max_captures);
    }
    for (const auto& a : j.value("script", ordered_json::array())) {
      AdversaryAction act;
      act.kind = parse_kind(a.at("kind").get<std::string>());
      act.label = a.value("label", std::string{});
      act.occurrence = a.value("occurrence", 0u);
      act.field = a.value("field", std::string{});
      act.bit = a.value("bit", 0u);
      act.delay = a.value("delay", 0u);
      act.sender = a.value("sender", std::string{"ADV"});
      act.receiver = a.value("receiver", std::string{});
      act.hex = a.value("hex", std::string{});
      act.at = a.value("at", 0u);
      c.script.push_back(std::move(act));
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::uint64_t default_seed(std::uint64_t fallback) {
  const char* v = std::getenv("FCAUTH_SEED");
  if (v == nullptr || *v == '\0') return fallback;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  return *end == '\0' ? s : fallback;
}

// ---- transcripts ------------------------------------------------------------------

std::string Transcript::to_jsonl() const {
  std::string out;
  for (const auto& e : events) {
    ordered_json j;
    j["seq"] = e.seq;
    j["time"] = e.time;
    j["sender"] = e.sender;
    j["receiver"] = e.receiver;
    j["label"] = e.label;
    j["bits"] = e.declared_bits;
    if (!e.action.empty()) j["action"] = e.action;
    j["bytes"] = to_hex(e.bytes);
    out += j.dump();
    out += '\n';
  }
  return out;
}

Transcript Transcript::from_jsonl(std::string_view text) {
  Transcript t;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = ordered_json::parse(line);
      Event e;
      e.seq = j.at("seq").get<std::uint64_t>();
      e.time = j.at("time").get<std::uint32_t>();
      e.sender = j.at("sender").get<std::string>();
      e.receiver = j.at("receiver").get<std::string>();
      e.label = j.at("label").get<std::string>();
      e.declared_bits = j.at("bits").get<std::uint32_t>();
      e.action = j.value("action", std::string{});
      e.bytes = from_hex(j.at("bytes").get<std::string>());
      t.events.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw UsageError("transcript line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return t;
}

void dump_transcript(const Transcript& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write transcript " + path.string());
  out << t.to_jsonl();
  if (!out) throw UsageError("write failed for " + path.string());
}

Transcript load_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read transcript " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return Transcript::from_jsonl(ss.str());
}

// ---- outcomes -----------------------------------------------------------------------

bool SessionOutcome::keys_agree() const {
  return user_side.status == Status::kAccept && server_side.status == Status::kAccept && user_side.session_key &&
         server_side.session_key && *user_side.session_key == *server_side.session_key;
}

std::optional<Digest> SessionOutcome::established_key() const {
  if (!keys_agree()) return std::nullopt;
  return user_side.session_key;
}

namespace {

void decide_reject(PartyOutcome& p, const Rejection& r) {
  if (p.status == Status::kIdle) {
    p.status = Status::kReject;
    p.reason = r.reason;
    p.detail = r.detail;
  } else {
    p.later_rejects.push_back(r.reason);
  }
}

void decide_accept(PartyOutcome& p, std::optional<Digest> sk) {
  ++p.accepts;
  if (p.status != Status::kIdle) return;
  p.status = Status::kAccept;
  p.session_key = sk;
}

}  // namespace

// ---- adversary and channel ---------------------------------------------------------

std::vector<Delivery> Adversary::intercept(Delivery d) {
  observed_.push_back(d);
  const std::uint32_t occurrence = seen_[d.message.label]++;
  std::vector<Delivery> replays;
  bool dropped = false;
  for (std::size_t i = 0; i < script_.size(); ++i) {
    const AdversaryAction& a = script_[i];
    if (a.kind == AdversaryAction::Kind::kInject || a.label != d.message.label || a.occurrence != occurrence) {
      continue;
    }
    fired_[i] = true;
    switch (a.kind) {
      case AdversaryAction::Kind::kObserve:
        break;
      case AdversaryAction::Kind::kDrop:
        dropped = true;
        break;
      case AdversaryAction::Kind::kModify: {
        wire::Field* f = d.message.find(a.field);
        if (f == nullptr) throw UsageError("script " + describe(a) + ": message has no such field");
        if (a.bit >= f->bytes.size() * 8) throw UsageError("script " + describe(a) + ": bit index out of range");
        f->bytes[a.bit / 8] ^= static_cast<std::uint8_t>(0x80u >> (a.bit % 8));
        d.action += (d.action.empty() ? "" : ";") + std::string("modify:") + a.field + ":" + std::to_string(a.bit);
        break;
      }
      case AdversaryAction::Kind::kReplay: {
        Delivery copy = d;
        copy.time += a.delay;
        copy.action = "replay";
        replays.push_back(std::move(copy));
        break;
      }
      case AdversaryAction::Kind::kInject:
        break;
    }
  }
  std::vector<Delivery> out;
  if (dropped) {
    d.action = "drop";
    out.push_back(std::move(d));
  } else {
    out.push_back(std::move(d));
  }
  for (auto& r : replays) out.push_back(std::move(r));
  return out;
}

std::vector<Delivery> Adversary::take_injections() {
  std::vector<Delivery> out;
  for (std::size_t i = 0; i < script_.size(); ++i) {
    const AdversaryAction& a = script_[i];
    if (a.kind != AdversaryAction::Kind::kInject || fired_[i]) continue;
    auto m = wire::Message::decode(from_hex(a.hex));
    if (!m) throw UsageError("script " + describe(a) + ": " + m.error().to_string());
    if (a.receiver.empty()) throw UsageError("script " + describe(a) + ": inject needs a receiver");
    fired_[i] = true;
    Delivery d;
    d.time = a.at;
    d.sender = a.sender.empty() ? "ADV" : a.sender;
    d.receiver = a.receiver;
    d.message = with_declared_sizes(*m);
    d.action = "inject";
    out.push_back(std::move(d));
  }
  return out;
}

void Adversary::check_all_fired() const {
  for (std::size_t i = 0; i < script_.size(); ++i) {
    if (!fired_[i]) throw UsageError("script action " + describe(script_[i]) + " never matched a message");
  }
}

std::string Adversary::serialize() const {
  ordered_json j;
  j["script"] = ordered_json::array();
  for (const auto& a : script_) j["script"].push_back(describe(a));
  j["observed"] = ordered_json::array();
  for (const auto& d : observed_) {
    j["observed"].push_back({{"time", d.time},
                             {"sender", d.sender},
                             {"receiver", d.receiver},
                             {"label", d.message.label},
                             {"bytes", to_hex(d.message.encode())}});
  }
  return j.dump();
}

void Channel::enqueue(Delivery d) {
  d.order = order_++;
  queue_.push(std::move(d));
}

void Channel::schedule_injections() {
  for (auto& d : adversary_.take_injections()) enqueue(std::move(d));
}

void Channel::send(std::string sender, std::string receiver, wire::Message m, std::uint32_t session,
                   std::uint32_t now) {
  Delivery d;
  d.time = now + latency_;
  d.sender = std::move(sender);
  d.receiver = std::move(receiver);
  d.message = std::move(m);
  d.session = session;
  for (auto& out : adversary_.intercept(std::move(d))) {
    if (out.action == "drop") {
      transcript_.events.push_back(Event{transcript_.events.size(), out.sender, out.receiver, out.message.label,
                                         out.message.encode(), out.message.declared_bits(), out.time, out.action});
    } else {
      enqueue(std::move(out));
    }
  }
}

std::optional<Delivery> Channel::next() {
  if (queue_.empty()) return std::nullopt;
  Delivery d = queue_.top();
  queue_.pop();
  transcript_.events.push_back(Event{transcript_.events.size(), d.sender, d.receiver, d.message.label,
                                     d.message.encode(), d.message.declared_bits(), d.time, d.action});
  return d;
}

// ---- the simulated world ----------------------------------------------------------

namespace {

const std::string kRcName = "RC";

std::string user_name(std::size_t i) { return "U" + std::to_string(i + 1); }
std::string server_name(std::size_t k) { return "S" + std::to_string(k + 1); }

// Owns every party of one run. Parties never see each other's state; all
// interaction after registration goes through the channel.
class World {
 public:
  explicit World(const ScenarioConfig& cfg)
      : cfg_(cfg), rng_(cfg.seed), adversary_(cfg.script), channel_(adversary_, cfg.latency) {
    cfg_.validate();
    const MasterKey xc = MasterKey::generate(rng_, KeyRole::kRcSecret);
    if (cfg_.scheme == Scheme::kBarman) {
      brc_.emplace(xc);
    } else {
      irc_.emplace(xc, rng_, cfg_.max_delay);
    }
    for (std::uint32_t k = 0; k < cfg_.n_servers; ++k) register_server(fresh_identity());
    for (std::uint32_t i = 0; i < cfg_.n_users; ++i) register_user(fresh_identity());
    channel_.schedule_injections();
  }

  const ScenarioConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }
  SimClock& clock() { return clock_; }
  Channel& channel() { return channel_; }
  Adversary& adversary() { return adversary_; }

  std::size_t user_count() const { return users_.size(); }
  Identity user_id(std::size_t i) const { return users_.at(i).creds.id; }
  Identity server_id(std::size_t k) const { return sids_.at(k); }
  // Card extraction and the holder's own credentials, for insider trials.
  const barman::SmartCard& barman_card(std::size_t i) const { return users_.at(i).bcard; }
  const improved::SmartCard& improved_card(std::size_t i) const { return users_.at(i).icard; }
  const Credentials& enrolled_credentials(std::size_t i) const { return users_.at(i).creds; }
  const improved::RegistrationCenter& improved_rc() const { return *irc_; }

  SessionOutcome& open_session(std::string user, std::size_t server) {
    SessionOutcome s;
    s.index = static_cast<std::uint32_t>(sessions_.size());
    s.user = std::move(user);
    s.server = server_name(server);
    s.server_id = sids_.at(server);
    sessions_.push_back(std::move(s));
    rc_open_.push_back(false);
    return sessions_.back();
  }

  // Starts a login of user i at server k: biometric capture (with retries)
  // and the first message.
  void start_login(std::size_t i, std::size_t k) {
    SessionOutcome& s = open_session(user_name(i), k);
    User& u = users_.at(i);
    s.user_id = u.creds.id;
    const Digest ru = rng_.digest();
    const Timestamp t1 = clock_.now();
    std::optional<Rejection> last;
    for (std::uint32_t c = 0; c < cfg_.max_captures; ++c) {
      ++s.captures;
      auto capture = bio::noisy_copy(u.creds.biometric, cfg_.flip_prob, rng_);
      const Credentials creds{u.creds.id, u.creds.password, capture};
      CounterScope scope(login_);
      if (cfg_.scheme == Scheme::kBarman) {
        auto out = barman::login(u.bcard, creds, s.server_id, ru, t1);
        if (out) {
          u.bsess = out->session;
          u.session_index = s.index;
          channel_.send(s.user, s.server, out->request.to_wire(), s.index, t1.ticks);
          return;
        }
        last = out.error();
      } else {
        auto out = improved::user_login_m1(u.icard, creds, s.server_id, ru, t1);
        if (out) {
          u.isess = out->session;
          u.session_index = s.index;
          channel_.send(s.user, kRcName, out->m1.to_wire(), s.index, t1.ticks);
          return;
        }
        last = out.error();
      }
      if (last->reason != Reason::kBiometricMismatch) break;
    }
    decide_reject(s.user_side, *last);
  }

  // Delivers every queued message, then times out whatever is still waiting.
  void pump() {
    const Timestamp started = clock_.now();
    while (auto d = channel_.next()) {
      clock_.advance_to(Timestamp{d->time});
      dispatch(*d);
    }
    for (auto& u : users_) {
      if (!u.bsess && !u.isess) continue;
      u.bsess.reset();
      u.isess.reset();
      auto& side = sessions_.at(u.session_index).user_side;
      if (side.status == Status::kIdle) side.status = Status::kTimeout;
    }
    for (std::size_t s = 0; s < sessions_.size(); ++s) {
      if (rc_open_[s] && sessions_[s].rc_side.status == Status::kIdle) sessions_[s].rc_side.status = Status::kTimeout;
      rc_open_[s] = false;
    }
    // Nothing from this round is still fresh when the next one starts.
    clock_.advance_to(Timestamp{started.ticks + cfg_.max_delay + 1});
    clock_.advance(cfg_.latency);
  }

  // Messages for names that are not parties (an active adversary's own
  // terminal) land here.
  std::vector<wire::Message> take_inbox(const std::string& name) {
    auto it = inbox_.find(name);
    if (it == inbox_.end()) return {};
    auto out = std::move(it->second);
    inbox_.erase(it);
    return out;
  }

  RunResult finish() {
    adversary_.check_all_fired();
    return RunResult{channel_.transcript(), sessions_, login_, auth_};
  }

  const std::vector<SessionOutcome>& sessions() const { return sessions_; }

 private:
  struct User {
    Credentials creds;  // enrollment reference sample
    barman::SmartCard bcard;
    improved::SmartCard icard;
    std::optional<barman::UserSession> bsess;
    std::optional<improved::UserSession> isess;
    std::uint32_t session_index = 0;
  };

  Identity fresh_identity() {
    for (;;) {
      const Identity id = rng_.identity();
      if (used_ids_.insert(id).second) return id;
    }
  }

  void register_server(Identity sid) {
    const std::size_t k = sids_.size();
    sids_.push_back(sid);
    server_index_[sid] = k;
    if (brc_) {
      bservers_.emplace_back(*brc_->register_server(sid), cfg_.max_delay);
    } else {
      iservers_.emplace_back(*irc_->register_server(sid), cfg_.max_delay);
    }
  }

  void register_user(Identity id) {
    User u;
    u.creds.id = id;
    u.creds.password = "pw-" + to_hex(rng_.bytes(4));
    u.creds.biometric = bio::random_sample(cfg_.codec.codeword_bits(), rng_);
    const auto tp = bio::TransformParameter::generate(rng_);
    const Digest rc = rng_.digest();
    const Digest blind = rng_.digest();
    if (brc_) {
      auto card = barman::register_user(*brc_, {id, u.creds.password, u.creds.biometric, tp, rc, blind}, cfg_.codec);
      u.bcard = std::move(*card);
    } else {
      auto card =
          improved::register_user(*irc_, {id, u.creds.password, u.creds.biometric, tp, blind, rc}, cfg_.codec);
      u.icard = std::move(*card);
    }
    user_index_[id] = users_.size();
    users_.push_back(std::move(u));
  }

  std::optional<std::size_t> server_named(const std::string& name) const {
    for (std::size_t k = 0; k < sids_.size(); ++k) {
      if (server_name(k) == name) return k;
    }
    return std::nullopt;
  }

  std::optional<std::size_t> user_named(const std::string& name) const {
    for (std::size_t i = 0; i < users_.size(); ++i) {
      if (user_name(i) == name) return i;
    }
    return std::nullopt;
  }

  void dispatch(const Delivery& d) {
    if (sessions_.empty()) return;
    // Injected traffic belongs to whichever session is running.
    const std::size_t idx = d.action == "inject" ? sessions_.size() - 1 : d.session;
    SessionOutcome& s = sessions_.at(idx);
    // Receivers work from bytes, exactly as the channel carried them.
    auto decoded = wire::Message::decode(d.message.encode());
    CounterScope scope(auth_);
    const Timestamp now = clock_.now();
    if (d.receiver == kRcName && irc_) return rc_receive(d, s, decoded, now);
    if (auto k = server_named(d.receiver)) return server_receive(d, *k, s, decoded, now);
    if (auto i = user_named(d.receiver)) return user_receive(*i, s, decoded, now);
    inbox_[d.receiver].push_back(d.message);
  }

  void rc_receive(const Delivery& d, SessionOutcome& s, const Result<wire::Message>& m, Timestamp now) {
    if (!m) return decide_reject(s.rc_side, m.error());
    if (m->label == "M1") {
      auto m1 = improved::MsgM1::from_wire(*m);
      if (!m1) return decide_reject(s.rc_side, m1.error());
      auto m2 = irc_->process_m1(*m1, now, now);
      if (!m2) return decide_reject(s.rc_side, m2.error());
      auto k = server_index_.find(m1->sid);
      rc_open_[s.index] = true;
      channel_.send(kRcName, server_name(k->second), m2->to_wire(), s.index, now.ticks);
      return;
    }
    if (m->label == "M3") {
      auto m3 = improved::MsgM3::from_wire(*m);
      if (!m3) return decide_reject(s.rc_side, m3.error());
      auto k = server_named(d.sender);
      const Identity from = k ? sids_[*k] : Identity{};
      auto fwd = irc_->process_m3(from, *m3, rng_.digest(), now);
      if (!fwd) return decide_reject(s.rc_side, fwd.error());
      decide_accept(s.rc_side, std::nullopt);
      rc_open_[s.index] = false;
      auto i = user_index_.find(fwd->user);
      channel_.send(kRcName, user_name(i->second), fwd->m4.to_wire(), s.index, now.ticks);
      return;
    }
    decide_reject(s.rc_side, Rejection{Reason::kMalformedMessage, "unexpected " + m->label});
  }

  void server_receive(const Delivery& d, std::size_t k, SessionOutcome& s, const Result<wire::Message>& m,
                      Timestamp now) {
    if (!m) return decide_reject(s.server_side, m.error());
    if (bservers_.size() > k && m->label == "login") {
      auto req = barman::LoginRequest::from_wire(*m);
      if (!req) return decide_reject(s.server_side, req.error());
      auto acc = bservers_[k].authenticate(*req, rng_.digest(), now, now);
      if (!acc) return decide_reject(s.server_side, acc.error());
      decide_accept(s.server_side, acc->session_key);
      channel_.send(d.receiver, d.sender, acc->reply.to_wire(), s.index, now.ticks);
      return;
    }
    if (iservers_.size() > k && m->label == "M2") {
      auto m2 = improved::MsgM2::from_wire(*m);
      if (!m2) return decide_reject(s.server_side, m2.error());
      const Timestamp tu{now.ticks + cfg_.max_delay};
      auto acc = iservers_[k].process_m2(*m2, rng_.digest(), now, tu, now);
      if (!acc) return decide_reject(s.server_side, acc.error());
      decide_accept(s.server_side, acc->session_key);
      channel_.send(d.receiver, kRcName, acc->m3.to_wire(), s.index, now.ticks);
      return;
    }
    decide_reject(s.server_side, Rejection{Reason::kMalformedMessage, "unexpected " + m->label});
  }

  void user_receive(std::size_t i, SessionOutcome& s, const Result<wire::Message>& m, Timestamp now) {
    User& u = users_[i];
    if (!m) return decide_reject(s.user_side, m.error());
    if (brc_ && m->label == "reply") {
      auto reply = barman::ServerReply::from_wire(*m);
      if (!reply) return decide_reject(s.user_side, reply.error());
      if (!check_delay(reply->t3, now, cfg_.max_delay)) {
        return decide_reject(s.user_side, Rejection{Reason::kStaleTimestamp, "T3 outside delay window"});
      }
      if (!u.bsess) return decide_reject(s.user_side, Rejection{Reason::kNoSession, "no live login"});
      auto sk = barman::user_confirm(*u.bsess, *reply, now, cfg_.max_delay);
      u.bsess.reset();
      if (!sk) return decide_reject(s.user_side, sk.error());
      return decide_accept(s.user_side, *sk);
    }
    if (irc_ && m->label == "M4") {
      auto m4 = improved::MsgM4::from_wire(*m);
      if (!m4) return decide_reject(s.user_side, m4.error());
      if (!check_delay(m4->t3, now, cfg_.max_delay)) {
        return decide_reject(s.user_side, Rejection{Reason::kStaleTimestamp, "T3 outside delay window"});
      }
      if (!u.isess) return decide_reject(s.user_side, Rejection{Reason::kNoSession, "no live login"});
      auto sk = improved::user_process_m4(*u.isess, u.icard, *m4, now, cfg_.max_delay);
      u.isess.reset();
      if (!sk) return decide_reject(s.user_side, sk.error());
      return decide_accept(s.user_side, *sk);
    }
    decide_reject(s.user_side, Rejection{Reason::kMalformedMessage, "unexpected " + m->label});
  }

  ScenarioConfig cfg_;
  Rng rng_;
  SimClock clock_;
  Adversary adversary_;
  Channel channel_;
  std::optional<barman::RegistrationCenter> brc_;
  std::optional<improved::RegistrationCenter> irc_;
  std::vector<barman::Server> bservers_;
  std::vector<improved::Server> iservers_;
  std::vector<Identity> sids_;
  std::set<Identity> used_ids_;
  std::map<Identity, std::size_t> server_index_;
  std::map<Identity, std::size_t> user_index_;
  std::vector<User> users_;
  std::vector<SessionOutcome> sessions_;
  std::vector<bool> rc_open_;
  std::map<std::string, std::vector<wire::Message>> inbox_;
  PrimitiveCounters login_;
  PrimitiveCounters auth_;
};

}  // namespace

RunResult run_session(const ScenarioConfig& config) {
  World w(config);
  for (std::uint32_t round = 0; round < config.sessions_per_user; ++round) {
    for (std::size_t i = 0; i < w.user_count(); ++i) {
      w.start_login(i, (i + round) % config.n_servers);
      w.pump();
    }
  }
  return w.finish();
}

// ---- attack trials ------------------------------------------------------------------

namespace {

const std::string kAdversaryTerminal = "ADV";
constexpr std::size_t kVictim = 0;
constexpr std::size_t kInsider = 1;

ScenarioConfig trial_config(Scheme scheme, std::uint64_t seed) {
  ScenarioConfig c;
  c.scheme = scheme;
  c.seed = seed;
  c.n_users = 2;
  c.n_servers = 2;
  return c;
}

std::optional<wire::Message> first_from(const Transcript& t, const std::string& sender, const std::string& label) {
  for (const auto& e : t.events) {
    if (e.sender != sender || e.label != label) continue;
    auto m = wire::Message::decode(e.bytes);
    if (m) return *m;
  }
  return std::nullopt;
}

attacks::InsiderAdversary insider(const World& w) {
  return attacks::InsiderAdversary{w.barman_card(kInsider), w.enrolled_credentials(kInsider), {}};
}

std::string ref(Scheme scheme, std::uint64_t seed, const Transcript& t) {
  return std::string(scheme_name(scheme)) + " seed=" + std::to_string(seed) + " events=" +
         std::to_string(t.events.size());
}

// Adversary-side randomness, independent of the world's generator.
Rng adversary_rng(std::uint64_t seed) { return Rng(seed ^ 0x6164766572736172ULL); }

}  // namespace

attacks::AttackReport anonymity_trial(Scheme scheme, std::uint64_t seed, bool same_server) {
  World w(trial_config(scheme, seed));
  w.start_login(kVictim, 0);
  w.pump();
  const Transcript& t = w.channel().transcript();
  attacks::AttackReport report;
  report.attack = same_server ? "anonymity" : "anonymity (adversary on another server)";
  report.transcript_ref = ref(scheme, seed, t);
  const Identity truth = w.user_id(kVictim);

  Result<Identity> recovered = Rejection{Reason::kMalformedMessage, "no login request observed"};
  if (scheme == Scheme::kBarman) {
    if (auto m = first_from(t, user_name(kVictim), "login")) {
      if (auto req = barman::LoginRequest::from_wire(*m)) {
        auto adv = insider(w);
        adv.captured.push_back(*req);
        recovered = same_server ? attacks::anonymity_attack(adv, *req)
                                : attacks::anonymity_attack(adv, *req, w.server_id(1));
      }
    }
  } else {
    if (auto m = first_from(t, user_name(kVictim), "M1")) {
      if (auto m1 = improved::MsgM1::from_wire(*m)) {
        recovered = attacks::improved_anonymity_attempt(w.improved_card(kInsider), w.enrolled_credentials(kInsider),
                                                        *m1);
      }
    }
  }
  if (recovered) {
    report.recovered["ID_u"] = std::to_string(recovered->value);
    report.success = *recovered == truth;
  } else {
    report.recovered["ID_u"] = "none (" + recovered.error().to_string() + ")";
  }
  return report;
}

attacks::AttackReport impersonation_trial(Scheme scheme, std::uint64_t seed, bool know_victim_id) {
  World w(trial_config(scheme, seed));
  Rng arng = adversary_rng(seed);
  w.start_login(kVictim, 0);
  w.pump();
  attacks::AttackReport report;
  report.attack = know_victim_id ? "impersonation" : "impersonation (identity guessed)";
  const std::size_t forged = w.sessions().size();
  const Timestamp t1 = w.clock().now();

  if (scheme == Scheme::kBarman) {
    auto adv = insider(w);
    Identity victim = arng.identity();
    if (know_victim_id) {
      // The identity comes from the anonymity attack on the victim's traffic.
      auto m = first_from(w.channel().transcript(), user_name(kVictim), "login");
      auto req = m ? barman::LoginRequest::from_wire(*m) : Result<barman::LoginRequest>(Rejection{Reason::kMalformedMessage, "no login request observed"});
      auto id = req ? attacks::anonymity_attack(adv, *req) : Result<Identity>(req.error());
      if (id) victim = *id;
    }
    const barman::SmartCard stolen = w.barman_card(kVictim);
    auto forgery = attacks::forge_login(adv, stolen, victim, w.server_id(0), arng.digest(), t1);
    if (!forgery) {
      report.recovered["error"] = forgery.error().to_string();
      report.transcript_ref = ref(scheme, seed, w.channel().transcript());
      return report;
    }
    w.open_session(kAdversaryTerminal, 0);
    w.channel().send(kAdversaryTerminal, server_name(0), forgery->request.to_wire(),
                     static_cast<std::uint32_t>(forged), t1.ticks);
    w.pump();
    report.recovered["ID_u"] = std::to_string(victim.value);
    const SessionOutcome& s = w.sessions().at(forged);
    report.recovered["server"] = std::string(status_name(s.server_side.status));
    for (const auto& msg : w.take_inbox(kAdversaryTerminal)) {
      auto reply = barman::ServerReply::from_wire(msg);
      if (!reply) continue;
      auto sk = forgery->complete(*reply);
      if (!sk) continue;
      report.recovered["SK"] = sk->hex();
      report.success = s.server_side.status == Status::kAccept && s.server_side.session_key == *sk;
    }
  } else {
    const improved::SmartCard stolen = w.improved_card(kVictim);
    const Identity victim = know_victim_id ? w.user_id(kVictim) : arng.identity();
    const std::string guess = "pw-" + to_hex(arng.bytes(4));
    auto m1 = attacks::improved_stolen_card_forgery(stolen, victim, guess, w.server_id(0), t1, arng);
    w.open_session(kAdversaryTerminal, 0);
    w.channel().send(kAdversaryTerminal, kRcName, m1.to_wire(), static_cast<std::uint32_t>(forged), t1.ticks);
    w.pump();
    const SessionOutcome& s = w.sessions().at(forged);
    report.recovered["ID_u"] = std::to_string(victim.value);
    report.recovered["server"] = std::string(status_name(s.server_side.status));
    if (s.rc_side.reason) report.recovered["rc"] = std::string(reason_name(*s.rc_side.reason));
    report.success = s.server_side.status == Status::kAccept;
  }
  report.transcript_ref = ref(scheme, seed, w.channel().transcript());
  return report;
}

}  // namespace fcauth::harness
