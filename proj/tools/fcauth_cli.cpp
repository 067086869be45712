// fcauth: run protocol sessions, reproduce the attacks, print cost tables and
// manage transcripts. Exit status 0 means every check the command performs
// passed.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcauth/attacks.hpp"
#include "fcauth/costs.hpp"
#include "fcauth/harness.hpp"

using namespace fcauth;
using harness::Scheme;

namespace {

struct RunOptions {
  std::string scheme = "improved";
  std::uint64_t seed = harness::default_seed();
  std::string config;
  std::uint32_t users = 0;
  std::uint32_t servers = 0;
  std::uint32_t sessions = 0;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--scheme", o.scheme, "barman or improved")->check(CLI::IsMember({"barman", "improved"}));
  cmd->add_option("--seed", o.seed, "run seed (default: $FCAUTH_SEED or 42)");
  cmd->add_option("--config", o.config, "scenario JSON; flags given here override it");
  cmd->add_option("--users", o.users, "number of users");
  cmd->add_option("--servers", o.servers, "number of servers");
  cmd->add_option("--sessions", o.sessions, "logins per user");
}

harness::ScenarioConfig build_config(const RunOptions& o, const CLI::App& cmd) {
  harness::ScenarioConfig c = o.config.empty() ? harness::ScenarioConfig{} : harness::load_config(o.config);
  if (o.config.empty() || cmd.count("--scheme")) c.scheme = harness::parse_scheme(o.scheme);
  if (o.config.empty() || cmd.count("--seed")) c.seed = o.seed;
  if (cmd.count("--users")) c.n_users = o.users;
  if (cmd.count("--servers")) c.n_servers = o.servers;
  if (cmd.count("--sessions")) c.sessions_per_user = o.sessions;
  c.validate();
  return c;
}

std::string party_line(const char* who, const harness::PartyOutcome& p) {
  std::string s = std::string(who) + "=" + std::string(harness::status_name(p.status));
  if (p.reason) s += "(" + std::string(reason_name(*p.reason)) + ")";
  return s;
}

int cmd_demo(const harness::ScenarioConfig& c) {
  const auto run = harness::run_session(c);
  std::size_t agreed = 0;
  for (const auto& s : run.sessions) {
    std::cout << "session " << s.index << " " << s.user << " -> " << s.server << ": "
              << party_line("user", s.user_side) << " " << party_line("server", s.server_side);
    if (c.scheme == Scheme::kImproved) std::cout << " " << party_line("rc", s.rc_side);
    if (auto sk = s.established_key()) {
      std::cout << " SK=" << sk->hex();
      ++agreed;
    }
    std::cout << "\n";
  }
  std::cout << harness::scheme_name(c.scheme) << ": " << agreed << "/" << run.sessions.size()
            << " sessions agreed on a key, " << run.transcript.events.size() << " messages\n";
  return agreed == run.sessions.size() ? 0 : 1;
}

int cmd_attack(const std::string& kind, const std::string& scheme_text, std::uint64_t seed, std::size_t trials,
               std::size_t servers) {
  if (kind == "scalability") {
    const auto rep = attacks::scalability_report(servers);
    nlohmann::ordered_json j{{"attack", "scalability"},
                             {"servers", rep.servers},
                             {"bits_on_card", rep.bits_on_card},
                             {"note", rep.note}};
    std::cout << j.dump() << "\n";
    return 0;
  }
  const Scheme scheme = harness::parse_scheme(scheme_text);
  // Against the original scheme every trial should succeed; against the
  // improved scheme none should.
  const bool expect = scheme == Scheme::kBarman;
  std::size_t successes = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto rep = kind == "anonymity" ? harness::anonymity_trial(scheme, seed + i)
                                         : harness::impersonation_trial(scheme, seed + i);
    successes += rep.success;
    std::cout << rep.to_json() << "\n";
  }
  std::cerr << kind << " vs " << scheme_text << ": " << successes << "/" << trials << " succeeded\n";
  return (expect ? successes == trials : successes == 0) ? 0 : 1;
}

int cmd_costs(const std::string& scheme, bool json, bool instrument) {
  std::cout << (json ? costs::render_json() : costs::render_text());
  bool ok = true;
  for (const auto& c : costs::check_computation_table()) ok = ok && c.within_tolerance;
  if (instrument) {
    for (const char* s : {"barman", "improved"}) {
      if (scheme != "all" && scheme != s) continue;
      harness::ScenarioConfig c;
      c.scheme = harness::parse_scheme(s);
      c.flip_prob = 0.0;
      const auto rep = costs::instrument_run(harness::run_session(c));
      std::cout << "\ninstrumented " << s << " session (" << rep.messages_per_session << " messages)\n";
      for (const auto& r : rep.rows) {
        std::cout << "  " << r.phase << " " << r.primitive << ": measured " << r.measured << ", symbolic "
                  << r.symbolic;
        if (!r.explanation.empty()) std::cout << " -- " << r.explanation;
        std::cout << "\n";
      }
    }
  }
  return ok ? 0 : 1;
}

int cmd_fuzz(std::size_t trials, std::uint32_t r, std::uint64_t seed) {
  Rng rng(seed);
  bio::CodecParams p;
  p.repetition = r;
  const auto s = bio::fuzz_codec(trials, p, rng);
  std::cout << "bounded noise (<= " << p.correctable() << " per block): " << s.opened << "/" << s.trials
            << " opened\n"
            << "over bound (" << p.correctable() + 1 << " flips in one block): " << s.bit_flipped << "/" << s.probes
            << " decoded bit flipped, " << s.rejected << "/" << s.probes << " rejected\n";
  return s.ok() ? 0 : 1;
}

int cmd_transcript(const std::string& action, const std::string& path, const harness::ScenarioConfig& c) {
  if (action == "dump") {
    const auto run = harness::run_session(c);
    harness::dump_transcript(run.transcript, path);
    std::cout << "wrote " << run.transcript.events.size() << " events to " << path << "\n";
    return 0;
  }
  const auto stored = harness::load_transcript(path);
  const auto fresh = harness::run_session(c).transcript;
  const std::size_t n = std::min(stored.events.size(), fresh.events.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!(stored.events[i] == fresh.events[i])) {
      std::cout << "mismatch at event " << i << " (" << stored.events[i].label << ")\n";
      return 1;
    }
  }
  if (stored.events.size() != fresh.events.size()) {
    std::cout << "event count differs: stored " << stored.events.size() << ", replayed " << fresh.events.size()
              << "\n";
    return 1;
  }
  std::cout << "transcript reproduced: " << n << " events identical\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuzzy-commitment multi-server authentication toolkit"};
  app.require_subcommand(1);

  RunOptions demo_opts;
  auto* demo = app.add_subcommand("demo", "run honest sessions and report key agreement");
  add_run_options(demo, demo_opts);

  std::string attack_kind;
  std::string attack_scheme = "barman";
  std::uint64_t attack_seed = harness::default_seed();
  std::size_t attack_trials = 1;
  std::size_t attack_servers = 100;
  auto* attack = app.add_subcommand("attack", "reproduce an attack and emit JSON reports");
  attack->add_option("kind", attack_kind, "anonymity, impersonation or scalability")
      ->required()
      ->check(CLI::IsMember({"anonymity", "impersonation", "scalability"}));
  attack->add_option("--scheme", attack_scheme, "target scheme")->check(CLI::IsMember({"barman", "improved"}));
  attack->add_option("--seed", attack_seed, "first trial seed");
  attack->add_option("--trials", attack_trials, "number of seeded trials")->check(CLI::PositiveNumber);
  attack->add_option("--servers", attack_servers, "servers for the scalability report")->check(CLI::PositiveNumber);

  std::string costs_scheme = "all";
  bool costs_json = false;
  bool costs_instrument = false;
  auto* cost = app.add_subcommand("costs", "computation and communication cost tables");
  cost->add_option("--scheme", costs_scheme, "scheme for --instrument")
      ->check(CLI::IsMember({"all", "barman", "improved"}));
  cost->add_flag("--json", costs_json, "JSON instead of text");
  cost->add_flag("--instrument", costs_instrument, "also count primitives in a live session");

  std::size_t fuzz_trials = 1000;
  std::uint32_t fuzz_r = 5;
  std::uint64_t fuzz_seed = harness::default_seed();
  auto* fuzz = app.add_subcommand("fuzz-codec", "randomized fuzzy commitment noise-bound check");
  fuzz->add_option("--trials", fuzz_trials, "bounded-noise trials");
  fuzz->add_option("--r", fuzz_r, "repetition factor (odd, >= 3)");
  fuzz->add_option("--seed", fuzz_seed, "seed");

  std::string tr_action;
  std::string tr_path;
  RunOptions tr_opts;
  auto* tr = app.add_subcommand("transcript", "write or verify a JSON-lines transcript");
  tr->add_option("action", tr_action, "dump or verify")->required()->check(CLI::IsMember({"dump", "verify"}));
  tr->add_option("path", tr_path, "transcript file")->required();
  add_run_options(tr, tr_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*demo) return cmd_demo(build_config(demo_opts, *demo));
    if (*attack) return cmd_attack(attack_kind, attack_scheme, attack_seed, attack_trials, attack_servers);
    if (*cost) return cmd_costs(costs_scheme, costs_json, costs_instrument);
    if (*fuzz) return cmd_fuzz(fuzz_trials, fuzz_r, fuzz_seed);
    if (*tr) return cmd_transcript(tr_action, tr_path, build_config(tr_opts, *tr));
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
