#pragma once

// Computation and communication cost accounting. Two layers: symbolic
// operation counts per phase (as published for each scheme) and live
// primitive counts gathered from harness runs.

#include <optional>
#include <string>
#include <vector>

#include "fcauth/harness.hpp"

namespace fcauth::costs {

// Unit costs in milliseconds.
struct CostModel {
  double f_h = 0.0023;
  double f_enc = 0.0046;  // also charged for a decryption
  double f_ecm = 2.226;
  double f_asym = 0.0046;
  double f_fe = 2.226;
  double f_bh = 2.226;
  double f_fcs = 2.226;

  void validate() const;  // throws UsageError unless every cost is positive
};

struct Ops {
  std::uint32_t hash = 0;
  std::uint32_t enc = 0;
  std::uint32_t dec = 0;
  std::uint32_t fcs = 0;
  std::uint32_t bh = 0;
  std::uint32_t fe = 0;
  std::uint32_t ecm = 0;
  std::uint32_t asym = 0;

  Ops& operator+=(const Ops& o);
  friend Ops operator+(Ops a, const Ops& b) { return a += b; }
  friend bool operator==(const Ops&, const Ops&) = default;
  std::string formula() const;  // e.g. "C_fcs + 6C_h"
};

struct OpCount {
  Ops login;
  Ops auth;
  Ops total() const { return login + auth; }
};

double estimate_ms(const Ops& ops, const CostModel& model = {});
double estimate_ms(const OpCount& ops, const CostModel& model = {});

struct ComputationRow {
  std::string scheme;
  OpCount ops;
  double printed_ms;
};
const std::vector<ComputationRow>& computation_table();

struct ComputationCheck {
  std::string scheme;
  std::string login;
  std::string auth;
  std::string total;
  double computed_ms;
  double printed_ms;
  bool within_tolerance;  // |computed - printed| <= 0.001
};
std::vector<ComputationCheck> check_computation_table(const CostModel& model = {});

// ---- communication --------------------------------------------------------------

struct FieldSize {
  std::string name;
  std::uint32_t bits;
};

struct ScheduledMessage {
  std::string label;
  std::string route;
  std::vector<FieldSize> fields;
  std::optional<std::uint32_t> printed_bits;

  std::uint32_t bits() const;
};

struct MessageSchedule {
  std::string scheme;
  std::vector<ScheduledMessage> messages;
  std::optional<std::uint32_t> printed_total;
};

MessageSchedule improved_schedule();
MessageSchedule barman_schedule();

struct MessageBits {
  std::string label;
  std::uint32_t computed;
  std::optional<std::uint32_t> printed;
  bool discrepancy;
};

struct CommReport {
  std::string scheme;
  std::vector<MessageBits> messages;
  std::uint32_t computed_total = 0;
  // Sum using the printed per-message figure wherever one exists.
  std::uint32_t stated_total = 0;
  std::optional<std::uint32_t> printed_total;
  std::vector<std::string> flags;
};

CommReport comm_bits(const MessageSchedule& schedule);

// Per-message declared sizes as they actually crossed the channel (the first
// occurrence of each label).
std::vector<MessageBits> measured_bits(const harness::Transcript& t);

struct CommunicationRow {
  std::string scheme;
  std::uint32_t login;
  std::uint32_t auth;
  std::uint32_t total;
  std::string mode;

  // Empty when login + auth == total.
  std::string discrepancy() const;
};
const std::vector<CommunicationRow>& communication_table();

// ---- instrumented runs -------------------------------------------------------------

struct PrimitiveDelta {
  std::string phase;
  std::string primitive;
  double measured;  // per session
  std::uint32_t symbolic;
  std::string explanation;  // empty when measured == symbolic
};

struct InstrumentReport {
  harness::Scheme scheme;
  std::size_t sessions = 0;
  double messages_per_session = 0;
  OpCount symbolic;
  std::vector<PrimitiveDelta> rows;
};

// Compares live counts against the symbolic formula of the run's scheme.
// Only sessions in which the first message was sent are counted.
InstrumentReport instrument_run(const harness::RunResult& run);

// Text and JSON renderings of the tables, each with a discrepancy column.
std::string render_text(const CostModel& model = {});
std::string render_json(const CostModel& model = {});

}  // namespace fcauth::costs
