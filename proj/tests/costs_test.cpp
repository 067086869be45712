#include "fcauth/costs.hpp"

#include <gtest/gtest.h>

#include <map>

#include <json.hpp>

namespace fcauth::costs {
namespace {

TEST(ComputationTable, EveryPrintedValueReproduced) {
  const std::map<std::string, double> printed = {
      {"Chuang-Chen", 0.0391}, {"Amin-Biswas", 2.2674}, {"Sood", 0.0713}, {"Mishra", 0.0414}, {"He-Wang", 17.856},
      {"Lu", 2.2605},          {"Ali-Pal", 2.2651},     {"Barman", 2.2651}, {"Our", 2.2789}};
  const auto checks = check_computation_table();
  ASSERT_EQ(checks.size(), 9u);
  for (const auto& c : checks) {
    ASSERT_TRUE(printed.contains(c.scheme)) << c.scheme;
    EXPECT_DOUBLE_EQ(c.printed_ms, printed.at(c.scheme));
    EXPECT_NEAR(c.computed_ms, printed.at(c.scheme), 0.001) << c.scheme;
    EXPECT_TRUE(c.within_tolerance);
  }
}

TEST(ComputationTable, FormulasAndHandComputedTotals) {
  const auto& rows = computation_table();
  EXPECT_EQ(rows[7].ops.login.formula(), "C_fcs + 6C_h");
  EXPECT_EQ(rows[8].ops.auth.formula(), "13C_h + C_enc + C_dec");
  EXPECT_EQ(rows[8].ops.total().formula(), "C_fcs + 19C_h + C_enc + C_dec");
  // 2.226 + 19 * 0.0023 + 2 * 0.0046
  EXPECT_NEAR(estimate_ms(rows[8].ops), 2.2789, 1e-9);
  // 8 * 2.226 + 21 * 0.0023
  EXPECT_NEAR(estimate_ms(rows[4].ops), 17.8563, 1e-9);
}

TEST(CostModel, RejectsNonPositiveCosts) {
  CostModel m;
  m.f_h = 0;
  EXPECT_THROW(check_computation_table(m), UsageError);
}

TEST(CommBits, ImprovedScheduleFlagsM2) {
  const auto rep = comm_bits(improved_schedule());
  ASSERT_EQ(rep.messages.size(), 4u);
  EXPECT_EQ(rep.messages[0].computed, 544u);
  EXPECT_EQ(rep.messages[1].computed, 256u + 32 + 32);
  EXPECT_EQ(*rep.messages[1].printed, 332u);
  EXPECT_TRUE(rep.messages[1].discrepancy);
  EXPECT_EQ(rep.messages[2].computed, 384u);
  EXPECT_EQ(rep.messages[3].computed, 544u);
  for (std::size_t i : {0u, 2u, 3u}) EXPECT_FALSE(rep.messages[i].discrepancy);
  EXPECT_EQ(rep.stated_total, 1804u);
  EXPECT_EQ(*rep.printed_total, 1804u);
  EXPECT_EQ(rep.computed_total, 1792u);
  ASSERT_EQ(rep.flags.size(), 2u);
  EXPECT_NE(rep.flags[0].find("320"), std::string::npos);
  EXPECT_NE(rep.flags[0].find("332"), std::string::npos);
}

TEST(CommBits, BarmanScheduleTotal) {
  const auto rep = comm_bits(barman_schedule());
  EXPECT_EQ(rep.messages[0].computed, 544u);
  EXPECT_EQ(rep.messages[1].computed, 352u);
  EXPECT_EQ(rep.computed_total, 896u);
  EXPECT_TRUE(rep.flags.empty());
}

TEST(CommunicationTable, InconsistentRowsAreFlagged) {
  std::size_t flagged = 0;
  for (const auto& r : communication_table()) {
    if (r.discrepancy().empty()) continue;
    ++flagged;
    EXPECT_EQ(r.scheme, "Barman");
    EXPECT_EQ(r.login + r.auth, 1708u);
  }
  EXPECT_EQ(flagged, 1u);
}

TEST(MeasuredBits, TranscriptMatchesSchedules) {
  harness::ScenarioConfig c;
  const auto run = harness::run_session(c);
  const auto m = measured_bits(run.transcript);
  const auto sched = comm_bits(improved_schedule());
  ASSERT_EQ(m.size(), sched.messages.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(m[i].label, sched.messages[i].label);
    EXPECT_EQ(m[i].computed, sched.messages[i].computed);
  }
  c.scheme = harness::Scheme::kBarman;
  const auto b = measured_bits(harness::run_session(c).transcript);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].computed + b[1].computed, 896u);
}

PrimitiveDelta row(const InstrumentReport& r, const std::string& phase, const std::string& prim) {
  for (const auto& x : r.rows) {
    if (x.phase == phase && x.primitive == prim) return x;
  }
  ADD_FAILURE() << phase << " " << prim << " missing";
  return {};
}

TEST(Instrument, ImprovedCountsAndExplanations) {
  harness::ScenarioConfig c;
  c.n_users = 3;
  c.n_servers = 2;
  c.sessions_per_user = 2;
  c.flip_prob = 0;
  const auto r = instrument_run(harness::run_session(c));
  EXPECT_EQ(r.scheme, harness::Scheme::kImproved);
  EXPECT_EQ(r.sessions, 6u);
  EXPECT_DOUBLE_EQ(r.messages_per_session, 4.0);
  EXPECT_DOUBLE_EQ(row(r, "login", "hash").measured, 6);
  EXPECT_DOUBLE_EQ(row(r, "login", "fcs").measured, 1);
  EXPECT_TRUE(row(r, "login", "hash").explanation.empty());
  EXPECT_DOUBLE_EQ(row(r, "auth", "hash").measured, 15);
  EXPECT_EQ(row(r, "auth", "hash").symbolic, 13u);
  EXPECT_DOUBLE_EQ(row(r, "auth", "enc").measured, 2);
  EXPECT_DOUBLE_EQ(row(r, "auth", "dec").measured, 3);
  for (const auto& x : r.rows) {
    if (x.measured == x.symbolic) continue;
    EXPECT_FALSE(x.explanation.empty()) << x.phase << " " << x.primitive;
    EXPECT_EQ(x.explanation.find("no recorded explanation"), std::string::npos) << x.phase << " " << x.primitive;
  }
}

TEST(Instrument, BarmanCounts) {
  harness::ScenarioConfig c;
  c.scheme = harness::Scheme::kBarman;
  c.flip_prob = 0;
  const auto r = instrument_run(harness::run_session(c));
  EXPECT_EQ(r.scheme, harness::Scheme::kBarman);
  EXPECT_DOUBLE_EQ(row(r, "login", "hash").measured, 7);
  EXPECT_DOUBLE_EQ(row(r, "auth", "hash").measured, 11);
  EXPECT_TRUE(row(r, "auth", "hash").explanation.empty());
  EXPECT_FALSE(row(r, "login", "hash").explanation.empty());
}

TEST(Render, JsonCarriesDiscrepancyColumns) {
  const auto j = nlohmann::json::parse(render_json());
  EXPECT_EQ(j["computation"].size(), 9u);
  EXPECT_EQ(j["communication"][7]["scheme"], "Barman");
  EXPECT_TRUE(j["communication"][7]["discrepancy"].is_string());
  EXPECT_TRUE(j["communication"][8]["discrepancy"].is_null());
  EXPECT_EQ(j["schedules"][0]["messages"][1]["discrepancy"], true);
  EXPECT_NE(render_text().find("flag: M2"), std::string::npos);
}

}  // namespace
}  // namespace fcauth::costs
