#include "fcauth/attacks.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include "fcauth/harness.hpp"

namespace fcauth::attacks {
namespace {

constexpr std::uint32_t kDelta = 5;

// Two users (victim and insider) on a Barman deployment with two servers.
struct BarmanWorld {
  Rng rng{2024};
  bio::CodecParams codec;
  barman::RegistrationCenter rc{MasterKey::generate(rng, KeyRole::kRcSecret)};
  std::vector<barman::Server> servers;
  barman::Enrollment victim, insider;
  barman::SmartCard victim_card, insider_card;

  BarmanWorld() {
    for (int k = 0; k < 2; ++k) servers.emplace_back(*rc.register_server(rng.identity()), kDelta);
    victim = enroll("victim pw");
    insider = enroll("insider pw");
    victim_card = *barman::register_user(rc, victim, codec);
    insider_card = *barman::register_user(rc, insider, codec);
  }

  barman::Enrollment enroll(const std::string& pw) {
    return {rng.identity(), pw, bio::random_sample(codec.codeword_bits(), rng), bio::TransformParameter::generate(rng),
            rng.digest(), rng.digest()};
  }
  Credentials creds(const barman::Enrollment& e) {
    return {e.id, e.password, bio::noisy_copy(e.biometric, 0.0, rng)};
  }
  InsiderAdversary adversary() { return InsiderAdversary{insider_card, creds(insider), {}}; }
};

TEST(Anonymity, InsiderRecoversVictimIdentity) {
  BarmanWorld w;
  for (std::uint32_t t = 0; t < 20; ++t) {
    auto out = barman::login(w.victim_card, w.creds(w.victim), w.servers[t % 2].sid(), w.rng.digest(), Timestamp{t});
    ASSERT_TRUE(out);
    auto id = anonymity_attack(w.adversary(), out->request);
    ASSERT_TRUE(id);
    EXPECT_EQ(*id, w.victim.id);
  }
}

TEST(Anonymity, WrongServerSecretYieldsNoIdentity) {
  BarmanWorld w;
  auto out = barman::login(w.victim_card, w.creds(w.victim), w.servers[0].sid(), w.rng.digest(), Timestamp{3});
  auto id = anonymity_attack(w.adversary(), out->request, w.servers[1].sid());
  EXPECT_FALSE(id);
}

TEST(Anonymity, AdversaryWithoutEntryForServerRejected) {
  BarmanWorld w;
  auto out = barman::login(w.victim_card, w.creds(w.victim), w.servers[0].sid(), w.rng.digest(), Timestamp{3});
  barman::LoginRequest req = out->request;
  req.sid = Identity{31337};
  EXPECT_EQ(anonymity_attack(w.adversary(), req).reason(), Reason::kUnknownServer);
}

TEST(Impersonation, StolenCardForgesAcceptedLoginAndMatchingKey) {
  BarmanWorld w;
  for (std::uint32_t t = 0; t < 10; ++t) {
    const auto& srv = w.servers[t % 2];
    auto forgery = forge_login(w.adversary(), w.victim_card, w.victim.id, srv.sid(), w.rng.digest(), Timestamp{t});
    ASSERT_TRUE(forgery);
    // US_ku recovered from the stolen card alone.
    const Digest psk = h(srv.sid(), w.rc.secret_for_tests());
    EXPECT_EQ(forgery->us, h(w.victim.id, psk));
    auto acc = srv.authenticate(forgery->request, w.rng.digest(), Timestamp{t + 1}, Timestamp{t + 1});
    ASSERT_TRUE(acc);
    EXPECT_EQ(acc->user, w.victim.id);
    auto sk = forgery->complete(acc->reply);
    ASSERT_TRUE(sk);
    EXPECT_EQ(*sk, acc->session_key);
  }
}

TEST(Impersonation, WrongVictimIdentityRejectedByServer) {
  BarmanWorld w;
  auto forgery = forge_login(w.adversary(), w.victim_card, Identity{w.victim.id.value ^ 1}, w.servers[0].sid(),
                             w.rng.digest(), Timestamp{0});
  ASSERT_TRUE(forgery);
  EXPECT_EQ(w.servers[0].authenticate(forgery->request, w.rng.digest(), Timestamp{1}, Timestamp{1}).reason(),
            Reason::kHashMismatch);
}

TEST(Scalability, CardMaterialGrowsWithServers) {
  EXPECT_EQ(scalability_report(1).bits_on_card, 320u);
  EXPECT_EQ(scalability_report(100).bits_on_card, 32000u);
  EXPECT_THROW(scalability_report(0), UsageError);
}

TEST(Report, JsonShape) {
  AttackReport r{"anonymity", true, {{"ID_u", "17"}}, "barman seed=1 events=2"};
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["attack"], "anonymity");
  EXPECT_EQ(j["success"], true);
  EXPECT_EQ(j["recovered"]["ID_u"], "17");
  EXPECT_EQ(j["transcript"], "barman seed=1 events=2");
}

TEST(Trials, BarmanFallsImprovedHolds) {
  using harness::Scheme;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    EXPECT_TRUE(harness::anonymity_trial(Scheme::kBarman, seed).success) << seed;
    EXPECT_TRUE(harness::impersonation_trial(Scheme::kBarman, seed).success) << seed;
    EXPECT_FALSE(harness::anonymity_trial(Scheme::kImproved, seed).success) << seed;
    const auto imp = harness::impersonation_trial(Scheme::kImproved, seed);
    EXPECT_FALSE(imp.success) << seed;
    EXPECT_NE(imp.recovered.at("server"), "accept");
  }
}

TEST(Trials, AttacksNeedTheirPreconditions) {
  using harness::Scheme;
  // SV of another server does not unmask the identity; a guessed identity
  // does not pass the server's check.
  EXPECT_FALSE(harness::anonymity_trial(Scheme::kBarman, 5, false).success);
  EXPECT_FALSE(harness::impersonation_trial(Scheme::kBarman, 5, false).success);
}

}  // namespace
}  // namespace fcauth::attacks
