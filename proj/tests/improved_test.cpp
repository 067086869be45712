#include "fcauth/improved.hpp"

#include <algorithm>

#include <gtest/gtest.h>

namespace fcauth::improved {
namespace {

constexpr std::uint32_t kDelta = 5;

struct Deployment {
  Rng rng{77};
  bio::CodecParams codec;
  MasterKey xc = MasterKey::generate(rng, KeyRole::kRcSecret);
  RegistrationCenter rc{xc, rng, kDelta};
  std::vector<Server> servers;
  Enrollment enrollment;
  SmartCard card;

  explicit Deployment(std::size_t n_servers = 2) {
    for (std::size_t k = 0; k < n_servers; ++k) servers.emplace_back(*rc.register_server(rng.identity()), kDelta);
    enrollment = Enrollment{rng.identity(), "hunter2", bio::random_sample(codec.codeword_bits(), rng),
                            bio::TransformParameter::generate(rng), rng.digest(), rng.digest()};
    card = *register_user(rc, enrollment, codec);
  }

  Credentials creds(double flip = 0.0) {
    return Credentials{enrollment.id, enrollment.password, bio::noisy_copy(enrollment.biometric, flip, rng)};
  }

  struct Flow {
    LoginOutput login;
    MsgM2 m2;
    ServerAccept accept;
    RegistrationCenter::Forward forward;
    Digest rs;
    Digest sk_user;
  };

  // One honest login against server k starting at tick t, one tick per hop.
  Flow run(std::size_t k, std::uint32_t t) {
    Flow f;
    f.login = *user_login_m1(card, creds(0.02), servers[k].sid(), rng.digest(), Timestamp{t});
    f.m2 = *rc.process_m1(f.login.m1, Timestamp{t + 1}, Timestamp{t + 1});
    f.rs = rng.digest();
    f.accept = *servers[k].process_m2(f.m2, f.rs, Timestamp{t + 2}, Timestamp{t + 2 + kDelta}, Timestamp{t + 2});
    f.forward = *rc.process_m3(servers[k].sid(), f.accept.m3, rng.digest(), Timestamp{t + 3});
    f.sk_user = *user_process_m4(f.login.session, card, f.forward.m4, Timestamp{t + 4}, kDelta);
    return f;
  }
};

TEST(ImprovedRegistration, VerifiersAreCiphertextsOfServerSecrets) {
  Deployment d(3);
  ASSERT_EQ(d.rc.verifier_table().size(), 3u);
  for (const auto& s : d.servers) {
    const auto& ct = d.rc.verifier_table().at(s.sid());
    auto pt = decrypt(d.xc, ct);
    ASSERT_TRUE(pt);
    EXPECT_EQ(Digest::from_bytes(*pt), h(s.sid(), d.xc));
    // The plaintext digest never appears in the stored bytes.
    const auto shared = h(s.sid(), d.xc);
    EXPECT_EQ(std::search(ct.bytes.begin(), ct.bytes.end(), shared.bytes().begin(), shared.bytes().end()),
              ct.bytes.end());
  }
  EXPECT_EQ(d.rc.register_server(d.servers[0].sid()).reason(), Reason::kDuplicateIdentity);
}

TEST(ImprovedRegistration, CardMaskedValuesUnmaskToReference) {
  Deployment d;
  const Digest x_u = h(d.enrollment.id, d.xc);
  const auto ct = bio::transform(d.enrollment.biometric, d.enrollment.tp);
  const Digest a = h(d.enrollment.n1, d.enrollment.password, d.enrollment.id, ct.bits);
  EXPECT_EQ(d.card.y ^ a, x_u);
  auto pseudo = d.rc.open_pseudo_identity(xor_pad(d.card.pid, a));
  ASSERT_TRUE(pseudo);
  EXPECT_EQ(pseudo->id, d.enrollment.id);
  EXPECT_EQ(pseudo->nonce, *d.rc.current_nonce(d.enrollment.id));
  EXPECT_EQ(register_user(d.rc, d.enrollment, d.codec).reason(), Reason::kDuplicateIdentity);
}

TEST(ImprovedCard, SerializationRoundTripsAndIsSizeIndependentOfServers) {
  std::size_t size = 0;
  for (std::size_t n : {1u, 10u, 100u}) {
    Deployment d(n);
    const Bytes b = d.card.serialize();
    if (size == 0) size = b.size();
    EXPECT_EQ(b.size(), size) << n << " servers";
    auto back = SmartCard::deserialize(b);
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, d.card);
  }
}

TEST(ImprovedCard, DeserializeRejectsDamage) {
  Deployment d;
  Bytes b = d.card.serialize();
  EXPECT_FALSE(SmartCard::deserialize(Bytes{}));
  Bytes v = b;
  v[0] = 2;
  EXPECT_FALSE(SmartCard::deserialize(v));
  EXPECT_FALSE(SmartCard::deserialize(ByteView(b.data(), b.size() - 1)));
  b.push_back(0);
  EXPECT_FALSE(SmartCard::deserialize(b));
}

TEST(ImprovedLogin, FourMessageFlowAgreesWithReferenceKey) {
  Deployment d;
  const auto f = d.run(0, 10);
  EXPECT_EQ(f.accept.user, d.enrollment.id);
  EXPECT_EQ(f.forward.user, d.enrollment.id);
  EXPECT_EQ(f.sk_user, f.accept.session_key);

  const Identity id = d.enrollment.id, sid = d.servers[0].sid();
  const Digest x_prime = h(h(id, d.xc), id, sid, Timestamp{10});
  EXPECT_EQ(f.sk_user, h(x_prime, id, sid, f.rs, f.login.session.ru));
  EXPECT_EQ(d.rc.pending_sessions(), 0u);
}

TEST(ImprovedLogin, PseudoIdentityRotatesEverySession) {
  Deployment d;
  const auto f1 = d.run(0, 0);
  const auto f2 = d.run(1, 20);
  const auto f3 = d.run(0, 40);
  EXPECT_NE(f1.login.m1.did, f2.login.m1.did);
  EXPECT_NE(f2.login.m1.did, f3.login.m1.did);
  EXPECT_NE(f1.sk_user, f3.sk_user);
  // The DID carried on the wire never contains the identity in clear.
  for (const auto* f : {&f1, &f2, &f3}) {
    const Bytes id = d.enrollment.id.encode();
    const auto& did = f->login.m1.did;
    EXPECT_EQ(std::search(did.begin(), did.end(), id.begin(), id.end()), did.end());
  }
}

TEST(ImprovedLogin, HolderChecks) {
  Deployment d;
  Credentials c = d.creds();
  c.password = "letmein";
  EXPECT_EQ(user_login_m1(d.card, c, d.servers[0].sid(), d.rng.digest(), Timestamp{}).reason(),
            Reason::kPasswordMismatch);
  c = d.creds();
  c.biometric = bio::random_sample(d.codec.codeword_bits(), d.rng);
  EXPECT_EQ(user_login_m1(d.card, c, d.servers[0].sid(), d.rng.digest(), Timestamp{}).reason(),
            Reason::kBiometricMismatch);
}

TEST(ImprovedRc, M1Rejections) {
  Deployment d;
  auto out = *user_login_m1(d.card, d.creds(), d.servers[0].sid(), d.rng.digest(), Timestamp{0});
  EXPECT_EQ(d.rc.process_m1(out.m1, Timestamp{6}, Timestamp{6}).reason(), Reason::kStaleTimestamp);
  MsgM1 bad = out.m1;
  bad.did[3] ^= 1;
  EXPECT_EQ(d.rc.process_m1(bad, Timestamp{1}, Timestamp{1}).reason(), Reason::kResyncRequired);
  bad = out.m1;
  bad.g = bad.g ^ Digest::from_bytes(Bytes(20, 1));
  EXPECT_EQ(d.rc.process_m1(bad, Timestamp{1}, Timestamp{1}).reason(), Reason::kHashMismatch);
  bad = out.m1;
  bad.sid = Identity{bad.sid.value ^ 1};
  EXPECT_EQ(d.rc.process_m1(bad, Timestamp{1}, Timestamp{1}).reason(), Reason::kHashMismatch);
  EXPECT_EQ(d.rc.pending_sessions(), 0u);
  EXPECT_TRUE(d.rc.process_m1(out.m1, Timestamp{1}, Timestamp{1}));
  EXPECT_EQ(d.rc.pending_sessions(), 1u);
}

TEST(ImprovedServer, M2Rejections) {
  Deployment d;
  auto out = *user_login_m1(d.card, d.creds(), d.servers[0].sid(), d.rng.digest(), Timestamp{0});
  auto m2 = *d.rc.process_m1(out.m1, Timestamp{1}, Timestamp{1});
  const Digest rs = d.rng.digest();
  const auto& srv = d.servers[0];
  EXPECT_EQ(srv.process_m2(m2, rs, Timestamp{7}, Timestamp{12}, Timestamp{7}).reason(), Reason::kStaleTimestamp);
  EXPECT_EQ(d.servers[1].process_m2(m2, rs, Timestamp{2}, Timestamp{7}, Timestamp{2}).reason(),
            Reason::kUnknownServer);
  MsgM2 bad = m2;
  bad.t2 = Timestamp{2};
  EXPECT_EQ(srv.process_m2(bad, rs, Timestamp{2}, Timestamp{7}, Timestamp{2}).reason(), Reason::kHashMismatch);
  bad = m2;
  bad.payload.bytes.back() ^= 0x40;
  EXPECT_EQ(srv.process_m2(bad, rs, Timestamp{2}, Timestamp{7}, Timestamp{2}).reason(), Reason::kDecryptFailed);
}

TEST(ImprovedRc, M3Rejections) {
  Deployment d;
  auto out = *user_login_m1(d.card, d.creds(), d.servers[0].sid(), d.rng.digest(), Timestamp{0});
  auto m2 = *d.rc.process_m1(out.m1, Timestamp{1}, Timestamp{1});
  auto acc = *d.servers[0].process_m2(m2, d.rng.digest(), Timestamp{2}, Timestamp{7}, Timestamp{2});
  const Digest rn = d.rng.digest();
  EXPECT_EQ(d.rc.process_m3(d.servers[1].sid(), acc.m3, rn, Timestamp{3}).reason(), Reason::kNoPendingSession);
  MsgM3 bad = acc.m3;
  bad.tu = Timestamp{bad.tu.ticks + 1};
  EXPECT_EQ(d.rc.process_m3(d.servers[0].sid(), bad, rn, Timestamp{3}).reason(), Reason::kHashMismatch);
  EXPECT_EQ(d.rc.process_m3(d.servers[0].sid(), acc.m3, rn, Timestamp{8}).reason(), Reason::kStaleTimestamp);
  EXPECT_TRUE(d.rc.process_m3(d.servers[0].sid(), acc.m3, rn, Timestamp{3}));
  // The pending entry is consumed: a second copy finds nothing.
  EXPECT_EQ(d.rc.process_m3(d.servers[0].sid(), acc.m3, rn, Timestamp{4}).reason(), Reason::kNoPendingSession);
}

TEST(ImprovedRc, PendingSessionsExpire) {
  Deployment d;
  auto out = *user_login_m1(d.card, d.creds(), d.servers[0].sid(), d.rng.digest(), Timestamp{0});
  auto m2 = *d.rc.process_m1(out.m1, Timestamp{1}, Timestamp{1});
  auto acc = *d.servers[0].process_m2(m2, d.rng.digest(), Timestamp{5}, Timestamp{10}, Timestamp{5});
  // T3 is fresh but the RC's own pending entry (T2 = 1) is not.
  EXPECT_EQ(d.rc.process_m3(d.servers[0].sid(), acc.m3, d.rng.digest(), Timestamp{7}).reason(),
            Reason::kNoPendingSession);
  EXPECT_EQ(d.rc.pending_sessions(), 0u);
}

TEST(ImprovedUser, M4RejectionsLeaveCardUntouched) {
  Deployment d;
  auto out = *user_login_m1(d.card, d.creds(), d.servers[0].sid(), d.rng.digest(), Timestamp{0});
  auto m2 = *d.rc.process_m1(out.m1, Timestamp{1}, Timestamp{1});
  auto acc = *d.servers[0].process_m2(m2, d.rng.digest(), Timestamp{2}, Timestamp{7}, Timestamp{2});
  auto fwd = *d.rc.process_m3(d.servers[0].sid(), acc.m3, d.rng.digest(), Timestamp{3});
  const SmartCard before = d.card;
  MsgM4 bad = fwd.m4;
  bad.mx = bad.mx ^ Digest::from_bytes(Bytes(20, 2));
  EXPECT_EQ(user_process_m4(out.session, d.card, bad, Timestamp{4}, kDelta).reason(), Reason::kHashMismatch);
  EXPECT_EQ(user_process_m4(out.session, d.card, fwd.m4, Timestamp{8}, kDelta).reason(), Reason::kStaleTimestamp);
  EXPECT_EQ(d.card, before);
  EXPECT_TRUE(user_process_m4(out.session, d.card, fwd.m4, Timestamp{4}, kDelta));
  EXPECT_NE(d.card.pid, before.pid);
}

TEST(ImprovedUser, DamagedRidForcesResyncNotAnotherIdentity) {
  Deployment d;
  auto out = *user_login_m1(d.card, d.creds(), d.servers[0].sid(), d.rng.digest(), Timestamp{0});
  auto m2 = *d.rc.process_m1(out.m1, Timestamp{1}, Timestamp{1});
  auto acc = *d.servers[0].process_m2(m2, d.rng.digest(), Timestamp{2}, Timestamp{7}, Timestamp{2});
  auto fwd = *d.rc.process_m3(d.servers[0].sid(), acc.m3, d.rng.digest(), Timestamp{3});
  fwd.m4.rid[5] ^= 0x10;
  ASSERT_TRUE(user_process_m4(out.session, d.card, fwd.m4, Timestamp{4}, kDelta));
  auto next = *user_login_m1(d.card, d.creds(), d.servers[0].sid(), d.rng.digest(), Timestamp{20});
  EXPECT_EQ(d.rc.process_m1(next.m1, Timestamp{21}, Timestamp{21}).reason(), Reason::kResyncRequired);
}

TEST(ImprovedWire, DeclaredSizes) {
  Deployment d;
  const auto f = d.run(0, 0);
  EXPECT_EQ(f.login.m1.to_wire().declared_bits(), 544u);
  EXPECT_EQ(f.m2.to_wire().declared_bits(), 320u);
  EXPECT_EQ(f.accept.m3.to_wire().declared_bits(), 384u);
  EXPECT_EQ(f.forward.m4.to_wire().declared_bits(), 544u);
  auto m1 = MsgM1::from_wire(*wire::Message::decode(f.login.m1.to_wire().encode()));
  ASSERT_TRUE(m1);
  EXPECT_EQ(m1->did, f.login.m1.did);
  EXPECT_FALSE(MsgM2::from_wire(f.login.m1.to_wire()));
}

TEST(ImprovedMaintenance, PasswordChangeKeepsUnmaskedValues) {
  Deployment d;
  auto card = change_password(d.card, d.creds(0.02), "new pass");
  ASSERT_TRUE(card);
  EXPECT_FALSE(user_login_m1(*card, d.creds(), d.servers[0].sid(), d.rng.digest(), Timestamp{0}));
  d.card = *card;
  d.enrollment.password = "new pass";
  const auto f = d.run(0, 0);
  EXPECT_EQ(f.sk_user, f.accept.session_key);
}

TEST(ImprovedMaintenance, BiometricUpdateAndRevocation) {
  Deployment d;
  const auto fresh = d.creds(0.02);
  auto card = update_biometric(d.card, fresh, bio::TransformParameter::generate(d.rng));
  ASSERT_TRUE(card);
  d.card = *card;
  d.enrollment.biometric = fresh.biometric;
  auto f = d.run(1, 0);
  EXPECT_EQ(f.sk_user, f.accept.session_key);

  auto revoked =
      revoke_card(d.rc, Revocation{d.creds(), bio::TransformParameter::generate(d.rng), d.rng.digest(), d.rng.digest()},
                  d.codec);
  ASSERT_TRUE(revoked);
  const SmartCard old = d.card;
  d.card = *revoked;
  f = d.run(0, 20);
  EXPECT_EQ(f.sk_user, f.accept.session_key);
  EXPECT_NE(old.helper_offset, d.card.helper_offset);
}

TEST(ImprovedCosts, PrimitiveCountsPerPhase) {
  Deployment d;
  PrimitiveCounters login_n, auth_n;
  Result<LoginOutput> out = Rejection{Reason::kNoSession, ""};
  {
    CounterScope s(login_n);
    out = user_login_m1(d.card, d.creds(), d.servers[0].sid(), d.rng.digest(), Timestamp{0});
  }
  ASSERT_TRUE(out);
  {
    CounterScope s(auth_n);
    auto m2 = *d.rc.process_m1(out->m1, Timestamp{1}, Timestamp{1});
    auto acc = *d.servers[0].process_m2(m2, d.rng.digest(), Timestamp{2}, Timestamp{7}, Timestamp{2});
    auto fwd = *d.rc.process_m3(d.servers[0].sid(), acc.m3, d.rng.digest(), Timestamp{3});
    ASSERT_TRUE(user_process_m4(out->session, d.card, fwd.m4, Timestamp{4}, kDelta));
  }
  EXPECT_EQ(login_n, (PrimitiveCounters{6, 0, 0, 1}));
  EXPECT_EQ(auth_n, (PrimitiveCounters{15, 2, 3, 0}));
}

}  // namespace
}  // namespace fcauth::improved
