#include "fcauth/attacks.hpp"

#include <json.hpp>

namespace fcauth::attacks {

Result<barman::ServerSecrets> InsiderAdversary::own_secrets(Identity sid) const {
  return barman::unlock(own_card, own, sid);
}

Result<Identity> anonymity_attack(const InsiderAdversary& adv, const barman::LoginRequest& intercepted) {
  return anonymity_attack(adv, intercepted, intercepted.sid);
}

Result<Identity> anonymity_attack(const InsiderAdversary& adv, const barman::LoginRequest& intercepted,
                                  Identity assumed_sid) {
  auto mine = adv.own_secrets(assumed_sid);
  if (!mine) return mine.error();
  const Digest z = h(mine->sv, intercepted.t1);
  return Identity::narrow(intercepted.m2 ^ z);
}

Result<Forgery> forge_login(const InsiderAdversary& adv, const barman::SmartCard& stolen, Identity victim,
                            Identity sid, const Digest& ru, Timestamp t1) {
  auto mine = adv.own_secrets(sid);
  if (!mine) return mine.error();
  const barman::CardEntry* entry = stolen.find(sid);
  if (entry == nullptr) return reject(Reason::kUnknownServer, "stolen card holds no entry for the server");
  // AM_uk xor BM_uk = US_ku xor SV_k; every user-side mask cancels.
  const Digest x = entry->am ^ entry->bm;
  const Digest us = x ^ mine->sv;
  const Digest m1 = h(victim, us);
  const Digest m2 = victim.widen() ^ h(mine->sv, t1);
  const Digest m3 = m1 ^ ru;
  const Digest m4 = h(victim, m1, m2, t1, ru);
  return Forgery{barman::LoginRequest{m2, m3, m4, t1, sid}, victim, us, mine->sv, ru};
}

Result<Digest> Forgery::complete(const barman::ServerReply& reply) const {
  const Digest rs = reply.m9 ^ h(us, ru);
  const Digest sk = h(victim, sv, ru, rs, request.t1, reply.t3);
  if (h(us, sk, reply.t3, rs) != reply.m10) return reject(Reason::kHashMismatch, "M11 != M10");
  return sk;
}

ScalabilityReport scalability_report(std::size_t servers) {
  if (servers == 0) throw UsageError("scalability report needs at least one server");
  const std::size_t bits = 2 * Digest::kBits * servers;
  return ScalabilityReport{servers, bits,
                           "AM_uk and BM_uk (160 bits each) per server; the card grows with every server added"};
}

std::string AttackReport::to_json() const {
  nlohmann::ordered_json j;
  j["attack"] = attack;
  j["success"] = success;
  j["recovered"] = recovered;
  j["transcript"] = transcript_ref;
  return j.dump();
}

Result<Identity> improved_anonymity_attempt(const improved::SmartCard& own_card, const Credentials& own,
                                            const improved::MsgM1& intercepted) {
  // The adversary's own login yields X_a; nothing on its card is per server.
  auto login = improved::user_login_m1(own_card, own, intercepted.sid, Digest{}, intercepted.t1);
  if (!login) return login.error();
  const Digest z = h(login->session.x_u, intercepted.t1);
  return Identity::narrow(intercepted.g ^ z);
}

improved::MsgM1 improved_stolen_card_forgery(const improved::SmartCard& stolen, Identity victim,
                                             const std::string& guessed_password, Identity sid, Timestamp t1,
                                             Rng& rng) {
  const bio::RepetitionCodec codec(stolen.codec);
  const bio::HelperData helper{stolen.helper_offset, stolen.r};
  const BitString rc_guess = rng.bits(stolen.codec.secret_bits);
  const Digest r_guess = h(Digest::from_bits(rc_guess), victim, guessed_password);
  const Digest n1 = stolen.e ^ r_guess;
  const auto ct = bio::enrolled_template(helper, rc_guess, codec);
  const Digest a = h(n1, guessed_password, victim, ct.bits);
  const Digest x = stolen.y ^ a;
  const Digest ru = rng.digest();
  const Digest g = ru ^ h(x, victim, sid, t1);
  const Digest h_auth = h(victim, g, x, ru, t1, sid);
  return improved::MsgM1{xor_pad(stolen.pid, a), h_auth, g, t1, sid};
}

}  // namespace fcauth::attacks
