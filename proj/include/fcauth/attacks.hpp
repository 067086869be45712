#pragma once

// Cryptanalysis of the Barman scheme, driven only by what an insider holds:
// its own card and credentials, captured wire messages and, for the
// impersonation, a stolen card. Ground truth is never consulted here.

#include <map>
#include <string>
#include <vector>

#include "fcauth/barman.hpp"
#include "fcauth/improved.hpp"

namespace fcauth::attacks {

// A registered but dishonest user.
struct InsiderAdversary {
  barman::SmartCard own_card;
  Credentials own;
  std::vector<barman::LoginRequest> captured;

  // SV_k and US_ak as the adversary's own card yields them.
  Result<barman::ServerSecrets> own_secrets(Identity sid) const;
};

// SV_k from the adversary's card, Z = h(SV_k || T1), ID_u = M2 xor Z.
// Rejects when the adversary holds no entry for the request's server, or
// when the unmasked block is not an identity (wrong SV_k).
Result<Identity> anonymity_attack(const InsiderAdversary& adv, const barman::LoginRequest& intercepted);
// Same computation with SV taken from the adversary's entry for `assumed_sid`
// instead of the request's server.
Result<Identity> anonymity_attack(const InsiderAdversary& adv, const barman::LoginRequest& intercepted,
                                  Identity assumed_sid);

// A login request forged from a stolen card plus the victim identity, and
// the state needed to finish key agreement from the server's reply.
struct Forgery {
  barman::LoginRequest request;
  Identity victim;
  Digest us;  // US_ku = (AM_uk xor BM_uk) xor SV_k
  Digest sv;
  Digest ru;

  // Recovers R_s, derives SK and checks M10.
  Result<Digest> complete(const barman::ServerReply& reply) const;
};

Result<Forgery> forge_login(const InsiderAdversary& adv, const barman::SmartCard& stolen, Identity victim,
                            Identity sid, const Digest& ru, Timestamp t1);

struct ScalabilityReport {
  std::size_t servers = 0;
  std::size_t bits_on_card = 0;  // 2 * 160 * servers
  std::string note;
};
// Throws UsageError when servers == 0.
ScalabilityReport scalability_report(std::size_t servers);

struct AttackReport {
  std::string attack;
  bool success = false;
  std::map<std::string, std::string> recovered;
  std::string transcript_ref;

  std::string to_json() const;
};

// ---- negative controls against the improved scheme -----------------------------

// The anonymity attack transplanted: the adversary's own X_a plays the role
// of SV_k and G_u the role of M2.
Result<Identity> improved_anonymity_attempt(const improved::SmartCard& own_card, const Credentials& own,
                                            const improved::MsgM1& intercepted);

// Stolen card, victim identity known, password guessed and no usable
// biometric. The helper data is opened with a guessed secret since the
// card's local checks cannot be passed.
improved::MsgM1 improved_stolen_card_forgery(const improved::SmartCard& stolen, Identity victim,
                                             const std::string& guessed_password, Identity sid, Timestamp t1,
                                             Rng& rng);

}  // namespace fcauth::attacks
