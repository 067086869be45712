#pragma once

// The improved scheme: the registration centre mediates every login through
// a four-message flow (user -> RC -> server -> RC -> user), keeps only
// encrypted server verifiers, and rotates the user's pseudo-identity after
// each successful authentication. The card holds no per-server material.

#include <map>
#include <optional>
#include <string>
#include <tuple>

#include "fcauth/biofuzz.hpp"
#include "fcauth/credentials.hpp"
#include "fcauth/primitives.hpp"
#include "fcauth/wire.hpp"

namespace fcauth::improved {

struct ServerState {
  Identity sid;
  Digest shared;  // X_RSk = h(SID_k || X_c)
};

// E_Xc(ID || r) after decryption.
struct PseudoIdentity {
  Identity id;
  Digest nonce;
};

struct MsgM1 {
  Bytes did;  // E_Xc(ID_u || r)
  Digest h_auth;
  Digest g;
  Timestamp t1;
  Identity sid;

  wire::Message to_wire() const;
  static Result<MsgM1> from_wire(const wire::Message& m);
};

struct MsgM2 {
  Ciphertext payload;  // E_XRSk(X'_u, R_u, ID_u, H_Rc, SID_k, T1)
  Timestamp t2;
  Identity sid;

  wire::Message to_wire() const;
  static Result<MsgM2> from_wire(const wire::Message& m);
};

struct MsgM3 {
  Digest mx;
  Digest h_server;  // H''_Rc
  Timestamp t3;
  Timestamp tu;

  wire::Message to_wire() const;
  static Result<MsgM3> from_wire(const wire::Message& m);
};

struct MsgM4 {
  Digest mx;
  Digest h_server;
  Timestamp t3;
  Timestamp tu;
  Bytes rid;  // E_Xc(ID_u || r_n) xor R_s

  wire::Message to_wire() const;
  static Result<MsgM4> from_wire(const wire::Message& m);
};

class RegistrationCenter {
 public:
  RegistrationCenter(MasterKey xc, Rng& rng, std::uint32_t max_delay);

  Result<ServerState> register_server(Identity sid);

  // Reply to a registration request <A_u, ID_u> over the secure channel.
  struct Issued {
    Digest y;   // X_u xor A_u
    Bytes pid;  // E_Xc(ID_u || r_o) masked by A_u
  };
  Result<Issued> enroll_user(Identity id, const Digest& a);
  // Card replacement for an already registered identity.
  Result<Issued> reissue_user(Identity id, const Digest& a);

  Result<MsgM2> process_m1(const MsgM1& m1, Timestamp t2, Timestamp now);
  struct Forward {
    Identity user;  // routing only; never placed on the wire
    MsgM4 m4;
  };
  // `from` is the server the message arrived from (channel envelope).
  Result<Forward> process_m3(Identity from, const MsgM3& m3, const Digest& rn, Timestamp now);

  const std::map<Identity, Ciphertext>& verifier_table() const { return verifiers_; }
  std::size_t pending_sessions() const { return pending_.size(); }
  // Most recent pseudo-identity nonce issued to `id`.
  std::optional<Digest> current_nonce(Identity id) const;
  // Decrypts a pseudo-identity. Exposed for oracle checks in tests.
  Result<PseudoIdentity> open_pseudo_identity(const Bytes& did) const;

 private:
  struct Pending {
    Identity id;
    Identity sid;
    Digest x_prime;
    Digest ru;
    Timestamp t1;
    Timestamp t2;
  };
  using PendingKey = std::tuple<Identity, Identity, Timestamp>;

  Bytes seal_pseudo_identity(Identity id, const Digest& nonce);
  void expire(Timestamp now);

  MasterKey xc_;
  Rng& rng_;
  std::uint32_t max_delay_;
  std::map<Identity, Ciphertext> verifiers_;
  std::map<Identity, Digest> users_;  // identity -> current pseudo-identity nonce
  std::map<PendingKey, Pending> pending_;
};

struct SmartCard {
  bio::TransformParameter tp;
  BitString helper_offset;  // H_u
  Digest r;                 // h(Rc_u)
  Digest p;                 // h(r_u)
  Digest y;                 // X_u xor A_u
  Bytes pid;                // pseudo-identity masked by A_u
  Digest e;                 // N_1 xor r_u
  bio::CodecParams codec;

  // Versioned, length-prefixed; field order TP, H_u, R, P, Y_u, PID_u, E_u,
  // codec params.
  Bytes serialize() const;
  static Result<SmartCard> deserialize(ByteView bytes);

  friend bool operator==(const SmartCard&, const SmartCard&) = default;
};

struct Enrollment {
  Identity id;
  std::string password;
  bio::BiometricSample biometric;
  bio::TransformParameter tp;
  Digest n1;
  Digest rc;
};

Result<SmartCard> register_user(RegistrationCenter& rc, const Enrollment& e, const bio::CodecParams& codec);

struct UserSession {
  Identity id;
  Identity sid;
  Digest x_u;
  Digest ru;
  Digest a;  // A'_u, needed to re-mask the rotated pseudo-identity
  Timestamp t1;
};

struct LoginOutput {
  MsgM1 m1;
  UserSession session;
};

Result<LoginOutput> user_login_m1(const SmartCard& card, const Credentials& creds, Identity sid, const Digest& ru,
                                  Timestamp t1);

struct ServerAccept {
  MsgM3 m3;
  Digest session_key;
  Identity user;
};

class Server {
 public:
  Server(ServerState state, std::uint32_t max_delay) : state_(state), max_delay_(max_delay) {}

  Identity sid() const { return state_.sid; }
  Result<ServerAccept> process_m2(const MsgM2& m2, const Digest& rs, Timestamp t3, Timestamp tu,
                                  Timestamp now) const;

 private:
  ServerState state_;
  std::uint32_t max_delay_;
};

// On success the card's pseudo-identity is replaced by the rotated one. On
// any rejection the card is left untouched.
Result<Digest> user_process_m4(const UserSession& session, SmartCard& card, const MsgM4& m4, Timestamp now,
                               std::uint32_t max_delay);

Result<SmartCard> change_password(const SmartCard& card, const Credentials& creds, const std::string& new_password);
Result<SmartCard> update_biometric(const SmartCard& card, const Credentials& creds,
                                   const bio::TransformParameter& new_tp);

struct Revocation {
  Credentials creds;
  bio::TransformParameter tp;
  Digest n1;  // fresh N'_1
  Digest rc;  // fresh committed secret
};
Result<SmartCard> revoke_card(RegistrationCenter& rc, const Revocation& req, const bio::CodecParams& codec);

}  // namespace fcauth::improved
