#pragma once

// The original fuzzy-commitment multi-server scheme, kept faithful to the
// published message algebra (including the weaknesses exploited in
// fcauth/attacks.hpp). The only repair is that the login request names the
// target server.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fcauth/biofuzz.hpp"
#include "fcauth/credentials.hpp"
#include "fcauth/primitives.hpp"
#include "fcauth/wire.hpp"

namespace fcauth::barman {

struct ServerState {
  Identity sid;
  Digest psk;  // h(SID || X_c)
};

class RegistrationCenter {
 public:
  explicit RegistrationCenter(MasterKey xc) : xc_(xc) {}

  // Registers an operating server; its PSK travels over the secure channel.
  Result<ServerState> register_server(Identity sid);
  // Pre-provisions identities for servers expected to join later. They get
  // table entries (and card entries) but no running server.
  Result<Identity> provision_future_server(Identity sid);

  struct CardEntryIssue {
    Identity sid;
    Digest am;  // US_k xor (RPW xor k_u)
    Digest bm;  // SV_k xor (RPW xor k_u)
  };
  // Registration / reissue request <ID_u, RPW_u xor k_u>. A reissue replaces
  // the card material of an already registered identity.
  Result<std::vector<CardEntryIssue>> issue_card(Identity id, const Digest& masked_rpw);
  Result<std::vector<CardEntryIssue>> reissue_card(Identity id, const Digest& masked_rpw);

  const std::map<Identity, Digest>& server_table() const { return table_; }
  bool is_registered(Identity id) const { return users_.contains(id); }
  // Test-only view for invariant checks.
  const MasterKey& secret_for_tests() const { return xc_; }

 private:
  std::vector<CardEntryIssue> card_entries(Identity id, const Digest& masked_rpw) const;

  MasterKey xc_;
  std::map<Identity, Digest> table_;
  std::set<Identity> users_;
};

struct CardEntry {
  Identity sid;
  Digest am;  // AM_uk
  Digest bm;  // BM_uk

  friend bool operator==(const CardEntry&, const CardEntry&) = default;
};

struct SmartCard {
  std::vector<CardEntry> entries;
  bio::TransformParameter tp;
  BitString helper_offset;  // H_u
  Digest r;                 // h(Rc_u)
  Digest p;                 // h(r_u)
  bio::CodecParams codec;

  const CardEntry* find(Identity sid) const;
  // Bits of per-server material carried on the card (AM and BM per entry).
  std::size_t server_binding_bits() const { return entries.size() * 2 * Digest::kBits; }
  Bytes serialize() const;
};

using fcauth::Credentials;

// User-chosen material for enrollment.
struct Enrollment {
  Identity id;
  std::string password;
  bio::BiometricSample biometric;
  bio::TransformParameter tp;
  Digest rc;  // Rc_u, the committed secret
  Digest k;   // k_u, blinds RPW towards the RC
};

Result<SmartCard> register_user(RegistrationCenter& rc, const Enrollment& e, const bio::CodecParams& codec);

struct LoginRequest {
  Digest m2;
  Digest m3;
  Digest m4;
  Timestamp t1;
  Identity sid;

  wire::Message to_wire() const;
  static Result<LoginRequest> from_wire(const wire::Message& m);
  friend bool operator==(const LoginRequest&, const LoginRequest&) = default;
};

struct ServerReply {
  Digest m9;
  Digest m10;
  Timestamp t3;

  wire::Message to_wire() const;
  static Result<ServerReply> from_wire(const wire::Message& m);
  friend bool operator==(const ServerReply&, const ServerReply&) = default;
};

// What the card retains between sending the request and receiving the reply.
struct UserSession {
  Identity id;
  Identity sid;
  Digest us;
  Digest sv;
  Digest ru;
  Timestamp t1;
};

// Per-server secrets a card holder can derive locally (login steps 1-4).
struct ServerSecrets {
  Digest us;  // h(ID_u || PSK_k)
  Digest sv;  // h(SID_k || PSK_k)
  Digest r_user;  // r_u
  Digest rpw;     // h(PW_u || CT_u)
  BitString rc;   // recovered Rc_u
};

// Card-side verification of ID/PW/BIO followed by unmasking of the entry
// for `sid`.
Result<ServerSecrets> unlock(const SmartCard& card, const Credentials& creds, Identity sid);

struct LoginOutput {
  LoginRequest request;
  UserSession session;
};

Result<LoginOutput> login(const SmartCard& card, const Credentials& creds, Identity sid, const Digest& ru,
                          Timestamp t1);

struct ServerAccept {
  ServerReply reply;
  Digest session_key;
  Identity user;  // M5 as recovered by the server
};

class Server {
 public:
  Server(ServerState state, std::uint32_t max_delay) : state_(state), max_delay_(max_delay) {}

  Identity sid() const { return state_.sid; }
  Result<ServerAccept> authenticate(const LoginRequest& req, const Digest& rs, Timestamp t3, Timestamp now) const;

 private:
  ServerState state_;
  std::uint32_t max_delay_;
};

Result<Digest> user_confirm(const UserSession& session, const ServerReply& reply, Timestamp now,
                            std::uint32_t max_delay);

Result<SmartCard> update_password(const SmartCard& card, const Credentials& creds, const std::string& new_password);
// The card holder supplies a fresh transform parameter; the query biometric
// becomes the new reference template.
Result<SmartCard> update_biometric(const SmartCard& card, const Credentials& creds,
                                   const bio::TransformParameter& new_tp);

struct Revocation {
  Credentials creds;  // biometric is a fresh capture
  bio::TransformParameter tp;
  Digest new_rc;
  Digest new_k;
};
Result<SmartCard> revoke_card(RegistrationCenter& rc, const Revocation& req, const bio::CodecParams& codec);

}  // namespace fcauth::barman
