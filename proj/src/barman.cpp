#include "fcauth/barman.hpp"

namespace fcauth::barman {

namespace {

void require_160(const bio::CodecParams& codec) {
  codec.validate();
  if (codec.secret_bits != Digest::kBits) throw UsageError("protocol cards require bio.secret_bits = 160");
}

struct Unlocked {
  BitString rc;
  Digest r_user;
  Digest rpw;
  bio::CancelableTemplate ct;  // reference template recovered from H_u
};

// Login steps 2-3: fuzzy open then the password check against P.
Result<Unlocked> verify_holder(const SmartCard& card, const Credentials& creds) {
  const bio::RepetitionCodec codec(card.codec);
  const bio::HelperData helper{card.helper_offset, card.r};
  const auto query = bio::transform(creds.biometric, card.tp);
  if (query.bits.size() != helper.offset.size()) return reject(Reason::kBiometricMismatch, "sample length mismatch");
  auto rc = bio::open(helper, query, codec);
  if (!rc) return rc.error();
  const Digest r_user = h(Digest::from_bits(*rc), creds.id, creds.password);
  if (h(r_user) != card.p) return reject(Reason::kPasswordMismatch, "h(r'_u) != P");
  auto ct = bio::enrolled_template(helper, *rc, codec);
  const Digest rpw = h(creds.password, ct.bits);
  return Unlocked{std::move(*rc), r_user, rpw, std::move(ct)};
}

}  // namespace

// ---- registration centre ------------------------------------------------------

Result<ServerState> RegistrationCenter::register_server(Identity sid) {
  if (!sid.valid()) return reject(Reason::kInvalidIdentity, "server identity 0");
  if (table_.contains(sid)) return reject(Reason::kDuplicateIdentity, "server already registered");
  const Digest psk = h(sid, xc_);
  table_.emplace(sid, psk);
  return ServerState{sid, psk};
}

Result<Identity> RegistrationCenter::provision_future_server(Identity sid) {
  auto s = register_server(sid);
  if (!s) return s.error();
  return sid;
}

std::vector<RegistrationCenter::CardEntryIssue> RegistrationCenter::card_entries(Identity id,
                                                                                 const Digest& masked_rpw) const {
  std::vector<CardEntryIssue> out;
  out.reserve(table_.size());
  for (const auto& [sid, psk] : table_) {
    const Digest us = h(id, psk);
    const Digest sv = h(sid, psk);
    out.push_back(CardEntryIssue{sid, us ^ masked_rpw, sv ^ masked_rpw});
  }
  return out;
}

Result<std::vector<RegistrationCenter::CardEntryIssue>> RegistrationCenter::issue_card(Identity id,
                                                                                       const Digest& masked_rpw) {
  if (!id.valid()) return reject(Reason::kInvalidIdentity, "user identity 0");
  if (users_.contains(id)) return reject(Reason::kDuplicateIdentity, "user already registered");
  users_.insert(id);
  return card_entries(id, masked_rpw);
}

Result<std::vector<RegistrationCenter::CardEntryIssue>> RegistrationCenter::reissue_card(Identity id,
                                                                                         const Digest& masked_rpw) {
  if (!users_.contains(id)) return reject(Reason::kUnknownIdentity, "no such user");
  return card_entries(id, masked_rpw);
}

// ---- smart card ------------------------------------------------------------------

const CardEntry* SmartCard::find(Identity sid) const {
  for (const auto& e : entries) {
    if (e.sid == sid) return &e;
  }
  return nullptr;
}

Bytes SmartCard::serialize() const {
  Bytes out{1};  // format version
  out.push_back(static_cast<std::uint8_t>(entries.size() >> 8));
  out.push_back(static_cast<std::uint8_t>(entries.size()));
  for (const auto& e : entries) {
    wire::append(out, e.sid.encode());
    wire::append(out, e.am.view());
    wire::append(out, e.bm.view());
  }
  wire::append(out, tp.seed);
  wire::append(out, Timestamp{static_cast<std::uint32_t>(helper_offset.size())}.encode());
  wire::append(out, helper_offset.bytes());
  wire::append(out, r.view());
  wire::append(out, p.view());
  wire::append(out, Timestamp{codec.repetition}.encode());
  wire::append(out, Timestamp{codec.secret_bits}.encode());
  return out;
}

Result<SmartCard> register_user(RegistrationCenter& rc, const Enrollment& e, const bio::CodecParams& codec_params) {
  require_160(codec_params);
  const bio::RepetitionCodec codec(codec_params);
  const auto ct = bio::transform(e.biometric, e.tp);
  if (ct.bits.size() != codec_params.codeword_bits()) {
    throw UsageError("biometric sample must be " + std::to_string(codec_params.codeword_bits()) + " bits");
  }
  const Digest rpw = h(e.password, ct.bits);
  const Digest r_user = h(e.rc, e.id, e.password);

  auto issued = rc.issue_card(e.id, rpw ^ e.k);
  if (!issued) return issued.error();

  const auto helper = bio::commit(ct, e.rc.bits(), codec);
  SmartCard card;
  card.tp = e.tp;
  card.helper_offset = helper.offset;
  card.r = helper.check;
  card.p = h(r_user);
  card.codec = codec_params;
  for (const auto& entry : *issued) {
    card.entries.push_back(CardEntry{entry.sid, entry.am ^ e.k ^ r_user, entry.bm ^ e.k ^ r_user});
  }
  return card;
}

Result<ServerSecrets> unlock(const SmartCard& card, const Credentials& creds, Identity sid) {
  auto u = verify_holder(card, creds);
  if (!u) return u.error();
  const CardEntry* entry = card.find(sid);
  if (entry == nullptr) return reject(Reason::kUnknownServer, "server not on card");
  return ServerSecrets{entry->am ^ u->rpw ^ u->r_user, entry->bm ^ u->rpw ^ u->r_user, u->r_user, u->rpw, u->rc};
}

// ---- messages --------------------------------------------------------------------

wire::Message LoginRequest::to_wire() const {
  return wire::Message{"login",
                       {wire::digest_field("M2", m2), wire::digest_field("M3", m3), wire::digest_field("M4", m4),
                        wire::timestamp_field("T1", t1), wire::identity_field("SID", sid)}};
}

Result<LoginRequest> LoginRequest::from_wire(const wire::Message& m) {
  if (m.label != "login") return reject(Reason::kMalformedMessage, "expected login request");
  auto m2 = wire::read_digest(m, "M2");
  auto m3 = wire::read_digest(m, "M3");
  auto m4 = wire::read_digest(m, "M4");
  auto t1 = wire::read_timestamp(m, "T1");
  auto sid = wire::read_identity(m, "SID");
  if (!m2 || !m3 || !m4 || !t1 || !sid) return reject(Reason::kMalformedMessage, "login request fields");
  return LoginRequest{*m2, *m3, *m4, *t1, *sid};
}

wire::Message ServerReply::to_wire() const {
  return wire::Message{"reply",
                       {wire::digest_field("M9", m9), wire::digest_field("M10", m10), wire::timestamp_field("T3", t3)}};
}

Result<ServerReply> ServerReply::from_wire(const wire::Message& m) {
  if (m.label != "reply") return reject(Reason::kMalformedMessage, "expected server reply");
  auto m9 = wire::read_digest(m, "M9");
  auto m10 = wire::read_digest(m, "M10");
  auto t3 = wire::read_timestamp(m, "T3");
  if (!m9 || !m10 || !t3) return reject(Reason::kMalformedMessage, "server reply fields");
  return ServerReply{*m9, *m10, *t3};
}

// ---- login and key agreement --------------------------------------------------------

Result<LoginOutput> login(const SmartCard& card, const Credentials& creds, Identity sid, const Digest& ru,
                          Timestamp t1) {
  auto s = unlock(card, creds, sid);
  if (!s) return s.error();
  const Digest m1 = h(creds.id, s->us);
  const Digest m2 = creds.id.widen() ^ h(s->sv, t1);
  const Digest m3 = m1 ^ ru;
  const Digest m4 = h(creds.id, m1, m2, t1, ru);
  return LoginOutput{LoginRequest{m2, m3, m4, t1, sid}, UserSession{creds.id, sid, s->us, s->sv, ru, t1}};
}

Result<ServerAccept> Server::authenticate(const LoginRequest& req, const Digest& rs, Timestamp t3,
                                          Timestamp now) const {
  if (!check_delay(req.t1, now, max_delay_)) return reject(Reason::kStaleTimestamp, "T1 outside delay window");
  if (req.sid != state_.sid) return reject(Reason::kUnknownServer, "request addressed to another server");
  const Digest& psk = state_.psk;
  const Digest sv = h(state_.sid, psk);
  auto m5 = Identity::narrow(req.m2 ^ h(sv, req.t1));
  if (!m5) return reject(Reason::kHashMismatch, "M8 != M4 (M5 is not an identity)");
  const Digest us = h(*m5, psk);
  const Digest m6 = h(*m5, us);
  const Digest m7 = req.m3 ^ m6;
  const Digest m8 = h(*m5, m6, req.m2, req.t1, m7);
  if (m8 != req.m4) return reject(Reason::kHashMismatch, "M8 != M4");

  const Digest m9 = h(us, m7) ^ rs;
  const Digest sk = h(*m5, sv, m7, rs, req.t1, t3);
  const Digest m10 = h(us, sk, t3, rs);
  return ServerAccept{ServerReply{m9, m10, t3}, sk, *m5};
}

Result<Digest> user_confirm(const UserSession& session, const ServerReply& reply, Timestamp now,
                            std::uint32_t max_delay) {
  if (!check_delay(reply.t3, now, max_delay)) return reject(Reason::kStaleTimestamp, "T3 outside delay window");
  const Digest rs = reply.m9 ^ h(session.us, session.ru);
  const Digest sk = h(session.id, session.sv, session.ru, rs, session.t1, reply.t3);
  const Digest m11 = h(session.us, sk, reply.t3, rs);
  if (m11 != reply.m10) return reject(Reason::kHashMismatch, "M11 != M10");
  return sk;
}

// ---- maintenance ---------------------------------------------------------------------

Result<SmartCard> update_password(const SmartCard& card, const Credentials& creds, const std::string& new_password) {
  auto u = verify_holder(card, creds);
  if (!u) return u.error();
  const Digest r_new = h(Digest::from_bits(u->rc), creds.id, new_password);
  const Digest rpw_new = h(new_password, u->ct.bits);
  const Digest delta = u->r_user ^ r_new ^ u->rpw ^ rpw_new;
  SmartCard out = card;
  for (auto& e : out.entries) {
    e.am ^= delta;
    e.bm ^= delta;
  }
  out.p = h(r_new);
  return out;
}

Result<SmartCard> update_biometric(const SmartCard& card, const Credentials& creds,
                                   const bio::TransformParameter& new_tp) {
  auto u = verify_holder(card, creds);
  if (!u) return u.error();
  const bio::RepetitionCodec codec(card.codec);
  const auto ct_new = bio::transform(creds.biometric, new_tp);
  const Digest rpw_new = h(creds.password, ct_new.bits);
  const Digest delta = u->rpw ^ rpw_new;
  SmartCard out = card;
  for (auto& e : out.entries) {
    e.am ^= delta;
    e.bm ^= delta;
  }
  const auto helper = bio::commit(ct_new, u->rc, codec);
  out.helper_offset = helper.offset;
  out.r = helper.check;
  out.tp = new_tp;
  return out;
}

Result<SmartCard> revoke_card(RegistrationCenter& rc, const Revocation& req, const bio::CodecParams& codec_params) {
  require_160(codec_params);
  const bio::RepetitionCodec codec(codec_params);
  const auto ct = bio::transform(req.creds.biometric, req.tp);
  if (ct.bits.size() != codec_params.codeword_bits()) throw UsageError("biometric sample has wrong length");
  const Digest rpw = h(req.creds.password, ct.bits);
  auto issued = rc.reissue_card(req.creds.id, rpw ^ req.new_k);
  if (!issued) return issued.error();

  const Digest r_user = h(req.new_rc, req.creds.id, req.creds.password);
  const auto helper = bio::commit(ct, req.new_rc.bits(), codec);
  SmartCard card;
  card.tp = req.tp;
  card.helper_offset = helper.offset;
  card.r = helper.check;
  card.p = h(r_user);
  card.codec = codec_params;
  for (const auto& entry : *issued) {
    card.entries.push_back(CardEntry{entry.sid, entry.am ^ req.new_k ^ r_user, entry.bm ^ req.new_k ^ r_user});
  }
  return card;
}

}  // namespace fcauth::barman
