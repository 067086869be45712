#include "fcauth/improved.hpp"

namespace fcauth::improved {

namespace {

void require_160(const bio::CodecParams& codec) {
  codec.validate();
  if (codec.secret_bits != Digest::kBits) throw UsageError("protocol cards require bio.secret_bits = 160");
}

// A_u = h(N_1 || PW_u || ID_u || CT_u), the same argument order at
// registration and at login.
Digest mask_a(const Digest& n1, const std::string& password, Identity id, const bio::CancelableTemplate& ct) {
  return h(n1, password, id, ct.bits);
}

struct Unlocked {
  BitString rc;
  Digest r_user;
  Digest n1;
  Digest a;
  bio::CancelableTemplate ct;
};

Result<Unlocked> verify_holder(const SmartCard& card, const Credentials& creds) {
  const bio::RepetitionCodec codec(card.codec);
  const bio::HelperData helper{card.helper_offset, card.r};
  const auto query = bio::transform(creds.biometric, card.tp);
  if (query.bits.size() != helper.offset.size()) return reject(Reason::kBiometricMismatch, "sample length mismatch");
  auto rc = bio::open(helper, query, codec);
  if (!rc) return rc.error();
  const Digest r_user = h(Digest::from_bits(*rc), creds.id, creds.password);
  if (h(r_user) != card.p) return reject(Reason::kPasswordMismatch, "h(r'_u) != P");
  const Digest n1 = card.e ^ r_user;
  auto ct = bio::enrolled_template(helper, *rc, codec);
  const Digest a = mask_a(n1, creds.password, creds.id, ct);
  return Unlocked{std::move(*rc), r_user, n1, a, std::move(ct)};
}

// Re-masks Y_u and PID_u when A_u changes; the unmasked X_u and pseudo
// identity stay the same.
void remask(SmartCard& card, const Digest& a_old, const Digest& a_new) {
  card.y ^= a_old ^ a_new;
  card.pid = xor_pad(xor_pad(card.pid, a_old), a_new);
}

Bytes payload_plaintext(const Digest& x_prime, const Digest& ru, Identity id, const Digest& h_rc, Identity sid,
                        Timestamp t1) {
  Bytes out;
  wire::append(out, x_prime.view());
  wire::append(out, ru.view());
  wire::append(out, id.encode());
  wire::append(out, h_rc.view());
  wire::append(out, sid.encode());
  wire::append(out, t1.encode());
  return out;
}

SmartCard finalize_card(const RegistrationCenter::Issued& issued, const Credentials& creds,
                        const bio::TransformParameter& tp, const bio::CancelableTemplate& ct, const Digest& n1,
                        const Digest& secret, const bio::CodecParams& params) {
  const bio::RepetitionCodec codec(params);
  const auto helper = bio::commit(ct, secret.bits(), codec);
  const Digest r_user = h(secret, creds.id, creds.password);
  SmartCard card;
  card.tp = tp;
  card.helper_offset = helper.offset;
  card.r = helper.check;
  card.p = h(r_user);
  card.y = issued.y;
  card.pid = issued.pid;
  card.e = n1 ^ r_user;
  card.codec = params;
  return card;
}

}  // namespace

// ---- messages ------------------------------------------------------------------

wire::Message MsgM1::to_wire() const {
  return wire::Message{"M1",
                       {wire::bytes_field("DID", did, wire::kDigestBits), wire::digest_field("H", h_auth),
                        wire::digest_field("G", g), wire::timestamp_field("T1", t1), wire::identity_field("SID", sid)}};
}

Result<MsgM1> MsgM1::from_wire(const wire::Message& m) {
  if (m.label != "M1") return reject(Reason::kMalformedMessage, "expected M1");
  auto did = wire::read_bytes(m, "DID");
  auto ha = wire::read_digest(m, "H");
  auto g = wire::read_digest(m, "G");
  auto t1 = wire::read_timestamp(m, "T1");
  auto sid = wire::read_identity(m, "SID");
  if (!did || !ha || !g || !t1 || !sid) return reject(Reason::kMalformedMessage, "M1 fields");
  return MsgM1{*did, *ha, *g, *t1, *sid};
}

wire::Message MsgM2::to_wire() const {
  return wire::Message{"M2",
                       {wire::bytes_field("E", payload.bytes, payload.declared_wire_bits),
                        wire::timestamp_field("T2", t2), wire::identity_field("SID", sid)}};
}

Result<MsgM2> MsgM2::from_wire(const wire::Message& m) {
  if (m.label != "M2") return reject(Reason::kMalformedMessage, "expected M2");
  auto e = wire::read_bytes(m, "E");
  auto t2 = wire::read_timestamp(m, "T2");
  auto sid = wire::read_identity(m, "SID");
  if (!e || !t2 || !sid) return reject(Reason::kMalformedMessage, "M2 fields");
  return MsgM2{Ciphertext{*e, wire::kCipherBits}, *t2, *sid};
}

wire::Message MsgM3::to_wire() const {
  return wire::Message{"M3",
                       {wire::digest_field("Mx", mx), wire::digest_field("H2", h_server),
                        wire::timestamp_field("T3", t3), wire::timestamp_field("Tu", tu)}};
}

Result<MsgM3> MsgM3::from_wire(const wire::Message& m) {
  if (m.label != "M3") return reject(Reason::kMalformedMessage, "expected M3");
  auto mx = wire::read_digest(m, "Mx");
  auto h2 = wire::read_digest(m, "H2");
  auto t3 = wire::read_timestamp(m, "T3");
  auto tu = wire::read_timestamp(m, "Tu");
  if (!mx || !h2 || !t3 || !tu) return reject(Reason::kMalformedMessage, "M3 fields");
  return MsgM3{*mx, *h2, *t3, *tu};
}

wire::Message MsgM4::to_wire() const {
  return wire::Message{"M4",
                       {wire::digest_field("Mx", mx), wire::digest_field("H2", h_server),
                        wire::timestamp_field("T3", t3), wire::timestamp_field("Tu", tu),
                        wire::bytes_field("RID", rid, wire::kDigestBits)}};
}

Result<MsgM4> MsgM4::from_wire(const wire::Message& m) {
  if (m.label != "M4") return reject(Reason::kMalformedMessage, "expected M4");
  auto mx = wire::read_digest(m, "Mx");
  auto h2 = wire::read_digest(m, "H2");
  auto t3 = wire::read_timestamp(m, "T3");
  auto tu = wire::read_timestamp(m, "Tu");
  auto rid = wire::read_bytes(m, "RID");
  if (!mx || !h2 || !t3 || !tu || !rid) return reject(Reason::kMalformedMessage, "M4 fields");
  return MsgM4{*mx, *h2, *t3, *tu, *rid};
}

// ---- registration centre -------------------------------------------------------

RegistrationCenter::RegistrationCenter(MasterKey xc, Rng& rng, std::uint32_t max_delay)
    : xc_(xc), rng_(rng), max_delay_(max_delay) {}

Result<ServerState> RegistrationCenter::register_server(Identity sid) {
  if (!sid.valid()) return reject(Reason::kInvalidIdentity, "server identity 0");
  if (verifiers_.contains(sid)) return reject(Reason::kDuplicateIdentity, "server already registered");
  const Digest shared = h(sid, xc_);
  verifiers_.emplace(sid, encrypt(xc_, shared.view(), rng_));
  return ServerState{sid, shared};
}

Bytes RegistrationCenter::seal_pseudo_identity(Identity id, const Digest& nonce) {
  Bytes pt = id.encode();
  wire::append(pt, nonce.view());
  return encrypt(xc_, pt, rng_).bytes;
}

Result<PseudoIdentity> RegistrationCenter::open_pseudo_identity(const Bytes& did) const {
  auto pt = decrypt(xc_, Ciphertext{did, wire::kCipherBits});
  if (!pt) return reject(Reason::kResyncRequired, "pseudo-identity does not decrypt under X_c");
  wire::Reader rd(*pt);
  auto id = rd.identity();
  auto nonce = rd.digest();
  if (!id || !nonce || !rd.done()) return reject(Reason::kMalformedMessage, "pseudo-identity plaintext layout");
  return PseudoIdentity{*id, *nonce};
}

std::optional<Digest> RegistrationCenter::current_nonce(Identity id) const {
  auto it = users_.find(id);
  if (it == users_.end()) return std::nullopt;
  return it->second;
}

Result<RegistrationCenter::Issued> RegistrationCenter::enroll_user(Identity id, const Digest& a) {
  if (!id.valid()) return reject(Reason::kInvalidIdentity, "user identity 0");
  if (users_.contains(id)) return reject(Reason::kDuplicateIdentity, "user already registered");
  const Digest x_u = h(id, xc_);
  const Digest ro = rng_.digest();
  users_[id] = ro;
  return Issued{x_u ^ a, xor_pad(seal_pseudo_identity(id, ro), a)};
}

Result<RegistrationCenter::Issued> RegistrationCenter::reissue_user(Identity id, const Digest& a) {
  if (!users_.contains(id)) return reject(Reason::kUnknownIdentity, "no such user");
  const Digest x_u = h(id, xc_);
  const Digest ro = rng_.digest();
  users_[id] = ro;
  return Issued{x_u ^ a, xor_pad(seal_pseudo_identity(id, ro), a)};
}

void RegistrationCenter::expire(Timestamp now) {
  std::erase_if(pending_, [&](const auto& kv) { return !check_delay(kv.second.t2, now, max_delay_); });
}

Result<MsgM2> RegistrationCenter::process_m1(const MsgM1& m1, Timestamp t2, Timestamp now) {
  if (!check_delay(m1.t1, now, max_delay_)) return reject(Reason::kStaleTimestamp, "T1 outside delay window");
  auto pseudo = open_pseudo_identity(m1.did);
  if (!pseudo) return pseudo.error();
  const Identity id = pseudo->id;
  if (!users_.contains(id)) return reject(Reason::kUnknownIdentity, "pseudo-identity names no registered user");

  const Digest x_u = h(id, xc_);
  const Digest ru = m1.g ^ h(x_u, id, m1.sid, m1.t1);
  if (h(id, m1.g, x_u, ru, m1.t1, m1.sid) != m1.h_auth) return reject(Reason::kHashMismatch, "H'_u != H_u");

  auto verifier = verifiers_.find(m1.sid);
  if (verifier == verifiers_.end()) return reject(Reason::kUnknownServer, "no verifier for SID_k");
  auto shared_bytes = decrypt(xc_, verifier->second);
  if (!shared_bytes) return reject(Reason::kDecryptFailed, "verifier table entry");
  const MasterKey shared = MasterKey::from_digest(Digest::from_bytes(*shared_bytes), KeyRole::kServerShared);
  const Digest shared_digest = Digest::from_bytes(*shared_bytes);

  const Digest x_prime = h(x_u, id, m1.sid, m1.t1);
  const Digest h_rc = h(shared_digest, x_prime, id, m1.sid, t2);
  Ciphertext payload = encrypt(shared, payload_plaintext(x_prime, ru, id, h_rc, m1.sid, m1.t1), rng_);

  expire(now);
  pending_[{id, m1.sid, m1.t1}] = Pending{id, m1.sid, x_prime, ru, m1.t1, t2};
  return MsgM2{std::move(payload), t2, m1.sid};
}

Result<RegistrationCenter::Forward> RegistrationCenter::process_m3(Identity from, const MsgM3& m3, const Digest& rn, Timestamp now) {
  if (!check_delay(m3.t3, now, max_delay_)) return reject(Reason::kStaleTimestamp, "T3 outside delay window");
  expire(now);
  // M3 carries no session identifier: try every live session with this server.
  bool any = false;
  for (auto it = pending_.begin(); it != pending_.end(); ++it) {
    const Pending& p = it->second;
    if (p.sid != from) continue;
    any = true;
    const Digest rs = m3.mx ^ h(p.id, p.x_prime, p.ru, m3.t3);
    if (h(rs, m3.mx, m3.tu, p.id, m3.t3) != m3.h_server) continue;

    users_[p.id] = rn;
    Bytes rid = xor_pad(seal_pseudo_identity(p.id, rn), rs);
    pending_.erase(it);
    return Forward{p.id, MsgM4{m3.mx, m3.h_server, m3.t3, m3.tu, std::move(rid)}};
  }
  if (!any) return reject(Reason::kNoPendingSession, "no live session with this server");
  return reject(Reason::kHashMismatch, "H'''_Rc != H''_Rc");
}

// ---- server -------------------------------------------------------------------------

Result<ServerAccept> Server::process_m2(const MsgM2& m2, const Digest& rs, Timestamp t3, Timestamp tu,
                                        Timestamp now) const {
  if (!check_delay(m2.t2, now, max_delay_)) return reject(Reason::kStaleTimestamp, "T2 outside delay window");
  if (m2.sid != state_.sid) return reject(Reason::kUnknownServer, "M2 addressed to another server");
  auto pt = decrypt(MasterKey::from_digest(state_.shared, KeyRole::kServerShared), m2.payload);
  if (!pt) return pt.error();
  wire::Reader rd(*pt);
  auto x_prime = rd.digest();
  auto ru = rd.digest();
  auto id = rd.identity();
  auto h_rc = rd.digest();
  auto sid = rd.identity();
  auto t1 = rd.timestamp();
  if (!x_prime || !ru || !id || !h_rc || !sid || !t1 || !rd.done()) {
    return reject(Reason::kMalformedMessage, "M2 payload layout");
  }
  if (*sid != state_.sid) return reject(Reason::kHashMismatch, "payload names another server");
  if (h(state_.shared, *x_prime, *id, state_.sid, m2.t2) != *h_rc) {
    return reject(Reason::kHashMismatch, "H'_Rc != H_Rc");
  }
  const Digest mx = rs ^ h(*id, *x_prime, *ru, t3);
  const Digest h_server = h(rs, mx, tu, *id, t3);
  const Digest sk = h(*x_prime, *id, state_.sid, rs, *ru);
  return ServerAccept{MsgM3{mx, h_server, t3, tu}, sk, *id};
}

// ---- user --------------------------------------------------------------------------

Result<SmartCard> register_user(RegistrationCenter& rc, const Enrollment& e, const bio::CodecParams& codec) {
  require_160(codec);
  const auto ct = bio::transform(e.biometric, e.tp);
  if (ct.bits.size() != codec.codeword_bits()) {
    throw UsageError("biometric sample must be " + std::to_string(codec.codeword_bits()) + " bits");
  }
  auto issued = rc.enroll_user(e.id, mask_a(e.n1, e.password, e.id, ct));
  if (!issued) return issued.error();
  return finalize_card(*issued, Credentials{e.id, e.password, e.biometric}, e.tp, ct, e.n1, e.rc, codec);
}

Result<LoginOutput> user_login_m1(const SmartCard& card, const Credentials& creds, Identity sid, const Digest& ru,
                                  Timestamp t1) {
  auto u = verify_holder(card, creds);
  if (!u) return u.error();
  const Digest x_u = card.y ^ u->a;
  Bytes did = xor_pad(card.pid, u->a);
  const Digest g = ru ^ h(x_u, creds.id, sid, t1);
  const Digest h_auth = h(creds.id, g, x_u, ru, t1, sid);
  return LoginOutput{MsgM1{std::move(did), h_auth, g, t1, sid}, UserSession{creds.id, sid, x_u, ru, u->a, t1}};
}

Result<Digest> user_process_m4(const UserSession& session, SmartCard& card, const MsgM4& m4, Timestamp now,
                               std::uint32_t max_delay) {
  if (!check_delay(m4.t3, now, max_delay)) return reject(Reason::kStaleTimestamp, "T3 outside delay window");
  const Digest x_prime = h(session.x_u, session.id, session.sid, session.t1);
  const Digest rs = m4.mx ^ h(session.id, x_prime, session.ru, m4.t3);
  if (h(rs, m4.mx, m4.tu, session.id, m4.t3) != m4.h_server) {
    return reject(Reason::kHashMismatch, "H''''_Rc != H''_Rc");
  }
  const Digest sk = h(x_prime, session.id, session.sid, rs, session.ru);
  card.pid = xor_pad(xor_pad(m4.rid, rs), session.a);
  return sk;
}

Result<SmartCard> change_password(const SmartCard& card, const Credentials& creds, const std::string& new_password) {
  auto u = verify_holder(card, creds);
  if (!u) return u.error();
  const Digest r_new = h(Digest::from_bits(u->rc), creds.id, new_password);
  SmartCard out = card;
  out.e = u->n1 ^ r_new;
  out.p = h(r_new);
  remask(out, u->a, mask_a(u->n1, new_password, creds.id, u->ct));
  return out;
}

Result<SmartCard> update_biometric(const SmartCard& card, const Credentials& creds,
                                   const bio::TransformParameter& new_tp) {
  auto u = verify_holder(card, creds);
  if (!u) return u.error();
  const bio::RepetitionCodec codec(card.codec);
  const auto ct_new = bio::transform(creds.biometric, new_tp);
  const auto helper = bio::commit(ct_new, u->rc, codec);
  SmartCard out = card;
  out.tp = new_tp;
  out.helper_offset = helper.offset;
  out.r = helper.check;
  remask(out, u->a, mask_a(u->n1, creds.password, creds.id, ct_new));
  return out;
}

Result<SmartCard> revoke_card(RegistrationCenter& rc, const Revocation& req, const bio::CodecParams& codec) {
  require_160(codec);
  const auto ct = bio::transform(req.creds.biometric, req.tp);
  if (ct.bits.size() != codec.codeword_bits()) throw UsageError("biometric sample has wrong length");
  auto issued = rc.reissue_user(req.creds.id, mask_a(req.n1, req.creds.password, req.creds.id, ct));
  if (!issued) return issued.error();
  return finalize_card(*issued, req.creds, req.tp, ct, req.n1, req.rc, codec);
}

// ---- card serialization -------------------------------------------------------------

namespace {
constexpr std::uint8_t kCardVersion = 1;

void put_chunk(Bytes& out, ByteView b) {
  wire::append(out, Timestamp{static_cast<std::uint32_t>(b.size())}.encode());
  wire::append(out, b);
}
}  // namespace

Bytes SmartCard::serialize() const {
  Bytes out{kCardVersion};
  put_chunk(out, tp.seed);
  Bytes helper = Timestamp{static_cast<std::uint32_t>(helper_offset.size())}.encode();
  wire::append(helper, helper_offset.bytes());
  put_chunk(out, helper);
  put_chunk(out, r.view());
  put_chunk(out, p.view());
  put_chunk(out, y.view());
  put_chunk(out, pid);
  put_chunk(out, e.view());
  Bytes params = Timestamp{codec.repetition}.encode();
  wire::append(params, Timestamp{codec.secret_bits}.encode());
  put_chunk(out, params);
  return out;
}

Result<SmartCard> SmartCard::deserialize(ByteView bytes) {
  auto bad = [](const char* what) { return reject(Reason::kMalformedMessage, std::string("card: ") + what); };
  if (bytes.empty() || bytes[0] != kCardVersion) return bad("unsupported version");
  wire::Reader rd(bytes.subspan(1));
  auto chunk = [&rd]() -> std::optional<Bytes> {
    auto len = rd.timestamp();
    if (!len) return std::nullopt;
    return rd.take(len->ticks);
  };
  SmartCard c;
  auto tp = chunk();
  if (!tp || tp->size() != c.tp.seed.size()) return bad("TP");
  std::copy(tp->begin(), tp->end(), c.tp.seed.begin());

  auto helper = chunk();
  if (!helper || helper->size() < 4) return bad("H_u");
  wire::Reader hr(*helper);
  const auto nbits = hr.timestamp()->ticks;
  auto hb = hr.take(helper->size() - 4);
  if (!hb || hb->size() != (nbits + 7) / 8) return bad("H_u length");
  c.helper_offset = BitString(*hb, nbits);

  auto digest_chunk = [&](Digest& out) {
    auto d = chunk();
    if (!d || d->size() != Digest::kBytes) return false;
    out = Digest::from_bytes(*d);
    return true;
  };
  if (!digest_chunk(c.r)) return bad("R");
  if (!digest_chunk(c.p)) return bad("P");
  if (!digest_chunk(c.y)) return bad("Y_u");
  auto pid = chunk();
  if (!pid) return bad("PID_u");
  c.pid = *pid;
  if (!digest_chunk(c.e)) return bad("E_u");
  auto params = chunk();
  if (!params || params->size() != 8) return bad("codec params");
  wire::Reader pr(*params);
  c.codec.repetition = pr.timestamp()->ticks;
  c.codec.secret_bits = pr.timestamp()->ticks;
  if (!rd.done()) return bad("trailing bytes");
  return c;
}

}  // namespace fcauth::improved
