#include "fcauth/primitives.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <limits>
#include <memory>

namespace fcauth {

std::string_view reason_name(Reason r) {
  switch (r) {
    case Reason::kBiometricMismatch: return "biometric-reject";
    case Reason::kPasswordMismatch: return "password-reject";
    case Reason::kUnknownServer: return "unknown-server";
    case Reason::kUnknownIdentity: return "unknown-identity";
    case Reason::kDuplicateIdentity: return "duplicate-identity";
    case Reason::kInvalidIdentity: return "invalid-identity";
    case Reason::kStaleTimestamp: return "stale-timestamp";
    case Reason::kHashMismatch: return "hash-mismatch";
    case Reason::kDecryptFailed: return "decrypt-auth-failure";
    case Reason::kResyncRequired: return "resync-required";
    case Reason::kNoPendingSession: return "no-pending-session";
    case Reason::kNoSession: return "no-session";
    case Reason::kMalformedMessage: return "malformed-message";
  }
  return "unknown";
}

std::string Rejection::to_string() const {
  std::string s(reason_name(reason));
  if (!detail.empty()) s += ": " + detail;
  return s;
}

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw UsageError("odd-length hex string");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw UsageError("invalid hex digit");
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

// ---- BitString ---------------------------------------------------------------

BitString::BitString(std::size_t nbits) : bytes_((nbits + 7) / 8, 0), nbits_(nbits) {}

BitString::BitString(Bytes bytes, std::size_t nbits) : bytes_(std::move(bytes)), nbits_(nbits) {
  if (bytes_.size() != (nbits + 7) / 8) throw UsageError("BitString: byte count does not match bit length");
  mask_tail();
}

BitString BitString::from_bytes(ByteView bytes) { return BitString(Bytes(bytes.begin(), bytes.end()), bytes.size() * 8); }

BitString BitString::from_binary(std::string_view bits) {
  BitString out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      out.set(i, true);
    } else if (bits[i] != '0') {
      throw UsageError("BitString::from_binary: expected only '0' and '1'");
    }
  }
  return out;
}

bool BitString::get(std::size_t i) const {
  if (i >= nbits_) throw UsageError("BitString::get out of range");
  return (bytes_[i / 8] >> (7 - i % 8)) & 1u;
}

void BitString::set(std::size_t i, bool v) {
  if (i >= nbits_) throw UsageError("BitString::set out of range");
  const auto m = static_cast<std::uint8_t>(1u << (7 - i % 8));
  if (v) {
    bytes_[i / 8] |= m;
  } else {
    bytes_[i / 8] &= static_cast<std::uint8_t>(~m);
  }
}

void BitString::flip(std::size_t i) { set(i, !get(i)); }

std::string BitString::to_binary() const {
  std::string s(nbits_, '0');
  for (std::size_t i = 0; i < nbits_; ++i) {
    if (get(i)) s[i] = '1';
  }
  return s;
}

std::size_t BitString::popcount() const {
  std::size_t n = 0;
  for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
  return n;
}

BitString BitString::slice(std::size_t offset, std::size_t len) const {
  if (offset + len > nbits_) throw UsageError("BitString::slice out of range");
  BitString out(len);
  for (std::size_t i = 0; i < len; ++i) out.set(i, get(offset + i));
  return out;
}

BitString& BitString::operator^=(const BitString& other) {
  if (other.nbits_ != nbits_) {
    throw UsageError("xor: length mismatch (" + std::to_string(nbits_) + " vs " + std::to_string(other.nbits_) + " bits)");
  }
  for (std::size_t i = 0; i < bytes_.size(); ++i) bytes_[i] ^= other.bytes_[i];
  return *this;
}

void BitString::mask_tail() {
  if (nbits_ % 8 != 0 && !bytes_.empty()) {
    bytes_.back() &= static_cast<std::uint8_t>(0xffu << (8 - nbits_ % 8));
  }
}

BitString xor_bits(const BitString& a, const BitString& b) {
  BitString out = a;
  out ^= b;
  return out;
}

std::size_t hamming_distance(const BitString& a, const BitString& b) { return xor_bits(a, b).popcount(); }

// ---- Digest / Identity / Timestamp ------------------------------------------

Digest Digest::from_bytes(ByteView bytes) {
  if (bytes.size() != kBytes) throw UsageError("Digest: expected 20 bytes, got " + std::to_string(bytes.size()));
  std::array<std::uint8_t, kBytes> b{};
  std::copy(bytes.begin(), bytes.end(), b.begin());
  return Digest(b);
}

Digest Digest::from_bits(const BitString& bits) {
  if (bits.size() != kBits) throw UsageError("Digest: expected 160 bits, got " + std::to_string(bits.size()));
  return from_bytes(bits.bytes());
}

BitString Digest::bits() const { return BitString::from_bytes(b_); }

bool Digest::is_zero() const {
  return std::all_of(b_.begin(), b_.end(), [](auto x) { return x == 0; });
}

Digest& Digest::operator^=(const Digest& o) {
  for (std::size_t i = 0; i < kBytes; ++i) b_[i] ^= o.b_[i];
  return *this;
}

namespace {
Bytes be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
          static_cast<std::uint8_t>(v)};
}
}  // namespace

Bytes Identity::encode() const { return be32(value); }

Digest Identity::widen() const {
  std::array<std::uint8_t, Digest::kBytes> b{};
  const auto e = encode();
  std::copy(e.begin(), e.end(), b.end() - 4);
  return Digest(b);
}

Result<Identity> Identity::narrow(const Digest& block) {
  const auto& b = block.bytes();
  if (!std::all_of(b.begin(), b.end() - 4, [](auto x) { return x == 0; })) {
    return reject(Reason::kMalformedMessage, "identity block has high bits set");
  }
  const std::uint32_t v = std::uint32_t{b[16]} << 24 | std::uint32_t{b[17]} << 16 | std::uint32_t{b[18]} << 8 | b[19];
  return Identity{v};
}

Bytes Timestamp::encode() const { return be32(ticks); }

bool check_delay(Timestamp sent, Timestamp received, std::uint32_t max_delay) {
  return received.ticks >= sent.ticks && received.ticks - sent.ticks <= max_delay;
}

// ---- Rng -------------------------------------------------------------------

std::uint64_t Rng::uniform(std::uint64_t bound) {
  if (bound == 0) throw UsageError("Rng::uniform: zero bound");
  // Rejection sampling keeps the mapping independent of library distributions.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double Rng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

Bytes Rng::bytes(std::size_t n) {
  Bytes out(n);
  std::size_t i = 0;
  while (i < n) {
    auto w = engine_();
    for (int k = 0; k < 8 && i < n; ++k, ++i) {
      out[i] = static_cast<std::uint8_t>(w & 0xff);
      w >>= 8;
    }
  }
  return out;
}

Digest Rng::digest() { return Digest::from_bytes(bytes(Digest::kBytes)); }

BitString Rng::bits(std::size_t n) { return BitString(bytes((n + 7) / 8), n); }

Identity Rng::identity() {
  std::uint32_t v = 0;
  while (v == 0) v = next_u32();
  return Identity{v};
}

// ---- keys and authenticated encryption --------------------------------------

MasterKey MasterKey::generate(Rng& rng, KeyRole role) {
  MasterKey k;
  const auto b = rng.bytes(kBytes);
  std::copy(b.begin(), b.end(), k.bits.begin());
  k.role = role;
  return k;
}

MasterKey MasterKey::from_digest(const Digest& d, KeyRole role) {
  MasterKey k;
  std::copy(d.bytes().begin(), d.bytes().end(), k.bits.begin());
  k.role = role;
  return k;
}

namespace {

constexpr std::size_t kNonceBytes = 12;
constexpr std::size_t kTagBytes = 16;

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

CipherCtx new_ctx() {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
  return ctx;
}

void bump(std::uint64_t PrimitiveCounters::*field) {
  if (auto* c = detail::active_counters()) ++(c->*field);
}

}  // namespace

Ciphertext encrypt(const MasterKey& key, ByteView plaintext, Rng& rng) {
  bump(&PrimitiveCounters::enc);
  const Bytes nonce = rng.bytes(kNonceBytes);
  Bytes out(kNonceBytes + plaintext.size() + kTagBytes);
  std::copy(nonce.begin(), nonce.end(), out.begin());

  auto ctx = new_ctx();
  int len = 0;
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.bits.data(), nonce.data()) != 1 ||
      EVP_EncryptUpdate(ctx.get(), out.data() + kNonceBytes, &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1 ||
      EVP_EncryptFinal_ex(ctx.get(), out.data() + kNonceBytes + len, &len) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kTagBytes,
                          out.data() + kNonceBytes + plaintext.size()) != 1) {
    throw std::runtime_error("AES-GCM encryption failed");
  }
  return Ciphertext{std::move(out), 256};
}

Result<Bytes> decrypt(const MasterKey& key, const Ciphertext& ct) {
  bump(&PrimitiveCounters::dec);
  if (ct.bytes.size() < kNonceBytes + kTagBytes) return reject(Reason::kDecryptFailed, "ciphertext too short");
  const std::size_t body = ct.bytes.size() - kNonceBytes - kTagBytes;
  Bytes out(body);
  Bytes tag(ct.bytes.end() - kTagBytes, ct.bytes.end());

  auto ctx = new_ctx();
  int len = 0;
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.bits.data(), ct.bytes.data()) != 1 ||
      EVP_DecryptUpdate(ctx.get(), out.data(), &len, ct.bytes.data() + kNonceBytes, static_cast<int>(body)) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kTagBytes, tag.data()) != 1) {
    return reject(Reason::kDecryptFailed, "cipher setup failed");
  }
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &len) != 1) {
    return reject(Reason::kDecryptFailed, "authentication tag mismatch");
  }
  return out;
}

// ---- hashing ----------------------------------------------------------------

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

Digest sha1(std::span<const Bytes> chunks) {
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1) throw std::runtime_error("SHA-1 init failed");
  for (const auto& c : chunks) {
    if (EVP_DigestUpdate(ctx.get(), c.data(), c.size()) != 1) throw std::runtime_error("SHA-1 update failed");
  }
  std::array<std::uint8_t, Digest::kBytes> out{};
  unsigned int n = 0;
  if (EVP_DigestFinal_ex(ctx.get(), out.data(), &n) != 1 || n != Digest::kBytes) {
    throw std::runtime_error("SHA-1 final failed");
  }
  return Digest(out);
}

}  // namespace

Digest hash(const BitString& data) {
  bump(&PrimitiveCounters::hash);
  const Bytes parts[] = {be32(static_cast<std::uint32_t>(data.size())), data.bytes()};
  return sha1(parts);
}

Digest hash_fields(std::span<const Bytes> fields) {
  bump(&PrimitiveCounters::hash);
  std::vector<Bytes> framed;
  framed.reserve(fields.size() * 2);
  for (const auto& f : fields) {
    framed.push_back(be32(static_cast<std::uint32_t>(f.size())));
    framed.push_back(f);
  }
  return sha1(framed);
}

Bytes xor_pad(ByteView data, const Digest& mask) {
  Bytes out(data.begin(), data.end());
  const Bytes label = {'p', 'a', 'd'};
  const Bytes seed = encode_field(mask);
  for (std::uint32_t block = 0; block * Digest::kBytes < out.size(); ++block) {
    const Bytes in[] = {label, seed, be32(block)};
    const Digest ks = sha1(in);
    for (std::size_t j = 0; j < Digest::kBytes && block * Digest::kBytes + j < out.size(); ++j) {
      out[block * Digest::kBytes + j] ^= ks.bytes()[j];
    }
  }
  return out;
}

// ---- counters -----------------------------------------------------------------

PrimitiveCounters& PrimitiveCounters::operator+=(const PrimitiveCounters& o) {
  hash += o.hash;
  enc += o.enc;
  dec += o.dec;
  fcs += o.fcs;
  return *this;
}

namespace {
thread_local PrimitiveCounters* g_active = nullptr;
}

CounterScope::CounterScope(PrimitiveCounters& sink) : previous_(g_active) { g_active = &sink; }
CounterScope::~CounterScope() { g_active = previous_; }

PrimitiveCounters* detail::active_counters() { return g_active; }

}  // namespace fcauth
