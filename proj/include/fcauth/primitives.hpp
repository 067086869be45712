#pragma once

// Deterministic building blocks shared by both authentication schemes:
// a 160-bit digest, XOR algebra over bit strings, authenticated symmetric
// encryption, simulated timestamps and a seedable random source.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcauth/result.hpp"

namespace fcauth {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

// Bit string of arbitrary length, packed MSB-first. Unused trailing bits of
// the last byte are always zero so byte-wise comparison is bit-wise equality.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t nbits);
  BitString(Bytes bytes, std::size_t nbits);
  static BitString from_bytes(ByteView bytes);
  // Parses a string of '0'/'1' characters.
  static BitString from_binary(std::string_view bits);

  std::size_t size() const { return nbits_; }
  bool empty() const { return nbits_ == 0; }
  bool get(std::size_t i) const;
  void set(std::size_t i, bool v);
  void flip(std::size_t i);

  const Bytes& bytes() const { return bytes_; }
  std::string to_binary() const;
  std::size_t popcount() const;
  BitString slice(std::size_t offset, std::size_t len) const;

  BitString& operator^=(const BitString& other);
  friend bool operator==(const BitString&, const BitString&) = default;

 private:
  void mask_tail();

  Bytes bytes_;
  std::size_t nbits_ = 0;
};

// Throws UsageError unless a.size() == b.size().
BitString xor_bits(const BitString& a, const BitString& b);
inline BitString operator^(const BitString& a, const BitString& b) { return xor_bits(a, b); }
std::size_t hamming_distance(const BitString& a, const BitString& b);

// 160-bit value. Used both for h(.) outputs and for every other fixed
// 160-bit protocol quantity (nonces, masked identities, XOR results).
class Digest {
 public:
  static constexpr std::size_t kBytes = 20;
  static constexpr std::size_t kBits = kBytes * 8;

  Digest() = default;
  explicit Digest(const std::array<std::uint8_t, kBytes>& b) : b_(b) {}
  static Digest from_bytes(ByteView bytes);  // exactly 20 bytes
  static Digest from_bits(const BitString& bits);  // exactly 160 bits

  const std::array<std::uint8_t, kBytes>& bytes() const { return b_; }
  ByteView view() const { return b_; }
  BitString bits() const;
  std::string hex() const { return to_hex(b_); }
  bool is_zero() const;

  Digest& operator^=(const Digest& o);
  friend Digest operator^(Digest a, const Digest& b) { return a ^= b; }
  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;

 private:
  std::array<std::uint8_t, kBytes> b_{};
};

// 32-bit user or server identity. Zero is reserved as "no identity".
struct Identity {
  std::uint32_t value = 0;

  bool valid() const { return value != 0; }
  Bytes encode() const;
  // Identity placed in the low 32 bits of a 160-bit block, for protocols that
  // XOR an identity against a digest.
  Digest widen() const;
  // Inverse of widen(); fails when any of the high 128 bits are set.
  static Result<Identity> narrow(const Digest& block);

  friend auto operator<=>(const Identity&, const Identity&) = default;
};

struct Timestamp {
  std::uint32_t ticks = 0;

  Bytes encode() const;
  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

// accept iff 0 <= received - sent <= max_delay.
bool check_delay(Timestamp sent, Timestamp received, std::uint32_t max_delay);

class SimClock {
 public:
  explicit SimClock(std::uint32_t start = 0) : now_{start} {}
  Timestamp now() const { return now_; }
  void advance(std::uint32_t ticks) { now_.ticks += ticks; }
  // Never moves backwards.
  void advance_to(Timestamp t) {
    if (t > now_) now_ = t;
  }

 private:
  Timestamp now_;
};

// Single seedable source of randomness for a whole run. mt19937_64 output is
// fully specified by the standard, so a seed reproduces bit-identical runs
// on every conforming implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  std::uint32_t next_u32() { return static_cast<std::uint32_t>(engine_() >> 32); }
  // Uniform in [0, bound).
  std::uint64_t uniform(std::uint64_t bound);
  double unit();
  Bytes bytes(std::size_t n);
  Digest digest();
  BitString bits(std::size_t n);
  Identity identity();  // never zero

 private:
  std::mt19937_64 engine_;
};

enum class KeyRole { kRcSecret, kServerShared, kServerPsk };

struct MasterKey {
  static constexpr std::size_t kBytes = 32;

  std::array<std::uint8_t, kBytes> bits{};
  KeyRole role = KeyRole::kRcSecret;

  static MasterKey generate(Rng& rng, KeyRole role);
  // Symmetric key whose material is a 160-bit digest, zero-extended to 256
  // bits (server keys are defined as h(SID || X_c)).
  static MasterKey from_digest(const Digest& d, KeyRole role);
};

// Authenticated ciphertext. declared_wire_bits is the size used for
// communication accounting and is independent of bytes.size().
struct Ciphertext {
  Bytes bytes;
  std::uint32_t declared_wire_bits = 256;

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

// AES-256-GCM; nonce drawn from rng and prepended, 16-byte tag appended.
Ciphertext encrypt(const MasterKey& key, ByteView plaintext, Rng& rng);
// Rejects with kDecryptFailed on a wrong key or any modified byte.
Result<Bytes> decrypt(const MasterKey& key, const Ciphertext& ct);
inline constexpr std::size_t kCiphertextOverhead = 12 + 16;

// XOR data against a keystream expanded from a 160-bit value. Lets digest
// sized masks be applied to longer ciphertexts while staying an involution.
Bytes xor_pad(ByteView data, const Digest& mask);

// ---- hashing ---------------------------------------------------------------

inline Bytes encode_field(const Digest& d) { return Bytes(d.bytes().begin(), d.bytes().end()); }
inline Bytes encode_field(const Identity& id) { return id.encode(); }
inline Bytes encode_field(const Timestamp& t) { return t.encode(); }
inline Bytes encode_field(const Bytes& b) { return b; }
inline Bytes encode_field(const BitString& b) { return b.bytes(); }
inline Bytes encode_field(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline Bytes encode_field(const MasterKey& k) { return Bytes(k.bits.begin(), k.bits.end()); }
inline Bytes encode_field(const std::string& s) { return encode_field(std::string_view(s)); }

// Digest of a bit string (its bit length is bound into the input).
Digest hash(const BitString& data);
// h(f1 || f2 || ...): each field is framed with a 4-byte big-endian length
// so the concatenation is unambiguous.
Digest hash_fields(std::span<const Bytes> fields);

template <class... Ts>
Digest h(const Ts&... parts) {
  const Bytes fields[] = {encode_field(parts)...};
  return hash_fields(fields);
}

// ---- instrumentation -------------------------------------------------------

struct PrimitiveCounters {
  std::uint64_t hash = 0;
  std::uint64_t enc = 0;
  std::uint64_t dec = 0;
  std::uint64_t fcs = 0;  // fuzzy-commitment open/commit invocations

  PrimitiveCounters& operator+=(const PrimitiveCounters& o);
  friend bool operator==(const PrimitiveCounters&, const PrimitiveCounters&) = default;
};

// While alive, primitive calls on this thread are tallied into `sink`.
// Scopes nest; the innermost one receives the counts.
class CounterScope {
 public:
  explicit CounterScope(PrimitiveCounters& sink);
  ~CounterScope();
  CounterScope(const CounterScope&) = delete;
  CounterScope& operator=(const CounterScope&) = delete;

 private:
  PrimitiveCounters* previous_;
};

namespace detail {
PrimitiveCounters* active_counters();
}

}  // namespace fcauth
