#pragma once

// Generic wire representation shared by every protocol message: an ordered
// list of named fields. Each field carries the size the cost tables charge
// for it, which is deliberately independent of its actual byte length.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fcauth/primitives.hpp"

namespace fcauth::wire {

struct Field {
  std::string name;
  Bytes bytes;
  std::uint32_t declared_bits = 0;

  friend bool operator==(const Field&, const Field&) = default;
};

inline constexpr std::uint32_t kDigestBits = 160;
inline constexpr std::uint32_t kCipherBits = 256;
inline constexpr std::uint32_t kTimestampBits = 32;
inline constexpr std::uint32_t kIdentityBits = 32;

struct Message {
  std::string label;
  std::vector<Field> fields;

  const Field* find(std::string_view name) const;
  Field* find(std::string_view name);
  std::uint32_t declared_bits() const;

  // label and fields, length-prefixed; declared sizes are not transmitted.
  Bytes encode() const;
  static Result<Message> decode(ByteView bytes);

  friend bool operator==(const Message&, const Message&) = default;
};

Field digest_field(std::string name, const Digest& d);
Field identity_field(std::string name, Identity id);
Field timestamp_field(std::string name, Timestamp t);
Field bytes_field(std::string name, Bytes b, std::uint32_t declared_bits);

// Field readers reject with kMalformedMessage on a missing or mis-sized field.
Result<Digest> read_digest(const Message& m, std::string_view name);
Result<Identity> read_identity(const Message& m, std::string_view name);
Result<Timestamp> read_timestamp(const Message& m, std::string_view name);
Result<Bytes> read_bytes(const Message& m, std::string_view name);

// Sequential reader for fixed-layout plaintexts inside ciphertexts.
class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}
  std::optional<Digest> digest();
  std::optional<Identity> identity();
  std::optional<Timestamp> timestamp();
  std::optional<Bytes> take(std::size_t n);
  bool done() const { return pos_ == data_.size(); }

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

void append(Bytes& out, ByteView b);

}  // namespace fcauth::wire
