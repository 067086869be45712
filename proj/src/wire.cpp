#include "fcauth/wire.hpp"

#include <numeric>

namespace fcauth::wire {

namespace {

void put_u16(Bytes& out, std::size_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::size_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

class Cursor {
 public:
  explicit Cursor(ByteView d) : d_(d) {}
  std::optional<std::size_t> u(int width) {
    if (pos_ + width > d_.size()) return std::nullopt;
    std::size_t v = 0;
    for (int i = 0; i < width; ++i) v = v << 8 | d_[pos_++];
    return v;
  }
  std::optional<Bytes> take(std::size_t n) {
    if (pos_ + n > d_.size()) return std::nullopt;
    Bytes out(d_.begin() + static_cast<std::ptrdiff_t>(pos_), d_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == d_.size(); }

 private:
  ByteView d_;
  std::size_t pos_ = 0;
};

}  // namespace

void append(Bytes& out, ByteView b) { out.insert(out.end(), b.begin(), b.end()); }

const Field* Message::find(std::string_view name) const {
  for (const auto& f : fields) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Field* Message::find(std::string_view name) {
  for (auto& f : fields) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::uint32_t Message::declared_bits() const {
  return std::accumulate(fields.begin(), fields.end(), std::uint32_t{0},
                         [](std::uint32_t acc, const Field& f) { return acc + f.declared_bits; });
}

Bytes Message::encode() const {
  Bytes out;
  put_u16(out, label.size());
  append(out, ByteView(reinterpret_cast<const std::uint8_t*>(label.data()), label.size()));
  out.push_back(static_cast<std::uint8_t>(fields.size()));
  for (const auto& f : fields) {
    put_u16(out, f.name.size());
    append(out, ByteView(reinterpret_cast<const std::uint8_t*>(f.name.data()), f.name.size()));
    put_u32(out, f.bytes.size());
    append(out, f.bytes);
  }
  return out;
}

Result<Message> Message::decode(ByteView bytes) {
  Cursor c(bytes);
  auto bad = [] { return reject(Reason::kMalformedMessage, "truncated or malformed wire encoding"); };
  Message m;
  auto llen = c.u(2);
  if (!llen) return bad();
  auto label = c.take(*llen);
  if (!label) return bad();
  m.label.assign(label->begin(), label->end());
  auto count = c.u(1);
  if (!count) return bad();
  for (std::size_t i = 0; i < *count; ++i) {
    auto nlen = c.u(2);
    if (!nlen) return bad();
    auto name = c.take(*nlen);
    if (!name) return bad();
    auto blen = c.u(4);
    if (!blen) return bad();
    auto body = c.take(*blen);
    if (!body) return bad();
    m.fields.push_back(Field{std::string(name->begin(), name->end()), std::move(*body), 0});
  }
  if (!c.done()) return bad();
  return m;
}

Field digest_field(std::string name, const Digest& d) { return Field{std::move(name), encode_field(d), kDigestBits}; }
Field identity_field(std::string name, Identity id) { return Field{std::move(name), id.encode(), kIdentityBits}; }
Field timestamp_field(std::string name, Timestamp t) { return Field{std::move(name), t.encode(), kTimestampBits}; }
Field bytes_field(std::string name, Bytes b, std::uint32_t declared_bits) {
  return Field{std::move(name), std::move(b), declared_bits};
}

namespace {
Result<const Field*> need(const Message& m, std::string_view name, std::size_t size) {
  const Field* f = m.find(name);
  if (f == nullptr) return reject(Reason::kMalformedMessage, "missing field " + std::string(name));
  if (size != 0 && f->bytes.size() != size) {
    return reject(Reason::kMalformedMessage, "field " + std::string(name) + " has wrong size");
  }
  return f;
}
}  // namespace

Result<Digest> read_digest(const Message& m, std::string_view name) {
  auto f = need(m, name, Digest::kBytes);
  if (!f) return f.error();
  return Digest::from_bytes((*f)->bytes);
}

Result<Identity> read_identity(const Message& m, std::string_view name) {
  auto f = need(m, name, 4);
  if (!f) return f.error();
  auto r = Reader((*f)->bytes).identity();
  return *r;
}

Result<Timestamp> read_timestamp(const Message& m, std::string_view name) {
  auto f = need(m, name, 4);
  if (!f) return f.error();
  return *Reader((*f)->bytes).timestamp();
}

Result<Bytes> read_bytes(const Message& m, std::string_view name) {
  auto f = need(m, name, 0);
  if (!f) return f.error();
  return (*f)->bytes;
}

std::optional<Bytes> Reader::take(std::size_t n) {
  if (pos_ + n > data_.size()) return std::nullopt;
  Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_), data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

std::optional<Digest> Reader::digest() {
  auto b = take(Digest::kBytes);
  if (!b) return std::nullopt;
  return Digest::from_bytes(*b);
}

std::optional<Identity> Reader::identity() {
  auto b = take(4);
  if (!b) return std::nullopt;
  return Identity{std::uint32_t{(*b)[0]} << 24 | std::uint32_t{(*b)[1]} << 16 | std::uint32_t{(*b)[2]} << 8 | (*b)[3]};
}

std::optional<Timestamp> Reader::timestamp() {
  auto id = identity();
  if (!id) return std::nullopt;
  return Timestamp{id->value};
}

}  // namespace fcauth::wire
