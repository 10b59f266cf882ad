#include "ashdp/crypto.hpp"

#include <cstring>

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/obj_mac.h>
#include <openssl/params.h>
#include <openssl/sha.h>

namespace ashdp::crypto {

namespace {

// ECIES over P-256: ephemeral ECDH, SHA-256 KDF, AES-128-CTR stream,
// HMAC-SHA1 tag. Wire format: point(65) || ct(len(m)) || tag(20), so a
// 4-byte payload gives 89/174/259 bytes per layer count.
constexpr size_t kPointBytes = 65;
constexpr size_t kTagBytes = 20;
constexpr size_t kEciesOverhead = kPointBytes + kTagBytes;

struct EvpKey {
  EVP_PKEY* ptr = nullptr;
  ~EvpKey() {
    if (ptr) EVP_PKEY_free(ptr);
  }
};

struct EvpCtx {
  EVP_PKEY_CTX* ptr = nullptr;
  ~EvpCtx() {
    if (ptr) EVP_PKEY_CTX_free(ptr);
  }
};

EVP_PKEY* make_p256_keypair() {
  EvpCtx ctx{EVP_PKEY_CTX_new_id(EVP_PKEY_EC, nullptr)};
  if (!ctx.ptr) throw CryptoError("ecies: ctx alloc failed");
  if (EVP_PKEY_keygen_init(ctx.ptr) <= 0 ||
      EVP_PKEY_CTX_set_ec_paramgen_curve_nid(ctx.ptr, NID_X9_62_prime256v1) <= 0)
    throw CryptoError("ecies: keygen init failed");
  EVP_PKEY* key = nullptr;
  if (EVP_PKEY_keygen(ctx.ptr, &key) <= 0) throw CryptoError("ecies: keygen failed");
  return key;
}

std::vector<uint8_t> export_public_point(EVP_PKEY* key) {
  // "encoded-pub-key" yields the uncompressed SEC1 point (65 bytes on P-256).
  size_t len = 0;
  if (EVP_PKEY_get_octet_string_param(key, "encoded-pub-key", nullptr, 0, &len) <= 0)
    throw CryptoError("ecies: public export failed");
  std::vector<uint8_t> out(len);
  if (EVP_PKEY_get_octet_string_param(key, "encoded-pub-key", out.data(), out.size(),
                                      &len) <= 0)
    throw CryptoError("ecies: public export failed");
  out.resize(len);
  if (out.size() != kPointBytes) throw CryptoError("ecies: unexpected point size");
  return out;
}

std::vector<uint8_t> export_private_scalar(EVP_PKEY* key) {
  BIGNUM* bn = nullptr;
  if (EVP_PKEY_get_bn_param(key, "priv", &bn) <= 0)
    throw CryptoError("ecies: private export failed");
  std::vector<uint8_t> out(32, 0);
  BN_bn2binpad(bn, out.data(), static_cast<int>(out.size()));
  BN_free(bn);
  return out;
}

EVP_PKEY* import_public_point(const std::vector<uint8_t>& point) {
  EvpCtx ctx{EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr)};
  if (!ctx.ptr) throw CryptoError("ecies: ctx alloc failed");
  OSSL_PARAM params[3];
  char group[] = "prime256v1";
  params[0] = OSSL_PARAM_construct_utf8_string("group", group, 0);
  params[1] = OSSL_PARAM_construct_octet_string("pub", const_cast<uint8_t*>(point.data()),
                                                point.size());
  params[2] = OSSL_PARAM_construct_end();
  EVP_PKEY* key = nullptr;
  if (EVP_PKEY_fromdata_init(ctx.ptr) <= 0 ||
      EVP_PKEY_fromdata(ctx.ptr, &key, EVP_PKEY_PUBLIC_KEY, params) <= 0)
    throw CryptoError("ecies: public import failed");
  return key;
}

EVP_PKEY* import_private_scalar(const std::vector<uint8_t>& scalar,
                                const std::vector<uint8_t>& point) {
  EvpCtx ctx{EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr)};
  if (!ctx.ptr) throw CryptoError("ecies: ctx alloc failed");
  BIGNUM* bn = BN_bin2bn(scalar.data(), static_cast<int>(scalar.size()), nullptr);
  std::vector<uint8_t> bn_native(static_cast<size_t>(BN_num_bytes(bn)));
  BN_bn2nativepad(bn, bn_native.data(), static_cast<int>(bn_native.size()));
  char group[] = "prime256v1";
  OSSL_PARAM params[4] = {
      OSSL_PARAM_construct_utf8_string("group", group, 0),
      OSSL_PARAM_construct_BN("priv", bn_native.data(), bn_native.size()),
      OSSL_PARAM_construct_octet_string("pub", const_cast<uint8_t*>(point.data()),
                                        point.size()),
      OSSL_PARAM_construct_end()};
  EVP_PKEY* key = nullptr;
  int ok = EVP_PKEY_fromdata_init(ctx.ptr) > 0 &&
           EVP_PKEY_fromdata(ctx.ptr, &key, EVP_PKEY_KEYPAIR, params) > 0;
  BN_free(bn);
  if (!ok) throw CryptoError("ecies: private import failed");
  return key;
}

std::vector<uint8_t> ecdh(EVP_PKEY* own, EVP_PKEY* peer) {
  EvpCtx ctx{EVP_PKEY_CTX_new(own, nullptr)};
  if (!ctx.ptr || EVP_PKEY_derive_init(ctx.ptr) <= 0 ||
      EVP_PKEY_derive_set_peer(ctx.ptr, peer) <= 0)
    throw CryptoError("ecies: derive init failed");
  size_t len = 0;
  if (EVP_PKEY_derive(ctx.ptr, nullptr, &len) <= 0)
    throw CryptoError("ecies: derive failed");
  std::vector<uint8_t> secret(len);
  if (EVP_PKEY_derive(ctx.ptr, secret.data(), &len) <= 0)
    throw CryptoError("ecies: derive failed");
  secret.resize(len);
  return secret;
}

struct SessionKeys {
  std::array<uint8_t, 16> enc;
  std::array<uint8_t, 20> mac;
};

SessionKeys kdf(const std::vector<uint8_t>& shared) {
  std::array<uint8_t, SHA256_DIGEST_LENGTH> digest;
  SHA256(shared.data(), shared.size(), digest.data());
  SessionKeys keys{};
  std::memcpy(keys.enc.data(), digest.data(), 16);
  // MAC key from a second hash so key material does not overlap.
  std::array<uint8_t, SHA256_DIGEST_LENGTH> digest2;
  std::vector<uint8_t> tagged(shared);
  tagged.push_back(0x01);
  SHA256(tagged.data(), tagged.size(), digest2.data());
  std::memcpy(keys.mac.data(), digest2.data(), 20);
  return keys;
}

void aes128_ctr(const std::array<uint8_t, 16>& key, const uint8_t* in, size_t len,
                uint8_t* out) {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  if (!ctx) throw CryptoError("ecies: cipher ctx failed");
  std::array<uint8_t, 16> iv{};  // fresh key per message, zero IV is fine
  int out_len = 0;
  int ok = EVP_EncryptInit_ex(ctx, EVP_aes_128_ctr(), nullptr, key.data(), iv.data()) &&
           EVP_EncryptUpdate(ctx, out, &out_len, in, static_cast<int>(len));
  EVP_CIPHER_CTX_free(ctx);
  if (!ok || out_len != static_cast<int>(len)) throw CryptoError("ecies: ctr failed");
}

std::array<uint8_t, kTagBytes> hmac_sha1(const std::array<uint8_t, 20>& key,
                                         const uint8_t* data, size_t len) {
  std::array<uint8_t, kTagBytes> tag{};
  unsigned int tag_len = 0;
  if (!HMAC(EVP_sha1(), key.data(), static_cast<int>(key.size()), data, len, tag.data(),
            &tag_len) ||
      tag_len != kTagBytes)
    throw CryptoError("ecies: hmac failed");
  return tag;
}

std::vector<uint8_t> ecies_encrypt(const std::vector<uint8_t>& recipient_point,
                                   const uint8_t* msg, size_t len) {
  EvpKey eph{make_p256_keypair()};
  EvpKey peer{import_public_point(recipient_point)};
  SessionKeys keys = kdf(ecdh(eph.ptr, peer.ptr));
  std::vector<uint8_t> out(kPointBytes + len + kTagBytes);
  auto point = export_public_point(eph.ptr);
  std::memcpy(out.data(), point.data(), kPointBytes);
  aes128_ctr(keys.enc, msg, len, out.data() + kPointBytes);
  auto tag = hmac_sha1(keys.mac, out.data() + kPointBytes, len);
  std::memcpy(out.data() + kPointBytes + len, tag.data(), kTagBytes);
  return out;
}

std::vector<uint8_t> ecies_decrypt(const KeyPair& key, const std::vector<uint8_t>& ct) {
  if (ct.size() < kEciesOverhead) throw CryptoError("ecies: ciphertext too short");
  std::vector<uint8_t> point(ct.begin(), ct.begin() + kPointBytes);
  EvpKey eph{import_public_point(point)};
  EvpKey own{import_private_scalar(key.secret_key, key.public_key)};
  SessionKeys keys = kdf(ecdh(own.ptr, eph.ptr));
  size_t len = ct.size() - kEciesOverhead;
  auto tag = hmac_sha1(keys.mac, ct.data() + kPointBytes, len);
  if (std::memcmp(tag.data(), ct.data() + kPointBytes + len, kTagBytes) != 0)
    throw CryptoError("ecies: authentication failed (wrong key?)");
  std::vector<uint8_t> out(len);
  aes128_ctr(keys.enc, ct.data() + kPointBytes, len, out.data());
  return out;
}

}  // namespace

void SizeModel::validate() const {
  if (tau1 <= 0 || tau2 < tau1 || tau3 < tau2)
    throw std::invalid_argument("size model must satisfy 0 < tau1 <= tau2 <= tau3");
}

CipherSuite CipherSuite::mock(const SizeModel& model) {
  model.validate();
  CipherSuite s;
  s.kind_ = SchemeKind::kMock;
  s.model_ = model;
  return s;
}

CipherSuite CipherSuite::ecies() {
  CipherSuite s;
  s.kind_ = SchemeKind::kEcies;
  s.model_.tau1 = static_cast<double>((kEciesOverhead + kPayloadBytes) * 8);
  s.model_.tau2 = static_cast<double>((2 * kEciesOverhead + kPayloadBytes) * 8);
  s.model_.tau3 = static_cast<double>((3 * kEciesOverhead + kPayloadBytes) * 8);
  return s;
}

KeyPair CipherSuite::keygen(int gamma, Rng& rng) const {
  KeyPair kp;
  kp.scheme = kind_;
  kp.gamma = gamma;
  if (kind_ == SchemeKind::kMock) {
    kp.key_id = rng.next_u64();
    return kp;
  }
  if (gamma != 256) throw CryptoError("ecies: only gamma = 256 is supported");
  EvpKey key{make_p256_keypair()};
  kp.public_key = export_public_point(key.ptr);
  kp.secret_key = export_private_scalar(key.ptr);
  return kp;
}

LayeredCiphertext CipherSuite::encrypt_layers(Payload payload,
                                              const std::vector<const KeyPair*>& keys,
                                              Rng& rng) const {
  (void)rng;  // mock encryption is deterministic; ECIES draws its own randomness
  if (keys.empty() || keys.size() > 3)
    throw CryptoError("encrypt_layers: need 1 to 3 keys");
  LayeredCiphertext ct;
  ct.scheme = kind_;
  ct.layers = static_cast<int>(keys.size());
  if (kind_ == SchemeKind::kMock) {
    ct.mock_payload = payload;
    // Keys listed outermost-last at call site; store outermost-first.
    for (auto it = keys.rbegin(); it != keys.rend(); ++it)
      ct.layer_key_ids.push_back((*it)->key_id);
    return ct;
  }
  uint8_t buf[kPayloadBytes];
  for (size_t i = 0; i < kPayloadBytes; ++i)
    buf[i] = static_cast<uint8_t>(payload >> (8 * i));
  std::vector<uint8_t> cur(buf, buf + kPayloadBytes);
  for (const KeyPair* key : keys) cur = ecies_encrypt(key->public_key, cur.data(), cur.size());
  ct.bytes = std::move(cur);
  return ct;
}

CipherSuite::PeelResult CipherSuite::decrypt_layer(const LayeredCiphertext& ct,
                                                   const KeyPair& key) const {
  if (ct.layers < 1) throw CryptoError("decrypt_layer: no layers left");
  PeelResult res;
  if (kind_ == SchemeKind::kMock) {
    if (ct.layer_key_ids.front() != key.key_id)
      throw CryptoError("decrypt_layer: wrong key");
    if (ct.layers == 1) {
      res.done = true;
      res.payload = ct.mock_payload;
      return res;
    }
    res.inner = ct;
    res.inner.layers -= 1;
    res.inner.layer_key_ids.erase(res.inner.layer_key_ids.begin());
    return res;
  }
  std::vector<uint8_t> plain = ecies_decrypt(key, ct.bytes);
  if (ct.layers == 1) {
    if (plain.size() != kPayloadBytes) throw CryptoError("decrypt_layer: bad payload size");
    Payload p = 0;
    for (size_t i = 0; i < kPayloadBytes; ++i)
      p |= static_cast<Payload>(plain[i]) << (8 * i);
    res.done = true;
    res.payload = p;
    return res;
  }
  res.inner.scheme = kind_;
  res.inner.layers = ct.layers - 1;
  res.inner.bytes = std::move(plain);
  return res;
}

double CipherSuite::ciphertext_size_bits(const LayeredCiphertext& ct) const {
  if (kind_ == SchemeKind::kEcies) return static_cast<double>(ct.bytes.size()) * 8.0;
  return size_bits_for_layers(ct.layers);
}

double CipherSuite::size_bits_for_layers(int layers) const {
  switch (layers) {
    case 1: return model_.tau1;
    case 2: return model_.tau2;
    case 3: return model_.tau3;
    default: throw CryptoError("size_bits_for_layers: layers must be 1..3");
  }
}

}  // namespace ashdp::crypto
