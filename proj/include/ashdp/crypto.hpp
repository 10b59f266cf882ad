#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ashdp/rng.hpp"

namespace ashdp::crypto {

struct CryptoError : std::runtime_error {
  explicit CryptoError(const std::string& what) : std::runtime_error(what) {}
};

// Payload symbols are fixed-width 32-bit values: 0 encodes the "unselected"
// sentinel, anything else is a 1-based item or hash value. Fixed width keeps
// ciphertext sizes independent of the plaintext, so replacement is
// indistinguishable by size.
using Payload = uint32_t;
constexpr Payload kBottom = 0;
constexpr size_t kPayloadBytes = 4;

enum class SchemeKind { kMock, kEcies };

// Declared single/double/triple ciphertext sizes in bits.
struct SizeModel {
  double tau1 = 712.0;
  double tau2 = 1392.0;
  double tau3 = 2072.0;
  void validate() const;
};

struct KeyPair {
  SchemeKind scheme = SchemeKind::kMock;
  int gamma = 256;
  uint64_t key_id = 0;              // mock
  std::vector<uint8_t> public_key;  // ecies: uncompressed EC point
  std::vector<uint8_t> secret_key;  // ecies: scalar
};

// 1..3 layers, outermost first. Each layer records the key it was produced
// under (mock: key id; real: opaque bytes).
struct LayeredCiphertext {
  SchemeKind scheme = SchemeKind::kMock;
  int layers = 0;
  std::vector<uint64_t> layer_key_ids;  // mock, outermost first
  Payload mock_payload = kBottom;       // mock carries the value directly
  std::vector<uint8_t> bytes;           // ecies wire bytes (outermost layer)
};

class CipherSuite {
 public:
  static CipherSuite mock(const SizeModel& model = {});
  static CipherSuite ecies();

  SchemeKind kind() const { return kind_; }
  const SizeModel& size_model() const { return model_; }

  KeyPair keygen(int gamma, Rng& rng) const;

  // Encrypts payload under keys outermost-last: encrypt_layers(m, {kd, ks, kd})
  // produces E_kd[E_ks[E_kd[m]]].
  LayeredCiphertext encrypt_layers(Payload payload, const std::vector<const KeyPair*>& keys,
                                   Rng& rng) const;

  // Peels one layer. Returns either a shallower ciphertext or, at the last
  // layer, the payload (signalled by done).
  struct PeelResult {
    bool done = false;
    Payload payload = kBottom;
    LayeredCiphertext inner;
  };
  PeelResult decrypt_layer(const LayeredCiphertext& ct, const KeyPair& key) const;

  double ciphertext_size_bits(const LayeredCiphertext& ct) const;
  // Size a k-layer ciphertext would have (used by counter-mode accounting).
  double size_bits_for_layers(int layers) const;

 private:
  SchemeKind kind_ = SchemeKind::kMock;
  SizeModel model_;
};

}  // namespace ashdp::crypto
