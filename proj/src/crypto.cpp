#include "mqttz/crypto.hpp"

#include <fstream>
#include <sstream>

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>

#include "mqttz/crypto_testing.hpp"
#include "mqttz/error.hpp"

namespace mqttz::crypto {
namespace {

struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* c) const noexcept { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;

struct PkeyCtxFree {
  void operator()(EVP_PKEY_CTX* c) const noexcept { EVP_PKEY_CTX_free(c); }
};
using PkeyCtx = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree>;

struct BioFree {
  void operator()(BIO* b) const noexcept { BIO_free(b); }
};
using BioPtr = std::unique_ptr<BIO, BioFree>;

CipherCtx new_cipher_ctx() {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw Error(Errc::Internal, "EVP_CIPHER_CTX_new failed");
  return ctx;
}

int to_int(std::size_t n) {
  if (n > static_cast<std::size_t>(INT32_MAX)) throw Error(Errc::InvalidArgument, "buffer too large");
  return static_cast<int>(n);
}

EncryptedEnvelope cbc_encrypt(const SymmetricKey& key, const std::array<std::uint8_t, kIvSize>& iv,
                              ByteView plaintext) {
  auto ctx = new_cipher_ctx();
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_cbc(), nullptr, key.bytes().data(), iv.data()) != 1)
    throw Error(Errc::Internal, "AES-CBC encrypt init failed");
  EncryptedEnvelope env;
  env.iv = iv;
  env.ciphertext.resize(ciphertext_size(plaintext.size()));
  int n = 0;
  int total = 0;
  if (EVP_EncryptUpdate(ctx.get(), env.ciphertext.data(), &n, plaintext.data(),
                        to_int(plaintext.size())) != 1)
    throw Error(Errc::Internal, "AES-CBC encrypt failed");
  total = n;
  if (EVP_EncryptFinal_ex(ctx.get(), env.ciphertext.data() + total, &n) != 1)
    throw Error(Errc::Internal, "AES-CBC encrypt final failed");
  total += n;
  env.ciphertext.resize(static_cast<std::size_t>(total));
  return env;
}

std::string read_bio(BIO* bio) {
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  return std::string(data, static_cast<std::size_t>(len));
}

}  // namespace

SymmetricKey::~SymmetricKey() { secure_wipe(bytes_); }

SymmetricKey SymmetricKey::random() {
  SymmetricKey k;
  random_bytes(k.bytes_);
  return k;
}

SymmetricKey SymmetricKey::from_bytes(ByteView bytes) {
  if (bytes.size() != kKeySize) throw Error(Errc::InvalidArgument, "symmetric key must be 32 bytes");
  SymmetricKey k;
  std::copy(bytes.begin(), bytes.end(), k.bytes_.begin());
  return k;
}

SymmetricKey SymmetricKey::from_hex(std::string_view hex) {
  auto raw = mqttz::from_hex(hex);
  auto k = from_bytes(raw);
  secure_wipe(raw);
  return k;
}

bool SymmetricKey::operator==(const SymmetricKey& other) const noexcept {
  return CRYPTO_memcmp(bytes_.data(), other.bytes_.data(), kKeySize) == 0;
}

HukSeed HukSeed::from_hex(std::string_view hex) {
  if (hex.size() != 64) throw Error(Errc::InvalidArgument, "HUK seed must be 64 hex characters");
  auto raw = mqttz::from_hex(hex);
  HukSeed s;
  std::copy(raw.begin(), raw.end(), s.seed.begin());
  secure_wipe(raw);
  return s;
}

void random_bytes(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), to_int(out.size())) != 1)
    throw Error(Errc::Internal, "RAND_bytes failed");
}

EncryptedEnvelope encrypt_payload(const SymmetricKey& key, ByteView plaintext) {
  std::array<std::uint8_t, kIvSize> iv{};
  random_bytes(iv);
  return cbc_encrypt(key, iv, plaintext);
}

Bytes decrypt_payload(const SymmetricKey& key, const EncryptedEnvelope& env) {
  env.validate();
  auto ctx = new_cipher_ctx();
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_cbc(), nullptr, key.bytes().data(),
                         env.iv.data()) != 1)
    throw Error(Errc::Internal, "AES-CBC decrypt init failed");
  Bytes out(env.ciphertext.size() + kBlockSize);
  int n = 0;
  if (EVP_DecryptUpdate(ctx.get(), out.data(), &n, env.ciphertext.data(),
                        to_int(env.ciphertext.size())) != 1) {
    secure_wipe(out);
    throw Error(Errc::Internal, "AES-CBC decrypt failed");
  }
  int total = n;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + total, &n) != 1) {
    secure_wipe(out);
    throw Error(Errc::BadPadding, "invalid PKCS#7 padding");
  }
  total += n;
  secure_wipe(std::span(out).subspan(static_cast<std::size_t>(total)));
  out.resize(static_cast<std::size_t>(total));
  return out;
}

namespace testing {
EncryptedEnvelope encrypt_payload_with_iv(const SymmetricKey& key,
                                          const std::array<std::uint8_t, kIvSize>& iv,
                                          ByteView plaintext) {
  return cbc_encrypt(key, iv, plaintext);
}
}  // namespace testing

void PublicKey::Free::operator()(EVP_PKEY* k) const noexcept { EVP_PKEY_free(k); }

PublicKey PublicKey::from_pem(std::string_view pem) {
  BioPtr bio(BIO_new_mem_buf(pem.data(), to_int(pem.size())));
  if (!bio) throw Error(Errc::Internal, "BIO_new_mem_buf failed");
  EVP_PKEY* k = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
  if (!k) throw Error(Errc::InvalidArgument, "cannot parse public key PEM");
  if (EVP_PKEY_get_base_id(k) != EVP_PKEY_RSA || EVP_PKEY_get_bits(k) != 2048) {
    EVP_PKEY_free(k);
    throw Error(Errc::InvalidArgument, "broker public key must be RSA-2048");
  }
  return PublicKey(k);
}

PublicKey PublicKey::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open public key file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_pem(ss.str());
}

std::string PublicKey::to_pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_PUBKEY(bio.get(), key_.get()) != 1)
    throw Error(Errc::Internal, "cannot write public key PEM");
  return read_bio(bio.get());
}

BrokerKeyPair::BrokerKeyPair(EVP_PKEY* k) : key_(k, PublicKey::Free{}) {}

BrokerKeyPair BrokerKeyPair::generate() {
  EVP_PKEY* k = EVP_RSA_gen(2048);
  if (!k) throw Error(Errc::Internal, "RSA key generation failed");
  return BrokerKeyPair(k);
}

BrokerKeyPair BrokerKeyPair::from_private_pem(std::string_view pem) {
  BioPtr bio(BIO_new_mem_buf(pem.data(), to_int(pem.size())));
  if (!bio) throw Error(Errc::Internal, "BIO_new_mem_buf failed");
  EVP_PKEY* k = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
  if (!k) throw Error(Errc::InvalidArgument, "cannot parse private key PEM");
  return BrokerKeyPair(k);
}

PublicKey BrokerKeyPair::public_key() const { return PublicKey::from_pem(public_pem()); }

std::string BrokerKeyPair::public_pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_PUBKEY(bio.get(), key_.get()) != 1)
    throw Error(Errc::Internal, "cannot write public key PEM");
  return read_bio(bio.get());
}

std::string BrokerKeyPair::private_pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio ||
      PEM_write_bio_PrivateKey(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1)
    throw Error(Errc::Internal, "cannot write private key PEM");
  return read_bio(bio.get());
}

namespace {
void set_oaep(EVP_PKEY_CTX* ctx) {
  if (EVP_PKEY_CTX_set_rsa_padding(ctx, RSA_PKCS1_OAEP_PADDING) <= 0 ||
      EVP_PKEY_CTX_set_rsa_oaep_md(ctx, EVP_sha256()) <= 0 ||
      EVP_PKEY_CTX_set_rsa_mgf1_md(ctx, EVP_sha256()) <= 0)
    throw Error(Errc::Internal, "cannot configure RSA-OAEP");
}
}  // namespace

WrappedKey wrap_client_key(const PublicKey& pub, const SymmetricKey& key) {
  PkeyCtx ctx(EVP_PKEY_CTX_new_from_pkey(nullptr, pub.get(), nullptr));
  if (!ctx || EVP_PKEY_encrypt_init(ctx.get()) <= 0)
    throw Error(Errc::Internal, "RSA encrypt init failed");
  set_oaep(ctx.get());
  WrappedKey out{};
  std::size_t outlen = out.size();
  if (EVP_PKEY_encrypt(ctx.get(), out.data(), &outlen, key.bytes().data(), key.bytes().size()) <= 0 ||
      outlen != out.size())
    throw Error(Errc::Internal, "RSA-OAEP encryption failed");
  return out;
}

SymmetricKey unwrap_client_key(const BrokerKeyPair& priv, const WrappedKey& wrapped) {
  PkeyCtx ctx(EVP_PKEY_CTX_new_from_pkey(nullptr, priv.get(), nullptr));
  if (!ctx || EVP_PKEY_decrypt_init(ctx.get()) <= 0)
    throw Error(Errc::Internal, "RSA decrypt init failed");
  set_oaep(ctx.get());
  std::array<std::uint8_t, kWrappedKeySize> out{};
  std::size_t outlen = out.size();
  if (EVP_PKEY_decrypt(ctx.get(), out.data(), &outlen, wrapped.data(), wrapped.size()) <= 0) {
    throw Error(Errc::UnwrapFailed, "OAEP decoding failed");
  }
  if (outlen != kKeySize) {
    secure_wipe(out);
    throw Error(Errc::UnwrapFailed, "unwrapped payload is not 32 bytes");
  }
  auto key = SymmetricKey::from_bytes(std::span(out).first(kKeySize));
  secure_wipe(out);
  return key;
}

Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t length) {
  EVP_KDF* kdf = EVP_KDF_fetch(nullptr, "HKDF", nullptr);
  if (!kdf) throw Error(Errc::Internal, "HKDF unavailable");
  EVP_KDF_CTX* kctx = EVP_KDF_CTX_new(kdf);
  EVP_KDF_free(kdf);
  if (!kctx) throw Error(Errc::Internal, "EVP_KDF_CTX_new failed");

  char digest[] = "SHA256";
  OSSL_PARAM params[5];
  std::size_t n = 0;
  params[n++] = OSSL_PARAM_construct_utf8_string(OSSL_KDF_PARAM_DIGEST, digest, 0);
  params[n++] = OSSL_PARAM_construct_octet_string(
      OSSL_KDF_PARAM_KEY, const_cast<std::uint8_t*>(ikm.data()), ikm.size());
  if (!salt.empty())
    params[n++] = OSSL_PARAM_construct_octet_string(
        OSSL_KDF_PARAM_SALT, const_cast<std::uint8_t*>(salt.data()), salt.size());
  params[n++] = OSSL_PARAM_construct_octet_string(
      OSSL_KDF_PARAM_INFO, const_cast<std::uint8_t*>(info.data()), info.size());
  params[n++] = OSSL_PARAM_construct_end();

  Bytes out(length);
  int rc = EVP_KDF_derive(kctx, out.data(), out.size(), params);
  EVP_KDF_CTX_free(kctx);
  if (rc != 1) throw Error(Errc::Internal, "HKDF derivation failed");
  return out;
}

SymmetricKey derive_storage_key(const std::optional<HukSeed>& seed) {
  if (!seed) throw Error(Errc::MissingSeed, "HUK seed is not configured");
  auto okm = hkdf_sha256(seed->seed, {}, as_bytes(kStorageKeyInfo), kKeySize);
  auto key = SymmetricKey::from_bytes(okm);
  secure_wipe(okm);
  return key;
}

std::array<std::uint8_t, 32> sha256(ByteView data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::Internal, "SHA-256 failed");
  return out;
}

Bytes gcm_seal(const SymmetricKey& key, ByteView nonce, ByteView plaintext, ByteView ad) {
  if (nonce.size() != kGcmNonceSize) throw Error(Errc::InvalidArgument, "GCM nonce must be 12 bytes");
  auto ctx = new_cipher_ctx();
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.bytes().data(), nonce.data()) != 1)
    throw Error(Errc::Internal, "AES-GCM init failed");
  int n = 0;
  if (!ad.empty() && EVP_EncryptUpdate(ctx.get(), nullptr, &n, ad.data(), to_int(ad.size())) != 1)
    throw Error(Errc::Internal, "AES-GCM AAD failed");
  Bytes out(plaintext.size() + kGcmTagSize);
  if (EVP_EncryptUpdate(ctx.get(), out.data(), &n, plaintext.data(), to_int(plaintext.size())) != 1)
    throw Error(Errc::Internal, "AES-GCM encrypt failed");
  int total = n;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + total, &n) != 1)
    throw Error(Errc::Internal, "AES-GCM final failed");
  total += n;
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kGcmTagSize, out.data() + total) != 1)
    throw Error(Errc::Internal, "AES-GCM tag failed");
  out.resize(static_cast<std::size_t>(total) + kGcmTagSize);
  return out;
}

Bytes gcm_open(const SymmetricKey& key, ByteView nonce, ByteView sealed, ByteView ad) {
  if (nonce.size() != kGcmNonceSize || sealed.size() < kGcmTagSize)
    throw Error(Errc::UnsealFailed, "sealed record too short");
  auto ctx = new_cipher_ctx();
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.bytes().data(), nonce.data()) != 1)
    throw Error(Errc::Internal, "AES-GCM init failed");
  int n = 0;
  if (!ad.empty() && EVP_DecryptUpdate(ctx.get(), nullptr, &n, ad.data(), to_int(ad.size())) != 1)
    throw Error(Errc::Internal, "AES-GCM AAD failed");
  auto body = sealed.first(sealed.size() - kGcmTagSize);
  auto tag = sealed.last(kGcmTagSize);
  Bytes out(body.size() + kBlockSize);
  if (EVP_DecryptUpdate(ctx.get(), out.data(), &n, body.data(), to_int(body.size())) != 1)
    throw Error(Errc::Internal, "AES-GCM decrypt failed");
  int total = n;
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kGcmTagSize,
                          const_cast<std::uint8_t*>(tag.data())) != 1)
    throw Error(Errc::Internal, "AES-GCM set tag failed");
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + total, &n) != 1) {
    secure_wipe(out);
    throw Error(Errc::UnsealFailed, "authentication tag mismatch");
  }
  total += n;
  out.resize(static_cast<std::size_t>(total));
  return out;
}

Bytes seal_payload_aead(const SymmetricKey& key, ByteView plaintext, ByteView topic) {
  Bytes out(kGcmNonceSize);
  random_bytes(out);
  auto body = gcm_seal(key, out, plaintext, topic);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Bytes open_payload_aead(const SymmetricKey& key, ByteView sealed, ByteView topic) {
  if (sealed.size() < kGcmNonceSize + kGcmTagSize) throw Error(Errc::UnsealFailed, "payload too short");
  return gcm_open(key, sealed.first(kGcmNonceSize), sealed.subspan(kGcmNonceSize), topic);
}

}  // namespace mqttz::crypto
