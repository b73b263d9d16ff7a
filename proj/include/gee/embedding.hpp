#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "gee/backend.hpp"

namespace gee {

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dimension() const { return values.size(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double l2_norm(const EmbeddingVector& v);
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Scales to unit L2 norm; throws std::invalid_argument on an all-zero vector.
void l2_normalize(EmbeddingVector& v);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(const std::string& text) = 0;
  virtual const std::string& id() const = 0;
};

/// Deterministic offline embedder: character bigrams and trigrams hashed to
/// a fixed number of buckets, counts accumulated, L2-normalized. Texts
/// shorter than two characters cannot be embedded.
class HashedNgramEmbedder : public Embedder {
 public:
  explicit HashedNgramEmbedder(std::size_t dimension = 512);

  EmbeddingVector embed(const std::string& text) override;
  const std::string& id() const override { return id_; }
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
  std::string id_;
};

/// Embeddings-endpoint client; the served vectors are L2-normalized on
/// receipt so the cosine space matches the fallback embedder's.
class RemoteEmbedder : public Embedder {
 public:
  RemoteEmbedder(RemoteConfig config, std::string model);

  EmbeddingVector embed(const std::string& text) override;
  const std::string& id() const override { return id_; }

 private:
  std::shared_ptr<RemoteBackend> backend_;
  std::string model_;
  std::string id_;
};

/// Parses an embedder spec string: "fallback" | "remote:<model>".
std::shared_ptr<Embedder> make_embedder(const std::string& spec, const RemoteConfig& remote);

}  // namespace gee
