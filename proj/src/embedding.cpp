#include "gee/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "gee/text.hpp"

namespace gee {

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw std::invalid_argument("embedding dimension mismatch: " + std::to_string(a.dimension()) +
                                " vs " + std::to_string(b.dimension()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    sum += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
  }
  return sum;
}

double l2_norm(const EmbeddingVector& v) {
  double sum = 0.0;
  for (float x : v.values) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

void l2_normalize(EmbeddingVector& v) {
  const double norm = l2_norm(v);
  if (norm == 0.0) throw std::invalid_argument("cannot normalize an all-zero embedding");
  for (float& x : v.values) x = static_cast<float>(static_cast<double>(x) / norm);
}

namespace {

// FNV-1a over the UTF-8 bytes of an n-gram, salted by n so bigram and
// trigram spaces do not alias.
std::uint64_t fnv1a(std::uint64_t seed, const std::string& data) {
  std::uint64_t hash = 14695981039346656037ULL ^ seed;
  for (unsigned char byte : data) {
    hash ^= byte;
    hash *= 1099511628211ULL;
  }
  return hash;
}

}  // namespace

HashedNgramEmbedder::HashedNgramEmbedder(std::size_t dimension)
    : dimension_(dimension), id_("hashed-ngram-" + std::to_string(dimension)) {
  if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

EmbeddingVector HashedNgramEmbedder::embed(const std::string& text) {
  const auto cps = decode_utf8(text);
  if (cps.size() < 2) throw std::invalid_argument("text too short to embed: \"" + text + "\"");

  EmbeddingVector v;
  v.values.assign(dimension_, 0.0f);
  for (std::size_t n = 2; n <= 3; ++n) {
    if (cps.size() < n) break;
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
      std::string gram;
      for (std::size_t k = 0; k < n; ++k) gram += encode_utf8(cps[i + k]);
      const auto bucket = fnv1a(n, gram) % dimension_;
      v.values[bucket] += 1.0f;
    }
  }
  l2_normalize(v);
  return v;
}

RemoteEmbedder::RemoteEmbedder(RemoteConfig config, std::string model)
    : model_(std::move(model)), id_("remote:" + model_) {
  config.id = id_;
  backend_ = std::make_shared<RemoteBackend>(std::move(config));
}

EmbeddingVector RemoteEmbedder::embed(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  EmbeddingVector v;
  v.values = backend_->embed(model_, text);
  l2_normalize(v);
  return v;
}

std::shared_ptr<Embedder> make_embedder(const std::string& spec, const RemoteConfig& remote) {
  if (spec == "fallback" || spec.empty()) return std::make_shared<HashedNgramEmbedder>();
  if (spec.rfind("remote:", 0) == 0) {
    const std::string model = spec.substr(7);
    if (model.empty()) throw std::invalid_argument("remote embedder spec needs a model name");
    if (remote.base_url.empty()) {
      throw std::invalid_argument("remote embedder requires an API base url (GEE_API_BASE)");
    }
    return std::make_shared<RemoteEmbedder>(remote, model);
  }
  throw std::invalid_argument("unknown embedder spec: " + spec);
}

}  // namespace gee
