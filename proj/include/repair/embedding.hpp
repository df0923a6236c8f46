#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "repair/corpus.hpp"

namespace repair {

struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }
};

/// Cosine similarity in [-1, 1]. Throws on dimension mismatch or zero vector.
double cosine_sim(const EmbeddingVector& u, const EmbeddingVector& v);

class Embedder {
public:
    virtual ~Embedder() = default;

    virtual EmbeddingVector embed(const std::string& text) = 0;

    /// Vectors in request order. Default loops over embed().
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

    /// Identifies backend + model + dim; part of every cache key so caches
    /// from different embedder configurations never mix.
    virtual std::string cache_key_prefix() const = 0;
};

/// Deterministic hashed bag-of-tokens embedder: each token is FNV-1a-hashed
/// into one of `dim` buckets with weight +1, then the vector is L2-normalized.
/// Identical text always gives a bitwise-identical vector.
class MockEmbedder : public Embedder {
public:
    explicit MockEmbedder(int dim = 256);

    EmbeddingVector embed(const std::string& text) override;
    std::string cache_key_prefix() const override;

    int dim() const { return dim_; }

private:
    int dim_;
};

/// File-per-vector disk cache keyed by content hash of (backend config, text).
/// In require_cached mode a miss is an error instead of a recompute; the
/// `graph` subcommand uses that to insist on a prior `index` run.
class DiskCachedEmbedder : public Embedder {
public:
    DiskCachedEmbedder(std::shared_ptr<Embedder> backend, std::string cache_dir,
                       bool require_cached = false);

    EmbeddingVector embed(const std::string& text) override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    std::string cache_key_prefix() const override;

    std::string cache_path_for(const std::string& text) const;

    /// When set, cached entries are ignored and overwritten (--no-cache).
    void set_refresh(bool refresh) { refresh_ = refresh; }

private:
    EmbeddingVector load_cached(const std::string& path) const;
    void store(const std::string& path, const EmbeddingVector& vec) const;

    std::shared_ptr<Embedder> backend_;
    std::string cache_dir_;
    bool require_cached_;
    bool refresh_ = false;
    std::mutex write_mu_;
};

/// In-memory memoization shared by the reward and pipeline code paths, so a
/// document or step text is embedded at most once per run.
class EmbeddingProvider {
public:
    explicit EmbeddingProvider(Embedder& backend) : backend_(&backend) {}

    const EmbeddingVector& for_doc(const Document& doc);
    const EmbeddingVector& for_text(const std::string& text);

    /// Seeds the per-document memo (e.g. from a persisted embedding cache).
    void preload_doc(const std::string& doc_id, EmbeddingVector vec);

    Embedder& backend() { return *backend_; }

private:
    Embedder* backend_;
    std::unordered_map<std::string, EmbeddingVector> by_doc_id_;
    std::unordered_map<std::string, EmbeddingVector> by_text_;
    std::mutex mu_;
};

}  // namespace repair
